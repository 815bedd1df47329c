use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use msinject::analysis::distill_15to1;
use msinject_cli::fit::{fit_rows, parse_size, read_rows, Component, FitKind, Selection};
use msinject_cli::{cmd_verify, run_sweep, to_csv, with_workers, write_atomic, ExperimentConfig, EXIT_CONFIG, EXIT_INVARIANT};

#[derive(Parser)]
#[command(name = "msinject", version, about = "Biased-noise magic-state injection on the XZZX surface code")]
struct Cli {
    /// Worker threads; overrides the config value.
    #[arg(long, global = true, env = "MSINJECT_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Quadratic,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum ComponentArg {
    Total,
    Xl,
    Zl,
}

#[derive(Subcommand)]
enum Command {
    /// Check layouts, noiseless determinism and the stage-I single-fault suite.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample every sweep point and write one CSV row per point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; overrides the config value.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed; overrides the config value.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a power law to rows of a sweep CSV.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum, default_value = "quadratic")]
        kind: KindArg,
        #[arg(long, value_enum, default_value = "zl")]
        component: ComponentArg,
        #[arg(long)]
        scheme: Option<String>,
        /// Sizes such as `3x15`; defaults to the two largest in the file.
        #[arg(long = "size", value_parser = parse_size_arg)]
        sizes: Vec<(usize, usize)>,
        /// Largest `p` used; defaults to the lower half of each size's points.
        #[arg(long)]
        p_max: Option<f64>,
    },
    /// Output error of 15-to-1 distillation for a raw error rate.
    Distill { eps: f64 },
}

fn parse_size_arg(s: &str) -> Result<(usize, usize), String> {
    parse_size(s).ok_or_else(|| format!("expected DXxDZ, got {s:?}"))
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let load = |path: &PathBuf| ExperimentConfig::load(path);
    match cli.command {
        Command::Verify { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            match with_workers(cli.workers.or(cfg.workers), || cmd_verify(&cfg)) {
                Ok(Ok(report)) => {
                    print!("{report}");
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        fail(EXIT_INVARIANT, "verification failed")
                    }
                }
                Ok(Err(e)) => fail(EXIT_CONFIG, e),
                Err(e) => fail(EXIT_CONFIG, e),
            }
        }
        Command::Sweep { config, out, seed } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let Some(out) = out.or(cfg.out.clone()) else {
                return fail(EXIT_CONFIG, "no output path: pass --out or set `out`");
            };
            let result = with_workers(cli.workers.or(cfg.workers), || {
                run_sweep(&cfg, |r| eprintln!("p={:.4e} accepted {}/{}", r.point.p, r.tally.accepted, r.tally.shots))
            });
            let rows = match result {
                Ok(Ok(rows)) => rows,
                Ok(Err(e)) => return fail(EXIT_CONFIG, e),
                Err(e) => return fail(EXIT_CONFIG, e),
            };
            match write_atomic(&out, &to_csv(&cfg, &rows)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(EXIT_CONFIG, e),
            }
        }
        Command::Fit { csv, kind, component, scheme, sizes, p_max } => {
            let kind = match kind {
                KindArg::Quadratic => FitKind::Quadratic,
                KindArg::Linear => FitKind::Linear,
            };
            let component = match component {
                ComponentArg::Total => Component::Total,
                ComponentArg::Xl => Component::Xl,
                ComponentArg::Zl => Component::Zl,
            };
            let report = read_rows(&csv).and_then(|rows| fit_rows(&rows, kind, component, &Selection { scheme, sizes, p_max }));
            match report {
                Ok(r) => {
                    print!("{r}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_CONFIG, e),
            }
        }
        Command::Distill { eps } => {
            if !(0.0..=1.0).contains(&eps) {
                return fail(EXIT_CONFIG, format!("eps must lie in [0, 1], got {eps}"));
            }
            println!("{:.8e}", distill_15to1(eps));
            ExitCode::SUCCESS
        }
    }
}
