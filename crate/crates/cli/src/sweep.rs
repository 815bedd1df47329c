//! Sweep execution and CSV output.

use std::io::Write;
use std::path::Path;

use msinject::analysis::{rates, Rates};
use msinject::sim::{SimError, Simulator, Tally};

use crate::config::{ConfigError, ExperimentConfig, Point};

pub const COLUMNS: [&str; 22] = [
    "scheme",
    "model",
    "eta",
    "p",
    "p_cx",
    "dx1",
    "dz1",
    "dx2",
    "dz2",
    "dm",
    "shots",
    "accepted",
    "success_rate",
    "success_sem",
    "eps_total",
    "eps_total_sem",
    "eps_xl",
    "eps_xl_sem",
    "eps_zl",
    "eps_zl_sem",
    "seed",
    "flags",
];

/// Marks rows where no trial survived post-selection.
pub const FLAG_NO_ACCEPTED: &str = "no_accepted";

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One sweep point's tally together with its configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub point: Point,
    pub tally: Tally,
    pub rates: Rates,
}

fn sci(x: f64) -> String {
    format!("{x:.8e}")
}

impl ResultRow {
    pub fn record(&self, cfg: &ExperimentConfig) -> Vec<String> {
        let r = &self.rates;
        let pair = |e: Option<(f64, f64)>| match e {
            Some((v, s)) => [sci(v), sci(s)],
            None => [String::new(), String::new()],
        };
        let errs = r.errors;
        let total = pair(errs.map(|e| (e.total.value, e.total.sem)));
        let xl = pair(errs.map(|e| (e.xl.value, e.xl.sem)));
        let zl = pair(errs.map(|e| (e.zl.value, e.zl.sem)));
        let flags = if errs.is_none() { FLAG_NO_ACCEPTED } else { "" };
        let mut out = vec![
            format!("{:?}", cfg.scheme).to_lowercase(),
            format!("{:?}", cfg.noise.model),
            cfg.noise.eta.to_string(),
            sci(self.point.p),
            sci(self.point.p_cx),
            cfg.dx1.to_string(),
            cfg.dz1.to_string(),
            cfg.dx2.to_string(),
            cfg.dz2.to_string(),
            cfg.dm().to_string(),
            self.tally.shots.to_string(),
            self.tally.accepted.to_string(),
            sci(r.success.value),
            sci(r.success.sem),
        ];
        out.extend(total);
        out.extend(xl);
        out.extend(zl);
        out.push(cfg.seed.to_string());
        out.push(flags.to_string());
        out
    }
}

/// Run every sweep point. Point `i` (in increasing `p`) uses random stream `i`.
pub fn run_sweep(cfg: &ExperimentConfig, mut progress: impl FnMut(&ResultRow)) -> Result<Vec<ResultRow>, SweepError> {
    let program = cfg.program()?;
    let mut rows = Vec::new();
    for (i, point) in cfg.points()?.into_iter().enumerate() {
        let sim = Simulator::new(program.clone(), cfg.noise_model(point.p)?)?;
        let tally = sim.run_experiment(cfg.shots, cfg.seed, i as u64)?;
        let rates = rates(&tally).expect("at least one shot");
        let row = ResultRow { point, tally, rates };
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub fn to_csv(cfg: &ExperimentConfig, rows: &[ResultRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record(r.record(cfg)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

/// Write through a temporary file in the target directory and rename into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), SweepError> {
    let io = |source| SweepError::Io { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use msinject::sim::LogicalClass;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::parse(
            r#"
scheme = "standard"
dx1 = 1
dz1 = 3
dx2 = 3
dz2 = 5
shots = 300
seed = 11
[noise]
model = "B"
eta = "inf"
[sweep]
p = [0.02, 0.001, 0.005]
"#,
        )
        .unwrap()
    }

    #[test]
    fn rows_follow_increasing_p() {
        let rows = run_sweep(&cfg(), |_| {}).unwrap();
        let ps: Vec<f64> = rows.iter().map(|r| r.point.p).collect();
        assert_eq!(ps, [0.001, 0.005, 0.02]);
        for r in &rows {
            assert_eq!(r.tally.shots, 300);
            assert!((r.rates.success.value * 300.0 - r.tally.accepted as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_layout() {
        let c = cfg();
        let rows = run_sweep(&c, |_| {}).unwrap();
        let text = to_csv(&c, &rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], COLUMNS.join(","));
        let f: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(f.len(), 22);
        assert_eq!(&f[..3], ["standard", "B", "inf"]);
        assert_eq!(f[3], "1.00000000e-3");
        assert_eq!(f[4], "2.00000000e-3");
        assert_eq!(&f[5..11], ["1", "3", "3", "5", "5", "300"]);
        assert_eq!(f[20], "11");
    }

    #[test]
    fn empty_acceptance_is_flagged() {
        let c = cfg();
        let row = ResultRow {
            point: Point { p: 0.1, p_cx: 0.2 },
            tally: Tally { shots: 5, accepted: 0, counts: [0; 4] },
            rates: rates(&Tally { shots: 5, accepted: 0, counts: [0; 4] }).unwrap(),
        };
        let rec = row.record(&c);
        assert_eq!(rec[11], "0");
        assert!(rec[14..20].iter().all(String::is_empty));
        assert_eq!(rec[21], FLAG_NO_ACCEPTED);
    }

    #[test]
    fn error_columns_match_counts() {
        let c = cfg();
        let mut t = Tally::default();
        for (class, n) in [(LogicalClass::I, 90), (LogicalClass::ZL, 6), (LogicalClass::YL, 4)] {
            t.accepted += n;
            t.shots += n;
            t.counts[class as usize] += n;
        }
        let row = ResultRow { point: Point { p: 0.1, p_cx: 0.2 }, tally: t, rates: rates(&t).unwrap() };
        let rec = row.record(&c);
        assert_eq!(rec[14], "1.00000000e-1");
        assert_eq!(rec[16], "4.00000000e-2");
        assert_eq!(rec[18], "1.00000000e-1");
    }

    #[test]
    fn atomic_write_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b\n");
        let leftovers = std::fs::read_dir(path.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}
