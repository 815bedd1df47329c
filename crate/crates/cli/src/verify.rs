//! Structural and fault-tolerance checks run before any sampling.

use std::fmt;

use msinject::code::{verify_layout, CodeLayout};
use msinject::noise::{Fault, LocationKind};
use msinject::pauli::Pauli;
use msinject::sim::{LogicalClass, Simulator};

use crate::config::{ConfigError, ExperimentConfig};

/// Shots in the noiseless determinism check.
pub const NOISELESS_SHOTS: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    fn push(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), ok, detail: detail.into() });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.ok { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

fn layout_check(report: &mut VerifyReport, name: &str, layout: &CodeLayout) {
    let v = verify_layout(layout);
    let detail = if v.is_empty() {
        format!("{}x{} layout is consistent", layout.dx, layout.dz)
    } else {
        v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
    };
    report.push(name, v.is_empty(), detail);
}

fn z_legs(f: Fault) -> usize {
    match f {
        Fault::Pauli(t) => t.iter().filter(|&&p| p == Pauli::Z).count(),
        Fault::MeasFlip => 0,
    }
}

fn is_rotation(k: LocationKind) -> bool {
    matches!(k, LocationKind::RotZ | LocationKind::RotZz | LocationKind::RotZzz)
}

/// Layout consistency, noiseless determinism and the exhaustive stage-I single-fault
/// suite. Config problems are errors; failed checks are reported.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<VerifyReport, ConfigError> {
    let mut report = VerifyReport::default();
    let program = cfg.program()?;
    let s1 = program.stage1.as_ref().expect("configs always build stage I");
    layout_check(&mut report, "stage-I layout", &s1.layout);
    layout_check(&mut report, "stage-II layout", &program.layout);
    if let Some(path) = &cfg.layout_dump {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
        match CodeLayout::from_dump(&text) {
            Ok(l) => layout_check(&mut report, "layout dump", &l),
            Err(e) => report.push("layout dump", false, e.to_string()),
        }
    }
    match program.check_timesteps() {
        Ok(()) => report.push("schedule", true, format!("{} timesteps", program.timesteps.len())),
        Err(e) => report.push("schedule", false, e),
    }

    let noiseless = Simulator::new(program.clone(), cfg.noise_model(0.0)?).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    match noiseless.run_experiment(NOISELESS_SHOTS, cfg.seed, 0) {
        Ok(t) => {
            let clean = t.accepted == t.shots && t.count(LogicalClass::I) == t.shots;
            report.push(
                "noiseless",
                clean,
                format!("{} of {} accepted, {} with identity residual", t.accepted, t.shots, t.count(LogicalClass::I)),
            );
        }
        Err(e) => report.push("noiseless", false, e.to_string()),
    }

    // Decoding needs edge weights, so the fault suite uses the first sweep point's noise.
    let p = cfg.points()?.first().map_or(0.0, |q| q.p);
    let weighted = Simulator::new(program, cfg.noise_model(if p > 0.0 { p } else { 1e-3 })?)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    match weighted.stage1_single_fault_suite() {
        Ok(cases) => {
            let failures: Vec<_> = cases.iter().filter(|c| c.undetected_failure()).collect();
            let describe = |c: &&msinject::sim::SingleFaultCase| format!("{:?} {:?} at t{}", c.kind, c.fault.fault, c.fault.timestep);
            let listed = failures.iter().map(describe).collect::<Vec<_>>().join(", ");
            let (ok, detail) = match (cfg.scheme.variant().grey_size(), cfg.stage1_rounds()) {
                // One grey qubit: a single dephasing fault on it is a logical error by construction.
                (1, _) => (true, format!("{} cases, {} undetected (expected for a single grey qubit): {listed}", cases.len(), failures.len())),
                (_, 0) => (true, format!("{} cases, {} undetected (expected without stage-I detection): {listed}", cases.len(), failures.len())),
                (k, _) => {
                    let allowed = |c: &&&msinject::sim::SingleFaultCase| is_rotation(c.kind) && z_legs(c.fault.fault) == k;
                    let stray: Vec<String> = failures.iter().filter(|c| !allowed(c)).map(describe).collect();
                    let rotation_escapes = failures.iter().any(|c| allowed(&c));
                    let ok = stray.is_empty() && (k != 2 || rotation_escapes);
                    let detail = if ok {
                        format!("{} cases, only the correlated rotation fault escapes: {listed}", cases.len())
                    } else {
                        format!("{} cases, unexpected undetected failures: {}", cases.len(), stray.join(", "))
                    };
                    (ok, detail)
                }
            };
            report.push("single faults", ok, detail);
        }
        Err(e) => report.push("single faults", false, e.to_string()),
    }
    Ok(report)
}
