//! Fixtures shared by the benchmarks.

use std::f64::consts::FRAC_PI_8;

use msinject::noise::{ModelKind, NoiseModel};
use msinject::protocol::{build_stage1, build_stage2, CircuitProgram, PatternChoice, SchemeVariant};
use msinject::sim::{trial_rng, Simulator, Syndrome};

/// The main operating point: p_CX = 0.67% under model A at bias 10⁴.
pub const OPERATING_P_CX: f64 = 0.0067;
pub const ETA: f64 = 1e4;

/// `1×3` stage I grown to `dx2 × dz2` with `dz2` noisy rounds.
pub fn injection(v: SchemeVariant, dx2: usize, dz2: usize) -> CircuitProgram {
    let s1 = build_stage1(v, 1, 3, FRAC_PI_8).expect("valid stage I");
    build_stage2(&s1, dx2, dz2, dz2, PatternChoice::Default).expect("valid stage II")
}

pub fn operating_noise() -> NoiseModel {
    NoiseModel::new(ModelKind::A, NoiseModel::p_for_cx_total(ModelKind::A, OPERATING_P_CX, ETA), ETA).expect("valid noise")
}

pub fn operating_simulator(dx2: usize, dz2: usize) -> Simulator {
    Simulator::new(injection(SchemeVariant::TwoQubitZz, dx2, dz2), operating_noise()).expect("simulator")
}

/// Stage-II detector patterns drawn from the simulator's own noise, skipping empty ones.
pub fn sample_syndromes(sim: &Simulator, count: usize, seed: u64) -> Vec<Vec<u32>> {
    let by_kind: Vec<_> = sim.model.noisy_locations_by_kind().into_iter().map(|(k, ids)| (sim.model.channel(k).clone(), ids)).collect();
    let mut syn = Syndrome::new(sim.model.num_detectors());
    (0..)
        .map(|trial| {
            let mut rng = trial_rng(seed, 0, trial);
            syn.clear();
            for (ch, ids) in &by_kind {
                for &id in ids {
                    if let Some(f) = ch.sample(&mut rng) {
                        sim.model.apply_fault(id as usize, f, &mut syn);
                    }
                }
            }
            syn.fired()
        })
        .filter(|f| !f.is_empty())
        .take(count)
        .collect()
}
