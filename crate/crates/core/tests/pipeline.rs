//! End-to-end use of the public API.

use std::f64::consts::FRAC_PI_8;

use msinject::analysis::rates;
use msinject::noise::{ModelKind, NoiseModel};
use msinject::protocol::{build_stage1, build_stage2, PatternChoice, SchemeVariant};
use msinject::{LogicalClass, Simulator};

fn sim(v: SchemeVariant, p: f64) -> Simulator {
    let s1 = build_stage1(v, 1, 3, FRAC_PI_8).unwrap();
    let prog = build_stage2(&s1, 3, 7, 7, PatternChoice::Default).unwrap();
    Simulator::new(prog, NoiseModel::new(ModelKind::A, p, 1e4).unwrap()).unwrap()
}

#[test]
fn runs_are_reproducible_per_seed_and_stream() {
    let s = sim(SchemeVariant::TwoQubitZz, 1e-3);
    let a = s.run_experiment(3000, 5, 2).unwrap();
    assert_eq!(a, s.run_experiment(3000, 5, 2).unwrap());
    assert_ne!(a, s.run_experiment(3000, 5, 3).unwrap());
    assert_eq!(a.shots, 3000);
    assert_eq!(a.counts.iter().sum::<u64>(), a.accepted);
}

#[test]
fn noise_lowers_acceptance_and_rotation_schemes_beat_standard() {
    let zz = rates(&sim(SchemeVariant::TwoQubitZz, 5e-4).run_experiment(20_000, 1, 0).unwrap()).unwrap();
    let st = rates(&sim(SchemeVariant::StandardZ, 5e-4).run_experiment(20_000, 1, 0).unwrap()).unwrap();
    assert!(zz.success.value < 1.0);
    assert!(st.success.value > zz.success.value, "standard post-selects less");
    assert!(zz.errors().unwrap().zl.value < st.errors().unwrap().zl.value);
}

#[test]
fn noiseless_injection_is_exact() {
    for v in [SchemeVariant::TwoQubitZz, SchemeVariant::StandardZ, SchemeVariant::ThreeQubitZzz] {
        let t = sim(v, 0.0).run_experiment(200, 9, 0).unwrap();
        assert_eq!((t.accepted, t.count(LogicalClass::I)), (200, 200), "{v}");
    }
}
