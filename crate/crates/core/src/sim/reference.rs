//! Slow whole-program frame simulation, kept as an oracle for the precomputed tables.

use crate::noise::Fault;
use crate::protocol::{CircuitProgram, Location};

use super::frame::{apply_location, logical_bits, PauliFrame};

/// A fault placed at location `index` of `timestep`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InjectedFault {
    pub timestep: usize,
    pub index: usize,
    pub fault: Fault,
}

/// Outcome of a dense run: flipped measurements, fired detectors and the final data frame.
#[derive(Clone, Debug)]
pub struct ReferenceRun {
    pub meas_flips: Vec<bool>,
    pub detectors: Vec<bool>,
    pub frame: PauliFrame,
    pub logical: u8,
}

/// Run every timestep on a dense frame with the given faults and a fixed twirl outcome.
pub fn reference_run(program: &CircuitProgram, faults: &[InjectedFault], twirl: bool) -> ReferenceRun {
    let mut frame = PauliFrame::new(program.num_qubits);
    let mut meas = vec![false; program.measurements.len()];
    for (t, ts) in program.timesteps.iter().enumerate() {
        for (i, l) in ts.locations.iter().enumerate() {
            let qs = l.qubits();
            let here: Vec<Fault> = faults.iter().filter(|f| f.timestep == t && f.index == i).map(|f| f.fault).collect();
            let before = l.kind().error_before();
            if before {
                for &f in &here {
                    frame.apply_fault(&qs, f);
                }
            }
            apply_location(&mut frame, l, || twirl);
            if let Location::MeasX { ancilla, meas: m } = l {
                let flip = here.iter().filter(|f| **f == Fault::MeasFlip).count() % 2 == 1;
                meas[*m] = frame.get(*ancilla).has_z() ^ flip;
            }
            if !before {
                for &f in &here {
                    frame.apply_fault(&qs, f);
                }
            }
        }
    }
    let detectors = program.detectors.iter().map(|d| d.measurements.iter().fold(false, |a, &m| a ^ meas[m])).collect();
    let mut data = PauliFrame::new(program.layout.num_data());
    for q in 0..program.layout.num_data() {
        data.apply(q, frame.get(q));
    }
    let logical = logical_bits(&data, &program.layout);
    ReferenceRun { meas_flips: meas, detectors, frame: data, logical }
}
