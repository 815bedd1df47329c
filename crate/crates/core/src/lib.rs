//! Monte-Carlo simulation of magic-state injection into XZZX surface-code patches
//! under biased Pauli noise.

pub mod analysis;
pub mod code;
pub mod decoder;
pub mod gf2;
pub mod noise;
pub mod pauli;
pub mod protocol;
pub mod sim;

pub use analysis::{AnalysisError, FitPoint, FitResult, RateEstimate, Rates, SlopeFit};
pub use code::{CodeLayout, Coord, LayoutError, LayoutViolation, LogicalKind};
pub use decoder::{DetectorGraph, MlOracle};
pub use noise::{Fault, LocationKind, ModelKind, NoiseModel};
pub use protocol::{CircuitProgram, PatternChoice, SchemeVariant};
pub use pauli::{Pauli, PauliString};
pub use sim::{Boost, LogicalClass, SimError, Simulator, Tally, TrialOutcome, WeightedTally};
