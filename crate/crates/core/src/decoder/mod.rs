//! Detector graph, exact matching and a maximum-likelihood oracle.

pub mod blossom;
pub mod graph;
pub mod matching;
pub mod ml;

pub use graph::{build_detector_graph, DetectorGraph, Edge, FaultRef, GraphError};
pub use matching::{DecodeError, DecoderScratch, MatchResult, MatchingProblem, Solver};
pub use ml::{MlError, MlOracle};
