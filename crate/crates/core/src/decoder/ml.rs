//! Exact maximum-likelihood oracle for small programs.
//!
//! Every location fails independently and faults act linearly, so the joint law of
//! (detector pattern, logical flip) is a convolution over locations. With few
//! detectors it fits in a dense table.

use thiserror::Error;

use crate::sim::CircuitModel;

/// Largest number of detectors the table is built for.
pub const MAX_DETECTORS: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MlError {
    #[error("{found} detectors exceed the oracle bound of {max}")]
    TooLarge { found: usize, max: usize },
    #[error("the oracle covers programs without Stage I")]
    HasStage1,
}

#[derive(Clone, Debug)]
pub struct MlOracle {
    num_dets: usize,
    /// Index `syndrome | obs << num_dets`.
    table: Vec<f64>,
}

impl MlOracle {
    pub fn new(model: &CircuitModel) -> Result<Self, MlError> {
        let d = model.num_detectors();
        if d > MAX_DETECTORS {
            return Err(MlError::TooLarge { found: d, max: MAX_DETECTORS });
        }
        if model.has_stage1() {
            return Err(MlError::HasStage1);
        }
        let size = 1usize << (d + 2);
        let mut table = vec![0.0; size];
        table[0] = 1.0;
        let mut next = vec![0.0; size];
        for (id, loc) in model.locations.iter().enumerate() {
            if loc.noiseless {
                continue;
            }
            let ch = model.channel(loc.kind);
            if ch.total() <= 0.0 {
                continue;
            }
            let masks: Vec<(usize, f64)> = ch
                .entries
                .iter()
                .map(|&(f, p)| {
                    let (dets, obs) = model.fault_effect(id, f);
                    let m = dets.iter().fold(0usize, |m, &x| m ^ (1 << x)) | (obs as usize) << d;
                    (m, p)
                })
                .collect();
            let keep = 1.0 - ch.total();
            for (x, v) in next.iter_mut().enumerate() {
                *v = keep * table[x] + masks.iter().map(|&(m, p)| p * table[x ^ m]).sum::<f64>();
            }
            std::mem::swap(&mut table, &mut next);
        }
        Ok(Self { num_dets: d, table })
    }

    fn mask(&self, flagged: &[u32]) -> usize {
        flagged.iter().fold(0usize, |m, &x| m ^ (1 << x))
    }

    /// Joint probability of a detector pattern and a logical flip.
    pub fn probability(&self, flagged: &[u32], obs: u8) -> f64 {
        self.table[self.mask(flagged) | (obs as usize & 3) << self.num_dets]
    }

    /// Most likely logical flip given the pattern.
    pub fn decode(&self, flagged: &[u32]) -> u8 {
        let s = self.mask(flagged);
        (0..4u8)
            .max_by(|&a, &b| {
                let pa = self.table[s | (a as usize) << self.num_dets];
                let pb = self.table[s | (b as usize) << self.num_dets];
                pa.partial_cmp(&pb).expect("finite").then(b.cmp(&a))
            })
            .expect("four classes")
    }

    /// Failure probability of a decoder that maps each pattern to a predicted flip.
    pub fn failure_rate(&self, mut predict: impl FnMut(&[u32]) -> u8) -> f64 {
        let d = self.num_dets;
        let mut fail = 0.0;
        for s in 0..1usize << d {
            let flagged: Vec<u32> = (0..d as u32).filter(|&i| s >> i & 1 == 1).collect();
            let guess = predict(&flagged) as usize & 3;
            for o in 0..4usize {
                if o != guess {
                    fail += self.table[s | o << d];
                }
            }
        }
        fail
    }

    /// Failure probability of the maximum-likelihood decoder itself.
    pub fn ml_failure_rate(&self) -> f64 {
        self.failure_rate(|f| self.decode(f))
    }

    pub fn num_detectors(&self) -> usize {
        self.num_dets
    }
}
