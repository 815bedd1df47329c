//! Biased Pauli channels attached to each kind of circuit location.
//!
//! Every channel is parameterised by the physical rate `p` and the bias `eta`
//! (possibly infinite). Dephasing-type entries scale with `p`; entries with any
//! `X` or `Y` component scale with `p / eta`.

use std::fmt::{self, Write as _};

use rand::Rng;
use thiserror::Error;

use crate::pauli::Pauli;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// CNOTs and idles alongside them are ten times noisier than everything else.
    A,
    /// All locations share the base rate.
    B,
}

impl ModelKind {
    /// Coefficient relating `p` to the dephasing part of the CNOT error rate.
    pub fn cx_axis_factor(self) -> f64 {
        match self {
            ModelKind::A => 20.0,
            ModelKind::B => 2.0,
        }
    }

    fn cx_scale(self) -> f64 {
        match self {
            ModelKind::A => 10.0,
            ModelKind::B => 1.0,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::A => "A",
            ModelKind::B => "B",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocationKind {
    PrepZ,
    PrepX,
    IdleMeas,
    IdleDuringCz,
    IdleDuringCx,
    Cx,
    Cz,
    RotZz,
    RotZ,
    RotZzz,
    MeasX,
}

impl LocationKind {
    pub const ALL: [LocationKind; 11] = [
        LocationKind::PrepZ,
        LocationKind::PrepX,
        LocationKind::IdleMeas,
        LocationKind::IdleDuringCz,
        LocationKind::IdleDuringCx,
        LocationKind::Cx,
        LocationKind::Cz,
        LocationKind::RotZz,
        LocationKind::RotZ,
        LocationKind::RotZzz,
        LocationKind::MeasX,
    ];

    pub fn arity(self) -> usize {
        match self {
            LocationKind::Cx | LocationKind::Cz | LocationKind::RotZz => 2,
            LocationKind::RotZzz => 3,
            LocationKind::MeasX => 0,
            _ => 1,
        }
    }

    /// Multi-qubit gates fail before acting; everything else fails after.
    pub fn error_before(self) -> bool {
        matches!(self, LocationKind::Cx | LocationKind::Cz | LocationKind::RotZz | LocationKind::RotZzz)
    }

    pub fn name(self) -> &'static str {
        match self {
            LocationKind::PrepZ => "PrepZ",
            LocationKind::PrepX => "PrepX",
            LocationKind::IdleMeas => "IdleMeas",
            LocationKind::IdleDuringCz => "IdleDuringCZ",
            LocationKind::IdleDuringCx => "IdleDuringCX",
            LocationKind::Cx => "CX",
            LocationKind::Cz => "CZ",
            LocationKind::RotZz => "RotZZ",
            LocationKind::RotZ => "RotZ",
            LocationKind::RotZzz => "RotZZZ",
            LocationKind::MeasX => "MeasX",
        }
    }
}

/// Up to three Pauli letters, one per qubit of the location.
pub type PauliTuple = [Pauli; 3];

/// A channel outcome: a Pauli fault on the location's qubits, or a flipped outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fault {
    Pauli(PauliTuple),
    MeasFlip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub kind: LocationKind,
    /// Non-zero entries in a fixed lexicographic order.
    pub entries: Vec<(Fault, f64)>,
    total: f64,
}

impl Channel {
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Draw one outcome using exactly one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Fault> {
        let u: f64 = rng.random();
        self.pick(u)
    }

    /// Map `u` in `[0, 1)` to an outcome: `None` once `u` passes the total weight.
    pub fn pick(&self, u: f64) -> Option<Fault> {
        let mut acc = 0.0;
        for &(f, w) in &self.entries {
            acc += w;
            if u < acc {
                return Some(f);
            }
        }
        None
    }

    /// Outcome drawn conditionally on a fault having occurred.
    pub fn pick_conditional(&self, u: f64) -> Fault {
        self.pick(u * self.total).unwrap_or_else(|| self.entries.last().expect("non-empty channel").0)
    }

    pub fn prob(&self, fault: Fault) -> f64 {
        self.entries.iter().find(|e| e.0 == fault).map_or(0.0, |e| e.1)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("physical error rate {0} outside [0, 1]")]
    InvalidRate(f64),
    #[error("bias {0} must be positive")]
    InvalidBias(f64),
    #[error("{kind} channel has total probability {total} > 1")]
    TotalExceedsOne { kind: &'static str, total: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub kind: ModelKind,
    pub p: f64,
    pub eta: f64,
}

impl NoiseModel {
    pub fn new(kind: ModelKind, p: f64, eta: f64) -> Result<Self, NoiseError> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(NoiseError::InvalidRate(p));
        }
        if eta.is_nan() || eta <= 0.0 {
            return Err(NoiseError::InvalidBias(eta));
        }
        let m = Self { kind, p, eta };
        for k in LocationKind::ALL {
            let total = m.channel_for(k).total;
            if total > 1.0 {
                return Err(NoiseError::TotalExceedsOne { kind: k.name(), total });
            }
        }
        Ok(m)
    }

    /// `p` such that the CNOT channel's total error equals `p_cx`.
    pub fn p_for_cx_total(kind: ModelKind, p_cx: f64, eta: f64) -> f64 {
        let c = kind.cx_scale();
        p_cx / (2.0 * c + 12.0 * c * inv(eta))
    }

    fn off_axis(&self, scale: f64) -> f64 {
        scale * self.p * inv(self.eta)
    }

    pub fn channel_for(&self, kind: LocationKind) -> Channel {
        let p = self.p;
        let mut entries: Vec<(Fault, f64)> = Vec::new();
        match kind {
            LocationKind::MeasX => entries.push((Fault::MeasFlip, p + self.off_axis(1.0))),
            LocationKind::Cx => {
                let q = p * self.kind.cx_scale();
                let o = self.off_axis(self.kind.cx_scale());
                for_each_tuple(2, |t| {
                    let w = match (t[0], t[1]) {
                        (Pauli::Z, Pauli::I) => q,
                        (Pauli::I, Pauli::Z) | (Pauli::Z, Pauli::Z) => q / 2.0,
                        _ => o,
                    };
                    entries.push((Fault::Pauli(t), w));
                });
            }
            LocationKind::Cz | LocationKind::RotZz | LocationKind::RotZzz => {
                let o = self.off_axis(1.0);
                for_each_tuple(kind.arity(), |t| {
                    let zs = t.iter().filter(|&&l| l == Pauli::Z).count();
                    let dephasing = t.iter().all(|&l| l == Pauli::Z || l == Pauli::I);
                    let w = if dephasing { p.powi(zs as i32) } else { o };
                    entries.push((Fault::Pauli(t), w));
                });
            }
            _ => {
                let (base, o) = if kind == LocationKind::IdleDuringCx {
                    (p * self.kind.cx_scale(), self.off_axis(self.kind.cx_scale()))
                } else {
                    (p, self.off_axis(1.0))
                };
                for l in [Pauli::X, Pauli::Y, Pauli::Z] {
                    let w = if l == Pauli::Z { base } else { o };
                    entries.push((Fault::Pauli([l, Pauli::I, Pauli::I]), w));
                }
            }
        }
        entries.retain(|e| e.1 > 0.0);
        let total = entries.iter().map(|e| e.1).sum();
        Channel { kind, entries, total }
    }

    pub fn total_error(&self, kind: LocationKind) -> f64 {
        self.channel_for(kind).total
    }

    /// Ratio of dephasing to non-dephasing error on the channel.
    pub fn average_gate_bias(&self, kind: LocationKind) -> f64 {
        let ch = self.channel_for(kind);
        let (mut z, mut other) = (0.0, 0.0);
        for &(f, w) in &ch.entries {
            match f {
                Fault::Pauli(t) if t.iter().all(|&l| l == Pauli::Z || l == Pauli::I) => z += w,
                _ => other += w,
            }
        }
        z / other
    }

    /// Deterministic table of every channel entry.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model {} p {:.12e} eta {}", self.kind, self.p, fmt_eta(self.eta));
        for k in LocationKind::ALL {
            let ch = self.channel_for(k);
            let _ = writeln!(s, "{} total {:.12e}", k.name(), ch.total);
            for (f, w) in &ch.entries {
                let label = match f {
                    Fault::MeasFlip => "flip".to_string(),
                    Fault::Pauli(t) => t[..k.arity()].iter().map(|l| l.letter()).collect(),
                };
                let _ = writeln!(s, "  {label} {w:.12e}");
            }
        }
        s
    }
}

fn inv(eta: f64) -> f64 {
    if eta.is_infinite() {
        0.0
    } else {
        1.0 / eta
    }
}

pub fn fmt_eta(eta: f64) -> String {
    if eta.is_infinite() {
        "inf".into()
    } else {
        format!("{eta}")
    }
}

/// Visit every non-identity tuple of `arity` letters in lexicographic order.
fn for_each_tuple(arity: usize, mut f: impl FnMut(PauliTuple)) {
    let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    for code in 1..4usize.pow(arity as u32) {
        let mut t = [Pauli::I; 3];
        let mut c = code;
        for slot in (0..arity).rev() {
            t[slot] = letters[c % 4];
            c /= 4;
        }
        f(t);
    }
}
