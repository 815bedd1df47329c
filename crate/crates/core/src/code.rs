//! XZZX surface-code patches on a doubled-coordinate lattice.
//!
//! Data qubits sit on lattice points `(x, y)` with `x ≡ y (mod 2)` inside the box
//! `[0, 2dx-2] × [0, 2dz-2]`. Every point with `x + y` odd is a face. A face reads
//! `X` on its west and east neighbours and `Z` on its north and south neighbours,
//! so truncated faces on the boundary have weight two or three.
//!
//! `X_L` runs down the left column, `Z_L` along the top row.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::gf2::{symplectic, EchelonBasis};
use crate::pauli::{Pauli, PauliString};

/// Largest patch handled by the exhaustive logical-weight search.
pub const MAX_EXHAUSTIVE_QUBITS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coord {
    pub x: i32,
    pub y: i32,
}

impl Coord {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Compass slot of a face corner, in measurement order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Corner {
    West,
    North,
    South,
    East,
}

impl Corner {
    pub const ORDER: [Corner; 4] = [Corner::West, Corner::North, Corner::South, Corner::East];

    pub fn offset(self) -> (i32, i32) {
        match self {
            Corner::West => (0, -1),
            Corner::North => (-1, 0),
            Corner::South => (1, 0),
            Corner::East => (0, 1),
        }
    }

    pub fn letter(self) -> Pauli {
        match self {
            Corner::West | Corner::East => Pauli::X,
            Corner::North | Corner::South => Pauli::Z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LogicalKind {
    X,
    Z,
}

/// Two-qubit gate used to couple an ancilla (always first) to a data qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CouplingGate {
    Cx,
    Cz,
}

impl CouplingGate {
    pub fn for_letter(p: Pauli) -> Option<Self> {
        match p {
            Pauli::X => Some(CouplingGate::Cx),
            Pauli::Z => Some(CouplingGate::Cz),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduledGate {
    pub step: usize,
    pub data: usize,
    pub gate: CouplingGate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabilizer {
    pub centre: Coord,
    pub support: PauliString,
    pub ancilla: usize,
    pub schedule: Vec<ScheduledGate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodeLayout {
    pub dx: usize,
    pub dz: usize,
    pub data: Vec<Coord>,
    pub stabilizers: Vec<Stabilizer>,
    pub logical_x: PauliString,
    pub logical_z: PauliString,
    index: HashMap<Coord, usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("patch dimensions must be positive, got {dx}x{dz}")]
    InvalidDimensions { dx: usize, dz: usize },
    #[error("patch has {n} data qubits, exhaustive search is limited to {max}")]
    TooLarge { n: usize, max: usize },
    #[error("no logical operator of the requested type exists")]
    NoLogical,
    #[error("layout dump line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A broken invariant found by [`verify_layout`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayoutViolation {
    StabilizersAnticommute { a: usize, b: usize },
    StabilizerCount { found: usize, expected: usize },
    DependentStabilizers { rank: usize, count: usize },
    LogicalAnticommutesWithStabilizer { logical: LogicalKind, stabilizer: usize },
    LogicalsCommute,
    LogicalWeight { logical: LogicalKind, found: usize, expected: usize },
    ScheduleMismatch { stabilizer: usize, msg: String },
    QubitReusedInStep { step: usize, qubit: usize },
}

impl fmt::Display for LayoutViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use LayoutViolation::*;
        match self {
            StabilizersAnticommute { a, b } => write!(f, "commutation: stabilizers {a} and {b} anticommute"),
            StabilizerCount { found, expected } => write!(f, "count: {found} stabilizers, expected {expected}"),
            DependentStabilizers { rank, count } => write!(f, "independence: rank {rank} of {count} stabilizers"),
            LogicalAnticommutesWithStabilizer { logical, stabilizer } => {
                write!(f, "commutation: logical {logical:?} anticommutes with stabilizer {stabilizer}")
            }
            LogicalsCommute => write!(f, "commutation: logical X and Z commute"),
            LogicalWeight { logical, found, expected } => {
                write!(f, "weight: logical {logical:?} has weight {found}, expected {expected}")
            }
            ScheduleMismatch { stabilizer, msg } => write!(f, "schedule: stabilizer {stabilizer}: {msg}"),
            QubitReusedInStep { step, qubit } => write!(f, "schedule: qubit {qubit} used twice in step {step}"),
        }
    }
}

pub const SCHEDULE_STEPS: usize = 4;

impl CodeLayout {
    pub fn build(dx: usize, dz: usize) -> Result<Self, LayoutError> {
        if dx == 0 || dz == 0 {
            return Err(LayoutError::InvalidDimensions { dx, dz });
        }
        let (xmax, ymax) = (2 * dx as i32 - 2, 2 * dz as i32 - 2);
        let mut data = Vec::new();
        for x in 0..=xmax {
            for y in 0..=ymax {
                if (x + y) % 2 == 0 {
                    data.push(Coord::new(x, y));
                }
            }
        }
        let index: HashMap<Coord, usize> = data.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let n = data.len();
        let mut stabilizers = Vec::new();
        for x in 0..=xmax {
            for y in 0..=ymax {
                if (x + y) % 2 == 0 {
                    continue;
                }
                let mut terms = Vec::new();
                let mut schedule = Vec::new();
                for (step, corner) in Corner::ORDER.into_iter().enumerate() {
                    let (ox, oy) = corner.offset();
                    if let Some(&q) = index.get(&Coord::new(x + ox, y + oy)) {
                        terms.push((q, corner.letter()));
                        let gate = CouplingGate::for_letter(corner.letter()).expect("X or Z");
                        schedule.push(ScheduledGate { step, data: q, gate });
                    }
                }
                let ancilla = n + stabilizers.len();
                stabilizers.push(Stabilizer {
                    centre: Coord::new(x, y),
                    support: PauliString::from_terms(terms),
                    ancilla,
                    schedule,
                });
            }
        }
        let logical_x = PauliString::uniform((0..dx).map(|r| index[&Coord::new(2 * r as i32, 0)]), Pauli::X);
        let logical_z = PauliString::uniform((0..dz).map(|c| index[&Coord::new(0, 2 * c as i32)]), Pauli::Z);
        Ok(Self { dx, dz, data, stabilizers, logical_x, logical_z, index })
    }

    pub fn num_data(&self) -> usize {
        self.data.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.data.len() + self.stabilizers.len()
    }

    pub fn qubit_at(&self, c: Coord) -> Option<usize> {
        self.index.get(&c).copied()
    }

    /// Data qubit `V(r, c)` on the even sublattice.
    pub fn vertex(&self, r: usize, c: usize) -> Option<usize> {
        self.qubit_at(Coord::new(2 * r as i32, 2 * c as i32))
    }

    pub fn stabilizer_at(&self, c: Coord) -> Option<usize> {
        self.stabilizers.iter().position(|s| s.centre == c)
    }

    /// Stabilizers touching data qubit `q`, with the letter each applies there.
    pub fn stabilizers_on(&self, q: usize) -> Vec<(usize, Pauli)> {
        let c = self.data[q];
        let mut out = Vec::new();
        for corner in Corner::ORDER {
            let (ox, oy) = corner.offset();
            // The face sits opposite the corner offset.
            let centre = Coord::new(c.x - ox, c.y - oy);
            if let Some(s) = self.stabilizer_at(centre) {
                out.push((s, corner.letter()));
            }
        }
        out.sort_unstable_by_key(|t| t.0);
        out
    }

    pub fn logical(&self, kind: LogicalKind) -> &PauliString {
        match kind {
            LogicalKind::X => &self.logical_x,
            LogicalKind::Z => &self.logical_z,
        }
    }

    /// Deterministic text form; see [`CodeLayout::from_dump`].
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "layout {} {}", self.dx, self.dz);
        for (i, c) in self.data.iter().enumerate() {
            let _ = writeln!(s, "data {i} {} {}", c.x, c.y);
        }
        for (i, st) in self.stabilizers.iter().enumerate() {
            let _ = write!(s, "stab {i} {} {} anc {} :", st.centre.x, st.centre.y, st.ancilla);
            for &(q, p) in st.support.terms() {
                let _ = write!(s, " {p}{q}");
            }
            let _ = write!(s, " |");
            for g in &st.schedule {
                let kind = match g.gate {
                    CouplingGate::Cx => "CX",
                    CouplingGate::Cz => "CZ",
                };
                let _ = write!(s, " {}:{}:{}", g.step, kind, g.data);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "logical_x {}", self.logical_x);
        let _ = writeln!(s, "logical_z {}", self.logical_z);
        s
    }

    pub fn from_dump(text: &str) -> Result<Self, LayoutError> {
        let err = |line: usize, msg: &str| LayoutError::Parse { line: line + 1, msg: msg.to_string() };
        let num = |line: usize, t: Option<&str>| -> Result<i64, LayoutError> {
            t.and_then(|v| v.parse().ok()).ok_or_else(|| err(line, "expected integer"))
        };
        let parse_string = |line: usize, toks: &[&str]| -> Result<PauliString, LayoutError> {
            let mut terms = Vec::new();
            for t in toks {
                if *t == "I" {
                    continue;
                }
                let mut ch = t.chars();
                let p = ch.next().and_then(Pauli::from_letter).ok_or_else(|| err(line, "bad Pauli letter"))?;
                let q = ch.as_str().parse().map_err(|_| err(line, "bad qubit index"))?;
                terms.push((q, p));
            }
            Ok(PauliString::from_terms(terms))
        };
        let (mut dx, mut dz) = (0, 0);
        let mut data = Vec::new();
        let mut stabilizers = Vec::new();
        let (mut lx, mut lz) = (None, None);
        for (ln, line) in text.lines().enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.first().copied() {
                None => continue,
                Some("layout") => {
                    dx = num(ln, toks.get(1).copied())? as usize;
                    dz = num(ln, toks.get(2).copied())? as usize;
                }
                Some("data") => {
                    let x = num(ln, toks.get(2).copied())? as i32;
                    let y = num(ln, toks.get(3).copied())? as i32;
                    data.push(Coord::new(x, y));
                }
                Some("stab") => {
                    let x = num(ln, toks.get(2).copied())? as i32;
                    let y = num(ln, toks.get(3).copied())? as i32;
                    let ancilla = num(ln, toks.get(5).copied())? as usize;
                    let colon = toks.iter().position(|t| *t == ":").ok_or_else(|| err(ln, "missing ':'"))?;
                    let bar = toks.iter().position(|t| *t == "|").ok_or_else(|| err(ln, "missing '|'"))?;
                    let support = parse_string(ln, &toks[colon + 1..bar])?;
                    let mut schedule = Vec::new();
                    for t in &toks[bar + 1..] {
                        let parts: Vec<&str> = t.split(':').collect();
                        if parts.len() != 3 {
                            return Err(err(ln, "bad schedule entry"));
                        }
                        let gate = match parts[1] {
                            "CX" => CouplingGate::Cx,
                            "CZ" => CouplingGate::Cz,
                            _ => return Err(err(ln, "bad gate name")),
                        };
                        schedule.push(ScheduledGate {
                            step: num(ln, Some(parts[0]))? as usize,
                            data: num(ln, Some(parts[2]))? as usize,
                            gate,
                        });
                    }
                    stabilizers.push(Stabilizer { centre: Coord::new(x, y), support, ancilla, schedule });
                }
                Some("logical_x") => lx = Some(parse_string(ln, &toks[1..])?),
                Some("logical_z") => lz = Some(parse_string(ln, &toks[1..])?),
                Some(_) => return Err(err(ln, "unknown record")),
            }
        }
        if dx == 0 || dz == 0 {
            return Err(LayoutError::InvalidDimensions { dx, dz });
        }
        let index = data.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Ok(Self {
            dx,
            dz,
            data,
            stabilizers,
            logical_x: lx.ok_or_else(|| err(0, "missing logical_x"))?,
            logical_z: lz.ok_or_else(|| err(0, "missing logical_z"))?,
            index,
        })
    }
}

/// Check commutation, counting, independence, logical and schedule invariants.
pub fn verify_layout(layout: &CodeLayout) -> Vec<LayoutViolation> {
    let mut out = Vec::new();
    let stabs = &layout.stabilizers;
    for a in 0..stabs.len() {
        for b in a + 1..stabs.len() {
            if !stabs[a].support.commutes_with(&stabs[b].support) {
                out.push(LayoutViolation::StabilizersAnticommute { a, b });
            }
        }
    }
    let n = layout.num_data();
    if stabs.len() + 1 != n {
        out.push(LayoutViolation::StabilizerCount { found: stabs.len(), expected: n.saturating_sub(1) });
    }
    let mut basis = EchelonBasis::new(2 * n, stabs.len().max(1));
    for s in stabs {
        basis.insert(&symplectic(&s.support, n));
    }
    if basis.rank() != stabs.len() {
        out.push(LayoutViolation::DependentStabilizers { rank: basis.rank(), count: stabs.len() });
    }
    for kind in [LogicalKind::X, LogicalKind::Z] {
        let l = layout.logical(kind);
        for (i, s) in stabs.iter().enumerate() {
            if !l.commutes_with(&s.support) {
                out.push(LayoutViolation::LogicalAnticommutesWithStabilizer { logical: kind, stabilizer: i });
            }
        }
        let expected = match kind {
            LogicalKind::X => layout.dx,
            LogicalKind::Z => layout.dz,
        };
        if l.weight() != expected {
            out.push(LayoutViolation::LogicalWeight { logical: kind, found: l.weight(), expected });
        }
    }
    if layout.logical_x.commutes_with(&layout.logical_z) {
        out.push(LayoutViolation::LogicalsCommute);
    }
    let mut busy: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, s) in stabs.iter().enumerate() {
        let mut covered = Vec::new();
        for g in &s.schedule {
            if g.step >= SCHEDULE_STEPS {
                out.push(LayoutViolation::ScheduleMismatch { stabilizer: i, msg: format!("step {} out of range", g.step) });
            }
            let letter = s.support.get(g.data);
            if CouplingGate::for_letter(letter) != Some(g.gate) {
                out.push(LayoutViolation::ScheduleMismatch {
                    stabilizer: i,
                    msg: format!("gate {:?} on qubit {} does not measure letter {letter}", g.gate, g.data),
                });
            }
            covered.push(g.data);
            for q in [g.data, s.ancilla] {
                *busy.entry((g.step, q)).or_default() += 1;
            }
        }
        let mut steps: Vec<usize> = s.schedule.iter().map(|g| g.step).collect();
        steps.sort_unstable();
        steps.dedup();
        if steps.len() != s.schedule.len() {
            out.push(LayoutViolation::ScheduleMismatch { stabilizer: i, msg: "two gates share a step".into() });
        }
        covered.sort_unstable();
        let support: Vec<usize> = s.support.support().collect();
        if covered != support {
            out.push(LayoutViolation::ScheduleMismatch { stabilizer: i, msg: "schedule does not cover the support".into() });
        }
    }
    let mut reused: Vec<(usize, usize)> = busy.into_iter().filter(|&(_, c)| c > 1).map(|(k, _)| k).collect();
    reused.sort_unstable();
    out.extend(reused.into_iter().map(|(step, qubit)| LayoutViolation::QubitReusedInStep { step, qubit }));
    out
}

/// Minimum weight of a single-letter logical of the given type, by exhaustive search.
pub fn min_logical_weight(layout: &CodeLayout, kind: LogicalKind) -> Result<usize, LayoutError> {
    let n = layout.num_data();
    if n > MAX_EXHAUSTIVE_QUBITS {
        return Err(LayoutError::TooLarge { n, max: MAX_EXHAUSTIVE_QUBITS });
    }
    // A Z-type logical is a Z string that commutes with every stabilizer and flips X_L.
    let (letter, partner) = match kind {
        LogicalKind::X => (Pauli::X, &layout.logical_z),
        LogicalKind::Z => (Pauli::Z, &layout.logical_x),
    };
    let mask_of = |s: &PauliString| -> u32 {
        s.terms().iter().filter(|t| t.1.anticommutes(letter)).fold(0u32, |m, t| m | 1 << t.0)
    };
    let checks: Vec<u32> = layout.stabilizers.iter().map(|s| mask_of(&s.support)).collect();
    let target = mask_of(partner);
    for w in 1..=n {
        let mut found = false;
        for_each_combination(n, w, |m| {
            if checks.iter().all(|c| (c & m).count_ones() % 2 == 0) && (target & m).count_ones() % 2 == 1 {
                found = true;
            }
            found
        });
        if found {
            return Ok(w);
        }
    }
    Err(LayoutError::NoLogical)
}

/// Visit all `k`-subsets of `0..n` as bitmasks until `f` returns true.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(u32) -> bool) {
    if k > n {
        return;
    }
    let mut m: u32 = (1u32 << k) - 1;
    let limit = 1u64 << n;
    while u64::from(m) < limit {
        if f(m) {
            return;
        }
        // Gosper's hack.
        let c = m & m.wrapping_neg();
        let r = m + c;
        if r == 0 {
            return;
        }
        m = (((r ^ m) >> 2) / c) | r;
    }
}
