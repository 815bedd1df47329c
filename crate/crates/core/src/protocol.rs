//! Space-time circuits for the two-stage injection protocol and for plain memory runs.
//!
//! Qubit numbering follows the final [`CodeLayout`]: data first, then one ancilla per
//! face. A stage-I face reuses the ancilla of the final face with the same centre.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::code::{CodeLayout, Coord, CouplingGate, LayoutError, SCHEDULE_STEPS};
use crate::gf2::{symplectic, EchelonBasis};
use crate::noise::LocationKind;
use crate::pauli::{Pauli, PauliString};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeVariant {
    /// Two grey qubits rotated by `ZZ(θ)`.
    TwoQubitZz,
    /// One grey qubit rotated by `Z(θ)`.
    StandardZ,
    /// Three grey qubits rotated by `ZZZ(θ)`.
    ThreeQubitZzz,
}

impl SchemeVariant {
    pub fn grey_size(self) -> usize {
        match self {
            SchemeVariant::StandardZ => 1,
            SchemeVariant::TwoQubitZz => 2,
            SchemeVariant::ThreeQubitZzz => 3,
        }
    }

    pub fn default_stage1_rounds(self) -> usize {
        match self {
            SchemeVariant::ThreeQubitZzz => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeVariant::TwoQubitZz => "zz",
            SchemeVariant::StandardZ => "standard",
            SchemeVariant::ThreeQubitZzz => "zzz",
        }
    }
}

impl fmt::Display for SchemeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ket {
    Zero,
    Plus,
}

impl Ket {
    /// The single-qubit Pauli stabilizing this state.
    pub fn stabilizer(self) -> Pauli {
        match self {
            Ket::Zero => Pauli::Z,
            Ket::Plus => Pauli::X,
        }
    }
}

/// Tie-break used by the initialization solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum PatternChoice {
    /// Prefer `|0⟩` at the lowest-index qubit where candidates differ.
    #[default]
    Default,
    /// Prefer `|+⟩` instead. Fewer top-row qubits start in `|0⟩`, which limits
    /// uncorrectable bit flips at low bias.
    Alternate,
}

/// Per-data-qubit preparation; `None` marks qubits that are not prepared at this point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitPattern {
    pub kets: Vec<Option<Ket>>,
    pub grey: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    One,
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepLabel {
    Init,
    Rotation,
    AncillaPrep,
    Gate(usize),
    Measure,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Location {
    PrepZ(usize),
    PrepX(usize),
    Idle { qubit: usize, kind: LocationKind },
    Cx { control: usize, target: usize },
    Cz { a: usize, b: usize },
    Rot { qubits: Vec<usize> },
    MeasX { ancilla: usize, meas: usize },
}

impl Location {
    pub fn kind(&self) -> LocationKind {
        match self {
            Location::PrepZ(_) => LocationKind::PrepZ,
            Location::PrepX(_) => LocationKind::PrepX,
            Location::Idle { kind, .. } => *kind,
            Location::Cx { .. } => LocationKind::Cx,
            Location::Cz { .. } => LocationKind::Cz,
            Location::Rot { qubits } => match qubits.len() {
                1 => LocationKind::RotZ,
                2 => LocationKind::RotZz,
                _ => LocationKind::RotZzz,
            },
            Location::MeasX { .. } => LocationKind::MeasX,
        }
    }

    /// Qubits in channel order.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Location::PrepZ(q) | Location::PrepX(q) => vec![*q],
            Location::Idle { qubit, .. } => vec![*qubit],
            Location::Cx { control, target } => vec![*control, *target],
            Location::Cz { a, b } => vec![*a, *b],
            Location::Rot { qubits } => qubits.clone(),
            Location::MeasX { ancilla, .. } => vec![*ancilla],
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::PrepZ(q) => write!(f, "PZ({q})"),
            Location::PrepX(q) => write!(f, "PX({q})"),
            Location::Idle { qubit, kind } => write!(f, "{}({qubit})", kind.name()),
            Location::Cx { control, target } => write!(f, "CX({control},{target})"),
            Location::Cz { a, b } => write!(f, "CZ({a},{b})"),
            Location::Rot { qubits } => {
                let qs: Vec<String> = qubits.iter().map(|q| q.to_string()).collect();
                write!(f, "ROT({})", qs.join(","))
            }
            Location::MeasX { ancilla, meas } => write!(f, "MX({ancilla})#{meas}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Timestep {
    pub stage: Stage,
    /// 1-based syndrome round within the stage, 0 for the stage-I preamble.
    pub round: usize,
    pub label: StepLabel,
    pub noiseless: bool,
    pub locations: Vec<Location>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Measurement {
    pub stage: Stage,
    pub round: usize,
    /// Stabilizer index in the layout of its stage.
    pub stabilizer: usize,
    pub ancilla: usize,
    pub timestep: usize,
}

/// Parity of a set of measurement flips that is zero in the absence of faults.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Detector {
    pub stage: Stage,
    pub round: usize,
    pub stabilizer: usize,
    pub measurements: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage1Info {
    pub variant: SchemeVariant,
    pub theta: f64,
    pub layout: CodeLayout,
    /// Stage-I data index to global qubit.
    pub data_map: Vec<usize>,
    /// Stage-I stabilizer index to global ancilla.
    pub ancilla_map: Vec<usize>,
    pub init: InitPattern,
    pub fixed: BTreeSet<usize>,
    pub rounds: usize,
}

impl Stage1Info {
    pub fn grey_global(&self) -> Vec<usize> {
        self.init.grey.iter().map(|&q| self.data_map[q]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitProgram {
    /// Code that holds the state when the program ends.
    pub layout: CodeLayout,
    pub stage1: Option<Stage1Info>,
    /// Preparations applied at the start of stage II, over `layout` data.
    pub stage2_init: Vec<Option<Ket>>,
    /// Stage-II stabilizers that receive a first-round detector.
    pub stage2_fixed: BTreeSet<usize>,
    pub dm: usize,
    pub final_round_noiseless: bool,
    pub num_qubits: usize,
    pub timesteps: Vec<Timestep>,
    pub measurements: Vec<Measurement>,
    pub detectors: Vec<Detector>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("scheme {variant} needs dz1 >= {need}, got {dz1}")]
    TooNarrow { variant: SchemeVariant, need: usize, dz1: usize },
    #[error("rotation angle {0} outside (0, pi/2)")]
    InvalidAngle(f64),
    #[error("stage II ({dx2}x{dz2}) must contain stage I ({dx1}x{dz1})")]
    GrowthShrinks { dx1: usize, dz1: usize, dx2: usize, dz2: usize },
    #[error("at least one stage-II round is required")]
    NoRounds,
    #[error("program already contains stage II")]
    AlreadyGrown,
}

impl CircuitProgram {
    pub fn has_stage2(&self) -> bool {
        self.timesteps.iter().any(|t| t.stage == Stage::Two)
    }

    pub fn stage_rounds(&self, stage: Stage) -> usize {
        self.timesteps.iter().filter(|t| t.stage == stage).map(|t| t.round).max().unwrap_or(0)
    }

    pub fn detectors_in(&self, stage: Stage) -> impl Iterator<Item = (usize, &Detector)> {
        self.detectors.iter().enumerate().filter(move |(_, d)| d.stage == stage)
    }

    /// Qubits with a location in each timestep must not repeat.
    pub fn check_timesteps(&self) -> Result<(), String> {
        for (i, t) in self.timesteps.iter().enumerate() {
            let mut seen = vec![false; self.num_qubits];
            for l in &t.locations {
                for q in l.qubits() {
                    if std::mem::replace(&mut seen[q], true) {
                        return Err(format!("timestep {i}: qubit {q} used twice"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "program qubits {} timesteps {} measurements {} detectors {}",
            self.num_qubits,
            self.timesteps.len(),
            self.measurements.len(),
            self.detectors.len()
        );
        if let Some(st) = &self.stage1 {
            let _ = writeln!(
                s,
                "stage1 {} {}x{} theta {:.12e} rounds {} fixed {:?}",
                st.variant, st.layout.dx, st.layout.dz, st.theta, st.rounds, st.fixed
            );
        }
        let _ = writeln!(s, "stage2 dm {} fixed {:?}", self.dm, self.stage2_fixed);
        for (i, t) in self.timesteps.iter().enumerate() {
            let stage = if t.stage == Stage::One { 1 } else { 2 };
            let label = match t.label {
                StepLabel::Init => "init".to_string(),
                StepLabel::Rotation => "rot".to_string(),
                StepLabel::AncillaPrep => "prep".to_string(),
                StepLabel::Gate(k) => format!("gate{k}"),
                StepLabel::Measure => "meas".to_string(),
            };
            let _ = write!(s, "t{i} s{stage} r{} {label}{}:", t.round, if t.noiseless { " noiseless" } else { "" });
            for l in &t.locations {
                let _ = write!(s, " {l}");
            }
            s.push('\n');
        }
        for (i, d) in self.detectors.iter().enumerate() {
            let stage = if d.stage == Stage::One { 1 } else { 2 };
            let _ = writeln!(s, "d{i} s{stage} r{} stab {} = {:?}", d.round, d.stabilizer, d.measurements);
        }
        s
    }
}

fn ket_generators(kets: &[Option<Ket>]) -> Vec<PauliString> {
    kets.iter()
        .enumerate()
        .filter_map(|(q, k)| k.map(|k| PauliString::from_terms([(q, k.stabilizer())])))
        .collect()
}

/// Subgroup of the group generated by `gens` that commutes with `r`, as a generating list.
pub fn commuting_subgroup(gens: &[PauliString], r: &PauliString) -> Vec<PauliString> {
    let mut out = Vec::new();
    let mut pivot: Option<&PauliString> = None;
    for g in gens {
        if g.commutes_with(r) {
            out.push(g.clone());
        } else if let Some(p) = pivot {
            out.push(p.mul(g));
        } else {
            pivot = Some(g);
        }
    }
    out
}

/// Stabilizers of `init` that survive the rotation on its grey set.
fn invariant_generators(init: &InitPattern) -> Vec<PauliString> {
    let r = PauliString::uniform(init.grey.iter().copied(), Pauli::Z);
    commuting_subgroup(&ket_generators(&init.kets), &r)
}

fn span_basis(gens: &[PauliString], n: usize) -> EchelonBasis {
    let mut b = EchelonBasis::new(2 * n, gens.len().max(1));
    for g in gens {
        b.insert(&symplectic(g, n));
    }
    b
}

fn fixed_by(layout: &CodeLayout, gens: &[PauliString]) -> BTreeSet<usize> {
    let n = layout.num_data();
    let basis = span_basis(gens, n);
    layout
        .stabilizers
        .iter()
        .enumerate()
        .filter(|(_, s)| basis.contains(&symplectic(&s.support, n)))
        .map(|(i, _)| i)
        .collect()
}

/// Stabilizers with a deterministic `+1` outcome after `init` and the rotation.
pub fn compute_fixed_stabilizers(layout: &CodeLayout, init: &InitPattern, variant: SchemeVariant) -> BTreeSet<usize> {
    debug_assert_eq!(init.grey.len(), variant.grey_size());
    fixed_by(layout, &invariant_generators(init))
}

/// Split candidates for qubits left free by the logical constraints. A label `true`
/// prepares the even sublattice in `|+⟩` and the odd one in `|0⟩`; `false` the reverse.
fn candidate_labelings(layout: &CodeLayout) -> Vec<Vec<bool>> {
    let xmax = 2 * layout.dx as i32 - 2;
    let ymax = 2 * layout.dz as i32 - 2;
    let mut out: Vec<Vec<bool>> = Vec::new();
    let mut push = |f: &dyn Fn(Coord) -> bool| {
        let v: Vec<bool> = layout.data.iter().map(|&c| f(c)).collect();
        if !out.contains(&v) {
            out.push(v);
        }
    };
    for s in 0..=ymax + 1 {
        push(&|c: Coord| c.y < s);
        push(&|c: Coord| c.y >= s);
    }
    for t in 0..=xmax + 1 {
        push(&|c: Coord| c.x >= t);
        push(&|c: Coord| c.x < t);
    }
    out
}

fn ket_for_label(c: Coord, label: bool) -> Ket {
    let even = c.x % 2 == 0;
    if even == label {
        Ket::Plus
    } else {
        Ket::Zero
    }
}

/// Fill the free qubits so that the most stabilizers are fixed, given the
/// already-constrained preparations and any inherited stabilizers.
fn solve_free(
    layout: &CodeLayout,
    constrained: &[Option<Ket>],
    free: &[bool],
    inherited: &[PauliString],
    grey: &[usize],
    choice: PatternChoice,
) -> Vec<Option<Ket>> {
    let score = |kets: &[Option<Ket>]| -> usize {
        let init = InitPattern { kets: kets.to_vec(), grey: grey.to_vec() };
        let mut gens = inherited.to_vec();
        gens.extend(invariant_generators(&init));
        fixed_by(layout, &gens).len()
    };
    let preferred = match choice {
        PatternChoice::Default => Ket::Zero,
        PatternChoice::Alternate => Ket::Plus,
    };
    let better_tie = |a: &[Option<Ket>], b: &[Option<Ket>]| -> bool {
        for (x, y) in a.iter().zip(b) {
            if x != y {
                return *x == Some(preferred);
            }
        }
        false
    };
    let mut best: Option<(usize, Vec<Option<Ket>>)> = None;
    for labels in candidate_labelings(layout) {
        let kets: Vec<Option<Ket>> = (0..layout.num_data())
            .map(|q| if free[q] { Some(ket_for_label(layout.data[q], labels[q])) } else { constrained[q] })
            .collect();
        let sc = score(&kets);
        let take = match &best {
            None => true,
            Some((bs, bk)) => sc > *bs || (sc == *bs && better_tie(&kets, bk)),
        };
        if take {
            best = Some((sc, kets));
        }
    }
    best.expect("at least one candidate").1
}

/// Initialization pattern for the stage-I patch.
pub fn stage1_pattern(layout: &CodeLayout, variant: SchemeVariant, choice: PatternChoice) -> InitPattern {
    let k = variant.grey_size();
    let n = layout.num_data();
    let mut constrained = vec![None; n];
    let mut free = vec![true; n];
    let grey: Vec<usize> = (0..k).map(|c| layout.vertex(0, c).expect("grey on top row")).collect();
    for c in 0..layout.dz {
        let q = layout.vertex(0, c).expect("top row");
        constrained[q] = Some(if c < k { Ket::Plus } else { Ket::Zero });
        free[q] = false;
    }
    for r in 1..layout.dx {
        let q = layout.vertex(r, 0).expect("left column");
        constrained[q] = Some(Ket::Plus);
        free[q] = false;
    }
    let kets = solve_free(layout, &constrained, &free, &[], &grey, choice);
    InitPattern { kets, grey }
}

fn check_angle(theta: f64) -> Result<(), ProtocolError> {
    if theta > 0.0 && theta < FRAC_PI_2 {
        Ok(())
    } else {
        Err(ProtocolError::InvalidAngle(theta))
    }
}

struct Builder {
    timesteps: Vec<Timestep>,
    measurements: Vec<Measurement>,
}

impl Builder {
    /// One syndrome-extraction round. `preps` are data preparations merged into the
    /// ancilla-preparation step. Other data qubits are absent from that step: ancilla
    /// reset overlaps the measurement window, so data idles once per round.
    #[allow(clippy::too_many_arguments)]
    fn round(
        &mut self,
        layout: &CodeLayout,
        data_map: &[usize],
        ancilla_map: &[usize],
        stage: Stage,
        round: usize,
        noiseless: bool,
        preps: &[(usize, Ket)],
    ) -> Vec<usize> {
        let data: Vec<usize> = data_map.to_vec();
        let mut locs = Vec::new();
        for &a in ancilla_map {
            locs.push(Location::PrepX(a));
        }
        for &q in &data {
            match preps.iter().find(|p| p.0 == q) {
                Some((_, Ket::Zero)) => locs.push(Location::PrepZ(q)),
                Some((_, Ket::Plus)) => locs.push(Location::PrepX(q)),
                None => {}
            }
        }
        self.push(stage, round, StepLabel::AncillaPrep, noiseless, locs);
        for step in 0..SCHEDULE_STEPS {
            let mut gates = Vec::new();
            let mut busy = BTreeSet::new();
            let mut any_cx = false;
            for (s, st) in layout.stabilizers.iter().enumerate() {
                for g in st.schedule.iter().filter(|g| g.step == step) {
                    let (a, d) = (ancilla_map[s], data_map[g.data]);
                    busy.insert(a);
                    busy.insert(d);
                    gates.push(match g.gate {
                        CouplingGate::Cx => {
                            any_cx = true;
                            Location::Cx { control: a, target: d }
                        }
                        CouplingGate::Cz => Location::Cz { a, b: d },
                    });
                }
            }
            if gates.is_empty() {
                continue;
            }
            let kind = if any_cx { LocationKind::IdleDuringCx } else { LocationKind::IdleDuringCz };
            for &q in ancilla_map.iter().chain(&data) {
                if !busy.contains(&q) {
                    gates.push(Location::Idle { qubit: q, kind });
                }
            }
            self.push(stage, round, StepLabel::Gate(step), noiseless, gates);
        }
        let t = self.timesteps.len();
        let mut locs = Vec::new();
        let mut ids = Vec::new();
        for (s, &a) in ancilla_map.iter().enumerate() {
            let meas = self.measurements.len();
            self.measurements.push(Measurement { stage, round, stabilizer: s, ancilla: a, timestep: t });
            locs.push(Location::MeasX { ancilla: a, meas });
            ids.push(meas);
        }
        for &q in &data {
            locs.push(Location::Idle { qubit: q, kind: LocationKind::IdleMeas });
        }
        self.push(stage, round, StepLabel::Measure, noiseless, locs);
        ids
    }

    fn push(&mut self, stage: Stage, round: usize, label: StepLabel, noiseless: bool, locations: Vec<Location>) {
        self.timesteps.push(Timestep { stage, round, label, noiseless, locations });
    }
}

/// Stage I with the standard number of rounds for the variant.
pub fn build_stage1(variant: SchemeVariant, dx1: usize, dz1: usize, theta: f64) -> Result<CircuitProgram, ProtocolError> {
    build_stage1_with(variant, dx1, dz1, theta, variant.default_stage1_rounds(), PatternChoice::Default)
}

/// Stage I with an explicit round count; zero rounds skips stage-I error detection.
pub fn build_stage1_with(
    variant: SchemeVariant,
    dx1: usize,
    dz1: usize,
    theta: f64,
    rounds: usize,
    choice: PatternChoice,
) -> Result<CircuitProgram, ProtocolError> {
    check_angle(theta)?;
    let layout = CodeLayout::build(dx1, dz1)?;
    let need = variant.grey_size().max(2);
    if dz1 < need {
        return Err(ProtocolError::TooNarrow { variant, need, dz1 });
    }
    let init = stage1_pattern(&layout, variant, choice);
    let fixed = compute_fixed_stabilizers(&layout, &init, variant);
    let data_map: Vec<usize> = (0..layout.num_data()).collect();
    let ancilla_map: Vec<usize> = layout.stabilizers.iter().map(|s| s.ancilla).collect();
    let mut b = Builder { timesteps: Vec::new(), measurements: Vec::new() };
    let preps = init
        .kets
        .iter()
        .enumerate()
        .map(|(q, k)| match k.expect("stage I prepares every qubit") {
            Ket::Zero => Location::PrepZ(q),
            Ket::Plus => Location::PrepX(q),
        })
        .collect();
    b.push(Stage::One, 0, StepLabel::Init, false, preps);
    let mut rot = vec![Location::Rot { qubits: init.grey.clone() }];
    for q in 0..layout.num_data() {
        if !init.grey.contains(&q) {
            rot.push(Location::Idle { qubit: q, kind: LocationKind::IdleDuringCz });
        }
    }
    b.push(Stage::One, 0, StepLabel::Rotation, false, rot);
    let mut per_round = Vec::new();
    for r in 1..=rounds {
        per_round.push(b.round(&layout, &data_map, &ancilla_map, Stage::One, r, false, &[]));
    }
    let mut detectors = Vec::new();
    for (r, ids) in per_round.iter().enumerate() {
        for (s, &m) in ids.iter().enumerate() {
            if r == 0 {
                if fixed.contains(&s) {
                    detectors.push(Detector { stage: Stage::One, round: 1, stabilizer: s, measurements: vec![m] });
                }
            } else {
                let prev = per_round[r - 1][s];
                detectors.push(Detector { stage: Stage::One, round: r + 1, stabilizer: s, measurements: vec![prev, m] });
            }
        }
    }
    let num_qubits = layout.num_qubits();
    Ok(CircuitProgram {
        stage1: Some(Stage1Info {
            variant,
            theta,
            layout: layout.clone(),
            data_map,
            ancilla_map,
            init,
            fixed,
            rounds,
        }),
        layout,
        stage2_init: Vec::new(),
        stage2_fixed: BTreeSet::new(),
        dm: 0,
        final_round_noiseless: false,
        num_qubits,
        timesteps: b.timesteps,
        measurements: b.measurements,
        detectors,
    })
}

/// Grow a stage-I program into a `dx2 × dz2` patch followed by `dm` noisy rounds
/// and one noiseless round.
pub fn build_stage2(
    stage1: &CircuitProgram,
    dx2: usize,
    dz2: usize,
    dm: usize,
    choice: PatternChoice,
) -> Result<CircuitProgram, ProtocolError> {
    if stage1.has_stage2() {
        return Err(ProtocolError::AlreadyGrown);
    }
    let s1 = stage1.stage1.as_ref().expect("stage-I program");
    let (dx1, dz1) = (s1.layout.dx, s1.layout.dz);
    if dx2 < dx1 || dz2 < dz1 {
        return Err(ProtocolError::GrowthShrinks { dx1, dz1, dx2, dz2 });
    }
    if dm == 0 {
        return Err(ProtocolError::NoRounds);
    }
    let big = CodeLayout::build(dx2, dz2)?;
    let data_map: Vec<usize> = s1.layout.data.iter().map(|&c| big.qubit_at(c).expect("region I inside")).collect();
    let ancilla_map: Vec<usize> = s1
        .layout
        .stabilizers
        .iter()
        .map(|s| big.stabilizers[big.stabilizer_at(s.centre).expect("face inside")].ancilla)
        .collect();
    let old_q = |q: usize| -> usize {
        let n1 = s1.layout.num_data();
        if q < n1 {
            data_map[q]
        } else {
            ancilla_map[q - n1]
        }
    };
    let remap = |l: &Location| -> Location {
        match l {
            Location::PrepZ(q) => Location::PrepZ(old_q(*q)),
            Location::PrepX(q) => Location::PrepX(old_q(*q)),
            Location::Idle { qubit, kind } => Location::Idle { qubit: old_q(*qubit), kind: *kind },
            Location::Cx { control, target } => Location::Cx { control: old_q(*control), target: old_q(*target) },
            Location::Cz { a, b } => Location::Cz { a: old_q(*a), b: old_q(*b) },
            Location::Rot { qubits } => Location::Rot { qubits: qubits.iter().map(|&q| old_q(q)).collect() },
            Location::MeasX { ancilla, meas } => Location::MeasX { ancilla: old_q(*ancilla), meas: *meas },
        }
    };
    let mut b = Builder {
        timesteps: stage1
            .timesteps
            .iter()
            .map(|t| Timestep { locations: t.locations.iter().map(&remap).collect(), ..t.clone() })
            .collect(),
        measurements: stage1
            .measurements
            .iter()
            .map(|m| Measurement { ancilla: old_q(m.ancilla), ..m.clone() })
            .collect(),
    };

    // Region-I state after stage I, in final-layout indices.
    let inherited: Vec<PauliString> = if s1.rounds > 0 {
        s1.layout.stabilizers.iter().map(|s| s.support.remap(|q| data_map[q])).collect()
    } else {
        invariant_generators(&s1.init).iter().map(|g| g.remap(|q| data_map[q])).collect()
    };

    // Region-II preparations: extend both logical representatives, then maximise fixed faces.
    let n = big.num_data();
    let mut in_region1 = vec![false; n];
    for &q in &data_map {
        in_region1[q] = true;
    }
    let mut constrained = vec![None; n];
    let mut free = vec![false; n];
    for q in 0..n {
        if !in_region1[q] {
            free[q] = true;
        }
    }
    for c in dz1..dz2 {
        let q = big.vertex(0, c).expect("top row");
        constrained[q] = Some(Ket::Zero);
        free[q] = false;
    }
    for r in dx1..dx2 {
        let q = big.vertex(r, 0).expect("left column");
        constrained[q] = Some(Ket::Plus);
        free[q] = false;
    }
    let stage2_init = solve_free(&big, &constrained, &free, &inherited, &[], choice);
    let mut gens = inherited.clone();
    gens.extend(ket_generators(&stage2_init));
    let stage2_fixed = fixed_by(&big, &gens);

    let preps: Vec<(usize, Ket)> = stage2_init.iter().enumerate().filter_map(|(q, k)| k.map(|k| (q, k))).collect();
    let all_data: Vec<usize> = (0..n).collect();
    let all_anc: Vec<usize> = big.stabilizers.iter().map(|s| s.ancilla).collect();
    let mut per_round = Vec::new();
    for r in 1..=dm + 1 {
        let p = if r == 1 { &preps[..] } else { &[] };
        per_round.push(b.round(&big, &all_data, &all_anc, Stage::Two, r, r == dm + 1, p));
    }

    let mut detectors = stage1.detectors.clone();
    // Inherited terms of a first-round detector compare against the last stage-I round.
    let basis = span_basis(&gens, n);
    let last_ids: Vec<usize> = if s1.rounds > 0 {
        (0..s1.layout.stabilizers.len())
            .map(|s| {
                b.measurements
                    .iter()
                    .position(|m| m.stage == Stage::One && m.round == s1.rounds && m.stabilizer == s)
                    .expect("stage-I measurement")
            })
            .collect()
    } else {
        Vec::new()
    };
    for (s, st) in big.stabilizers.iter().enumerate() {
        if !stage2_fixed.contains(&s) {
            continue;
        }
        let combo = basis.decompose(&symplectic(&st.support, n)).expect("fixed stabilizer in span");
        let mut ms = vec![per_round[0][s]];
        if s1.rounds > 0 {
            for g in combo.into_iter().filter(|&g| g < inherited.len()) {
                ms.push(last_ids[g]);
            }
        }
        ms.sort_unstable();
        detectors.push(Detector { stage: Stage::Two, round: 1, stabilizer: s, measurements: ms });
    }
    for r in 1..per_round.len() {
        for s in 0..big.stabilizers.len() {
            detectors.push(Detector {
                stage: Stage::Two,
                round: r + 1,
                stabilizer: s,
                measurements: vec![per_round[r - 1][s], per_round[r][s]],
            });
        }
    }
    let num_qubits = big.num_qubits();
    Ok(CircuitProgram {
        layout: big,
        stage1: Some(Stage1Info { data_map, ancilla_map, ..s1.clone() }),
        stage2_init,
        stage2_fixed,
        dm,
        final_round_noiseless: true,
        num_qubits,
        timesteps: b.timesteps,
        measurements: b.measurements,
        detectors,
    })
}

/// Plain memory experiment on a `dx × dz` patch: product-state preparation chosen by
/// the same solver with the left column in `|+⟩` so that `X_L` is fixed, `rounds` noisy
/// rounds and one noiseless round.
pub fn build_memory(dx: usize, dz: usize, rounds: usize) -> Result<CircuitProgram, ProtocolError> {
    if rounds == 0 {
        return Err(ProtocolError::NoRounds);
    }
    let layout = CodeLayout::build(dx, dz)?;
    let n = layout.num_data();
    let mut constrained = vec![None; n];
    let mut free = vec![true; n];
    for r in 0..dx {
        let q = layout.vertex(r, 0).expect("left column");
        constrained[q] = Some(Ket::Plus);
        free[q] = false;
    }
    let init = solve_free(&layout, &constrained, &free, &[], &[], PatternChoice::Default);
    let gens = ket_generators(&init);
    let fixed = fixed_by(&layout, &gens);
    let mut b = Builder { timesteps: Vec::new(), measurements: Vec::new() };
    let preps: Vec<(usize, Ket)> = init.iter().enumerate().map(|(q, k)| (q, k.expect("all prepared"))).collect();
    let data: Vec<usize> = (0..n).collect();
    let anc: Vec<usize> = layout.stabilizers.iter().map(|s| s.ancilla).collect();
    let mut per_round = Vec::new();
    for r in 1..=rounds + 1 {
        let p = if r == 1 { &preps[..] } else { &[] };
        per_round.push(b.round(&layout, &data, &anc, Stage::Two, r, r == rounds + 1, p));
    }
    let mut detectors = Vec::new();
    for &s in &fixed {
        detectors.push(Detector { stage: Stage::Two, round: 1, stabilizer: s, measurements: vec![per_round[0][s]] });
    }
    for r in 1..per_round.len() {
        for s in 0..layout.stabilizers.len() {
            detectors.push(Detector {
                stage: Stage::Two,
                round: r + 1,
                stabilizer: s,
                measurements: vec![per_round[r - 1][s], per_round[r][s]],
            });
        }
    }
    let num_qubits = layout.num_qubits();
    Ok(CircuitProgram {
        layout,
        stage1: None,
        stage2_init: init,
        stage2_fixed: fixed,
        dm: rounds,
        final_round_noiseless: true,
        num_qubits,
        timesteps: b.timesteps,
        measurements: b.measurements,
        detectors,
    })
}
