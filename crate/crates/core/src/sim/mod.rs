//! Monte-Carlo trials: Stage I on a dense frame with post-selection, then Stage II by
//! sparse sampling of precomputed fault effects, matching and residual classification.

pub mod frame;
pub mod model;
pub mod reference;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::decoder::{build_detector_graph, DecodeError, DecoderScratch, DetectorGraph, GraphError};
use crate::noise::{Fault, LocationKind, NoiseModel};
use crate::pauli::Pauli;
use crate::protocol::CircuitProgram;

pub use frame::{classify_residual, logical_bits, propagate, LogicalClass, PauliFrame};
pub use model::{CircuitModel, EffectPool, Stage2Location, Syndrome};
pub use reference::{reference_run, InjectedFault, ReferenceRun};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid program: {0}")]
    Program(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("corrected residual anticommutes with stabilizer {stabilizer}")]
    InconsistentResidual { stabilizer: usize },
    #[error("no location {index} in timestep {timestep}")]
    BadInjection { timestep: usize, index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub accepted: bool,
    /// Residual class, present only for accepted shots.
    pub class: Option<LogicalClass>,
}

impl TrialOutcome {
    pub const REJECTED: TrialOutcome = TrialOutcome { accepted: false, class: None };

    fn accepted(class: LogicalClass) -> Self {
        Self { accepted: true, class: Some(class) }
    }
}

/// Shot counts by outcome.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tally {
    pub shots: u64,
    pub accepted: u64,
    /// Indexed by [`LogicalClass`].
    pub counts: [u64; 4],
}

impl Tally {
    pub fn record(&mut self, o: TrialOutcome) {
        self.shots += 1;
        if let Some(c) = o.class {
            self.accepted += 1;
            self.counts[c as usize] += 1;
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.shots += other.shots;
        self.accepted += other.accepted;
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
    }

    pub fn count(&self, c: LogicalClass) -> u64 {
        self.counts[c as usize]
    }
}

/// Importance-sampling plan: selected locations fail `factor` times more often and
/// each shot carries the likelihood ratio as its weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Boost {
    pub factor: f64,
    pub stage1: bool,
    /// Stage-II rounds (from the first) whose locations touching region I are boosted.
    pub stage2_rounds: usize,
}

/// Sums for ratio estimates over weighted shots.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightedTally {
    pub shots: u64,
    pub accepted: u64,
    /// Σ w over accepted shots, and Σ w².
    pub w: f64,
    pub w2: f64,
    /// Per class: Σ w and Σ w² over accepted shots of that class.
    pub cw: [f64; 4],
    pub cw2: [f64; 4],
    pub counts: [u64; 4],
}

impl WeightedTally {
    fn record(&mut self, o: TrialOutcome, w: f64) {
        self.shots += 1;
        if let Some(c) = o.class {
            self.accepted += 1;
            self.w += w;
            self.w2 += w * w;
            self.cw[c as usize] += w;
            self.cw2[c as usize] += w * w;
            self.counts[c as usize] += 1;
        }
    }

    pub fn merge(&mut self, o: &WeightedTally) {
        self.shots += o.shots;
        self.accepted += o.accepted;
        self.w += o.w;
        self.w2 += o.w2;
        for c in 0..4 {
            self.cw[c] += o.cw[c];
            self.cw2[c] += o.cw2[c];
            self.counts[c] += o.counts[c];
        }
    }

    /// Ratio estimate of `P(class ∈ set | accepted)` with its delta-method standard error.
    pub fn conditional(&self, set: &[LogicalClass]) -> Option<(f64, f64)> {
        if self.w <= 0.0 {
            return None;
        }
        let y: f64 = set.iter().map(|&c| self.cw[c as usize]).sum();
        let y2: f64 = set.iter().map(|&c| self.cw2[c as usize]).sum();
        let r = y / self.w;
        // Σ (y_i − r x_i)² with y_i x_i = y_i² since the class implies acceptance.
        let ss = (y2 - 2.0 * r * y2 + r * r * self.w2).max(0.0);
        Some((r, ss.sqrt() / self.w))
    }

    /// Estimated acceptance probability and its standard error.
    pub fn success(&self) -> (f64, f64) {
        let n = self.shots as f64;
        let m = self.w / n;
        let var = (self.w2 / n - m * m).max(0.0);
        (m, (var / n).sqrt())
    }
}

struct Group {
    kind: LocationKind,
    ids: Vec<u32>,
    p: f64,
    pb: f64,
}

/// Per-worker buffers.
pub struct TrialScratch {
    frame: PauliFrame,
    meas: Vec<bool>,
    syn: Syndrome,
    fired: Vec<u32>,
    dec: DecoderScratch,
}

/// Program, noise tables and decoder graph, shared read-only by every worker.
pub struct Simulator {
    pub model: CircuitModel,
    pub graph: DetectorGraph,
    groups: Vec<Group>,
}

/// Per-trial random stream keyed by seed, stream id (sweep point) and trial index.
pub fn trial_rng(seed: u64, stream: u64, trial: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r.set_word_pos(u128::from(trial) << 32);
    r
}

const BLOCK: u64 = 256;

impl Simulator {
    pub fn new(program: CircuitProgram, noise: NoiseModel) -> Result<Self, SimError> {
        let model = CircuitModel::new(program, noise)?;
        let graph = build_detector_graph(&model)?;
        let groups = Self::make_groups(&model, None);
        Ok(Self { model, graph, groups })
    }

    fn make_groups(model: &CircuitModel, boost: Option<&Boost>) -> Vec<Group> {
        let mut out = Vec::new();
        for (kind, ids) in model.noisy_locations_by_kind() {
            let p = model.channel(kind).total();
            if p <= 0.0 {
                continue;
            }
            match boost {
                Some(b) if b.stage2_rounds > 0 && b.factor != 1.0 => {
                    let (hot, cold): (Vec<u32>, Vec<u32>) = ids.into_iter().partition(|&i| {
                        model.locations[i as usize].round <= b.stage2_rounds && model.touches_region1(i as usize)
                    });
                    if !hot.is_empty() {
                        out.push(Group { kind, ids: hot, p, pb: (p * b.factor).min(1.0) });
                    }
                    if !cold.is_empty() {
                        out.push(Group { kind, ids: cold, p, pb: p });
                    }
                }
                _ => out.push(Group { kind, ids, p, pb: p }),
            }
        }
        out
    }

    pub fn scratch(&self) -> TrialScratch {
        TrialScratch {
            frame: PauliFrame::new(self.model.program.num_qubits),
            meas: Vec::new(),
            syn: Syndrome::new(self.model.num_detectors()),
            fired: Vec::new(),
            dec: DecoderScratch::default(),
        }
    }

    /// One shot: sample Stage I, post-select, sample Stage II, decode, classify.
    pub fn run_trial<R: Rng + ?Sized>(&self, rng: &mut R, s: &mut TrialScratch) -> Result<TrialOutcome, SimError> {
        Ok(self.shot(rng, s, &self.groups, 1.0)?.0)
    }

    fn shot<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        s: &mut TrialScratch,
        groups: &[Group],
        stage1_factor: f64,
    ) -> Result<(TrialOutcome, f64), SimError> {
        s.syn.clear();
        let mut w = 1.0;
        if self.model.has_stage1() && !self.model.sample_stage1(rng, &mut s.frame, &mut s.meas, &mut s.syn, stage1_factor, &mut w)
        {
            return Ok((TrialOutcome::REJECTED, w));
        }
        for g in groups {
            let ch = self.model.channel(g.kind);
            let n = g.ids.len();
            let mut hits = 0usize;
            if g.pb >= 1.0 {
                for &id in &g.ids {
                    let f = ch.pick_conditional(rng.random());
                    self.model.apply_fault(id as usize, f, &mut s.syn);
                }
                hits = n;
            } else {
                let ln_q = (-g.pb).ln_1p();
                let mut i = 0usize;
                while i < n {
                    let u: f64 = rng.random();
                    let gap = ((1.0 - u).ln() / ln_q).floor();
                    if gap >= (n - i) as f64 {
                        break;
                    }
                    i += gap as usize;
                    let f = ch.pick_conditional(rng.random());
                    self.model.apply_fault(g.ids[i] as usize, f, &mut s.syn);
                    hits += 1;
                    i += 1;
                }
            }
            if g.pb != g.p {
                w *= (g.p / g.pb).powi(hits as i32) * ((1.0 - g.p) / (1.0 - g.pb)).powi((n - hits) as i32);
            }
        }
        let class = self.decode_syndrome(s)?;
        Ok((TrialOutcome::accepted(class), w))
    }

    fn decode_syndrome(&self, s: &mut TrialScratch) -> Result<LogicalClass, SimError> {
        s.syn.fired_into(&mut s.fired);
        let m = self.graph.decode(&s.fired, &mut s.dec)?;
        Ok(LogicalClass::from_bits(s.syn.obs ^ m.obs))
    }

    /// Noise-free run with the given faults; rotations take the fixed twirl branch.
    pub fn run_with_faults(&self, faults: &[InjectedFault], twirl: bool) -> Result<TrialOutcome, SimError> {
        let mut s = self.scratch();
        s.syn.clear();
        let t1 = self.model.stage1_steps.len();
        for f in faults {
            let ts = self.model.program.timesteps.get(f.timestep);
            if ts.is_none_or(|ts| f.index >= ts.locations.len()) {
                return Err(SimError::BadInjection { timestep: f.timestep, index: f.index });
            }
        }
        if self.model.has_stage1() {
            let ok = self.model.run_stage1(
                &mut s.frame,
                &mut s.meas,
                &mut s.syn,
                |t, i, l| combine(faults.iter().filter(|f| f.timestep == t && f.index == i).map(|f| f.fault), l.kind),
                || twirl,
            );
            if !ok {
                return Ok(TrialOutcome::REJECTED);
            }
        }
        for f in faults.iter().filter(|f| f.timestep >= t1) {
            let id = self
                .model
                .location_id(f.timestep, f.index)
                .ok_or(SimError::BadInjection { timestep: f.timestep, index: f.index })?;
            self.model.apply_fault(id, f.fault, &mut s.syn);
        }
        let class = self.decode_syndrome(&mut s)?;
        Ok(TrialOutcome::accepted(class))
    }

    fn run_blocks<T, F>(&self, shots: u64, seed: u64, stream: u64, f: F) -> Result<Vec<T>, SimError>
    where
        F: Fn(&mut ChaCha8Rng, &mut TrialScratch, &mut T) -> Result<(), SimError> + Sync,
        T: Default + Send,
    {
        let blocks = shots.div_ceil(BLOCK);
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut s = self.scratch();
                let mut acc = T::default();
                for trial in b * BLOCK..((b + 1) * BLOCK).min(shots) {
                    let mut rng = trial_rng(seed, stream, trial);
                    f(&mut rng, &mut s, &mut acc)?;
                }
                Ok(acc)
            })
            .collect()
    }

    /// `shots` independent trials; the result depends only on `(seed, stream, shots)`.
    pub fn run_experiment(&self, shots: u64, seed: u64, stream: u64) -> Result<Tally, SimError> {
        let parts = self.run_blocks(shots, seed, stream, |rng, s, t: &mut Tally| {
            t.record(self.run_trial(rng, s)?);
            Ok(())
        })?;
        let mut total = Tally::default();
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }

    /// Importance-sampled run. Block sums are merged in block order, so the floating
    /// point result is also independent of the worker count.
    pub fn run_weighted(&self, shots: u64, seed: u64, stream: u64, boost: Boost) -> Result<WeightedTally, SimError> {
        let groups = Self::make_groups(&self.model, Some(&boost));
        let s1 = if boost.stage1 { boost.factor } else { 1.0 };
        let parts = self.run_blocks(shots, seed, stream, |rng, s, t: &mut WeightedTally| {
            let (o, w) = self.shot(rng, s, &groups, s1)?;
            t.record(o, w);
            Ok(())
        })?;
        let mut total = WeightedTally::default();
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }
}

/// Every single dephasing-type fault a location can suffer: Z on any non-empty subset
/// of its legs, or a flipped outcome for a measurement.
pub fn dephasing_faults(kind: LocationKind) -> Vec<Fault> {
    if kind == LocationKind::MeasX {
        return vec![Fault::MeasFlip];
    }
    let k = kind.arity();
    (1u32..1 << k)
        .map(|m| {
            let mut t = [Pauli::I; 3];
            for (j, l) in t.iter_mut().enumerate().take(k) {
                if m >> (k - 1 - j) & 1 == 1 {
                    *l = Pauli::Z;
                }
            }
            Fault::Pauli(t)
        })
        .collect()
}

/// A single injected fault with its outcome under both twirl branches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingleFaultCase {
    pub fault: InjectedFault,
    pub kind: LocationKind,
    pub outcomes: [TrialOutcome; 2],
}

impl SingleFaultCase {
    /// Accepted with a non-trivial residual on some twirl branch.
    pub fn undetected_failure(&self) -> bool {
        self.outcomes.iter().any(|o| o.class.is_some_and(|c| c != LogicalClass::I))
    }
}

impl Simulator {
    /// Inject every single stage-I dephasing fault and record the outcome.
    pub fn stage1_single_fault_suite(&self) -> Result<Vec<SingleFaultCase>, SimError> {
        let mut out = Vec::new();
        for (t, i, kind) in self.model.stage1_locations() {
            for fault in dephasing_faults(kind) {
                let f = InjectedFault { timestep: t, index: i, fault };
                let outcomes = [self.run_with_faults(&[f], false)?, self.run_with_faults(&[f], true)?];
                out.push(SingleFaultCase { fault: f, kind, outcomes });
            }
        }
        Ok(out)
    }
}

/// Product of several faults injected at one location.
fn combine(faults: impl Iterator<Item = Fault>, kind: LocationKind) -> Option<Fault> {
    let mut t = [Pauli::I; 3];
    let mut flip = false;
    let mut any = false;
    for f in faults {
        any = true;
        match f {
            Fault::MeasFlip => flip ^= true,
            Fault::Pauli(p) => {
                for j in 0..3 {
                    t[j] = t[j] * p[j];
                }
            }
        }
    }
    if !any {
        return None;
    }
    if kind == LocationKind::MeasX {
        return flip.then_some(Fault::MeasFlip);
    }
    Some(Fault::Pauli(t))
}
