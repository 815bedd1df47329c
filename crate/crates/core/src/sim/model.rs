//! Precomputed linear fault effects.
//!
//! Everything after Stage I is Clifford, so a Pauli fault acts on the stage-II
//! detectors and the logical observables linearly. Each location stores the effect of
//! an X and a Z on each of its legs; a sampled fault is the XOR of its components.
//! A fault is propagated only to the end of its own round: from there on a data
//! Pauli's effect is looked up in the per-boundary signature tables, built backwards.

use rand::Rng;

use crate::code::LogicalKind;
use crate::noise::{Channel, Fault, LocationKind, NoiseModel};
use crate::pauli::Pauli;
use crate::protocol::{CircuitProgram, Location, Stage};

use super::frame::{logical_bits, PauliFrame};
use super::SimError;

/// Flat list of detector sets with a logical flip mask each.
#[derive(Clone, Debug, Default)]
pub struct EffectPool {
    off: Vec<u32>,
    dets: Vec<u32>,
    obs: Vec<u8>,
}

impl EffectPool {
    fn new() -> Self {
        Self { off: vec![0], dets: Vec::new(), obs: Vec::new() }
    }

    fn push(&mut self, dets: &[u32], obs: u8) -> u32 {
        self.dets.extend_from_slice(dets);
        self.off.push(self.dets.len() as u32);
        self.obs.push(obs);
        (self.obs.len() - 1) as u32
    }

    #[inline]
    pub fn get(&self, id: u32) -> (&[u32], u8) {
        let i = id as usize;
        (&self.dets[self.off[i] as usize..self.off[i + 1] as usize], self.obs[i])
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

/// Set of stage-II detectors toggled by XOR, with the logical flip mask.
#[derive(Clone, Debug)]
pub struct Syndrome {
    words: Vec<u64>,
    pub obs: u8,
}

impl Syndrome {
    pub fn new(num_dets: usize) -> Self {
        Self { words: vec![0; num_dets.div_ceil(64)], obs: 0 }
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
        self.obs = 0;
    }

    #[inline]
    pub fn toggle(&mut self, d: u32) {
        self.words[d as usize / 64] ^= 1u64 << (d % 64);
    }

    #[inline]
    pub fn toggle_effect(&mut self, eff: (&[u32], u8)) {
        for &d in eff.0 {
            self.toggle(d);
        }
        self.obs ^= eff.1;
    }

    pub fn is_set(&self, d: u32) -> bool {
        self.words[d as usize / 64] >> (d % 64) & 1 == 1
    }

    /// Flagged detectors in increasing order.
    pub fn fired_into(&self, out: &mut Vec<u32>) {
        out.clear();
        for (i, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                out.push(i as u32 * 64 + w.trailing_zeros());
                w &= w - 1;
            }
        }
    }

    pub fn fired(&self) -> Vec<u32> {
        let mut v = Vec::new();
        self.fired_into(&mut v);
        v
    }
}

/// A stage-II location with the ids of its component effects.
#[derive(Clone, Debug)]
pub struct Stage2Location {
    pub timestep: usize,
    pub index: usize,
    pub kind: LocationKind,
    pub round: usize,
    pub noiseless: bool,
    pub qubits: [u32; 3],
    pub arity: u8,
    /// Legs `j` have X at `comp + 2j`, Z at `comp + 2j + 1`; a measurement has one flip entry.
    pub comp: u32,
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Prep,
    Cx,
    Cz,
    Rot,
    Idle,
    Meas(u32),
}

#[derive(Clone, Debug)]
pub(crate) struct FlatLoc {
    op: Op,
    pub(crate) kind: LocationKind,
    qubits: [u32; 3],
    n: u8,
}

impl FlatLoc {
    fn from_location(l: &Location) -> Self {
        let qs = l.qubits();
        let mut qubits = [0u32; 3];
        for (i, &q) in qs.iter().take(3).enumerate() {
            qubits[i] = q as u32;
        }
        let op = match l {
            Location::PrepZ(_) | Location::PrepX(_) => Op::Prep,
            Location::Cx { .. } => Op::Cx,
            Location::Cz { .. } => Op::Cz,
            Location::Rot { .. } => Op::Rot,
            Location::Idle { .. } => Op::Idle,
            Location::MeasX { meas, .. } => Op::Meas(*meas as u32),
        };
        Self { op, kind: l.kind(), qubits, n: qs.len().min(3) as u8 }
    }

    #[inline]
    fn qs(&self) -> &[u32] {
        &self.qubits[..self.n as usize]
    }
}

pub(crate) struct Stage1Step {
    pub(crate) noiseless: bool,
    pub(crate) locs: Vec<FlatLoc>,
}

/// Noise, detector and fault-effect tables for one program.
pub struct CircuitModel {
    pub program: CircuitProgram,
    pub noise: NoiseModel,
    channels: Vec<Channel>,
    theta: f64,
    pub(crate) stage1_steps: Vec<Stage1Step>,
    /// Measurement ids of every stage-I detector.
    stage1_dets: Vec<Vec<u32>>,
    /// Stage-II detector ids (local numbering) containing each measurement.
    meas_det2: Vec<Vec<u32>>,
    /// Global detector index of each stage-II detector.
    det2: Vec<usize>,
    /// Region-I data qubits, carried from Stage I into the stage-II boundary tables.
    region1_data: Vec<usize>,
    /// X and Z effects of a data Pauli at the start of Stage II.
    carry: Vec<[u32; 2]>,
    pub locations: Vec<Stage2Location>,
    /// First location id of each timestep (stage-I timesteps map to an empty range).
    loc_base: Vec<usize>,
    pub effects: EffectPool,
    num_data: usize,
}

/// Sparse frame over a dense scratch array.
struct SparseFrame {
    bits: Vec<u8>,
    in_support: Vec<bool>,
    support: Vec<usize>,
}

impl SparseFrame {
    fn new(n: usize) -> Self {
        Self { bits: vec![0; n], in_support: vec![false; n], support: Vec::new() }
    }

    fn xor(&mut self, q: usize, b: u8) {
        self.bits[q] ^= b;
        if !self.in_support[q] {
            self.in_support[q] = true;
            self.support.push(q);
        }
    }

    fn reset(&mut self) {
        for &q in &self.support {
            self.bits[q] = 0;
            self.in_support[q] = false;
        }
        self.support.clear();
    }
}

/// XOR accumulator producing a sorted detector list.
struct DetAcc {
    on: Vec<bool>,
    touched: Vec<u32>,
    obs: u8,
}

impl DetAcc {
    fn new(n: usize) -> Self {
        Self { on: vec![false; n], touched: Vec::new(), obs: 0 }
    }

    fn toggle(&mut self, d: u32) {
        self.on[d as usize] ^= true;
        self.touched.push(d);
    }

    fn add(&mut self, eff: (&[u32], u8)) {
        for &d in eff.0 {
            self.toggle(d);
        }
        self.obs ^= eff.1;
    }

    fn take(&mut self) -> (Vec<u32>, u8) {
        let mut out: Vec<u32> = self.touched.iter().copied().filter(|&d| self.on[d as usize]).collect();
        out.sort_unstable();
        out.dedup();
        for &d in &self.touched {
            self.on[d as usize] = false;
        }
        self.touched.clear();
        (out, std::mem::take(&mut self.obs))
    }
}

impl CircuitModel {
    pub fn new(program: CircuitProgram, noise: NoiseModel) -> Result<Self, SimError> {
        program.check_timesteps().map_err(SimError::Program)?;
        let nq = program.num_qubits;
        let num_data = program.layout.num_data();
        let channels: Vec<Channel> = LocationKind::ALL.iter().map(|&k| noise.channel_for(k)).collect();
        let theta = program.stage1.as_ref().map_or(0.0, |s| s.theta);

        let mut det2 = Vec::new();
        let mut det2_local = vec![u32::MAX; program.detectors.len()];
        let mut stage1_dets = Vec::new();
        for (i, d) in program.detectors.iter().enumerate() {
            match d.stage {
                Stage::One => stage1_dets.push(d.measurements.iter().map(|&m| m as u32).collect()),
                Stage::Two => {
                    det2_local[i] = det2.len() as u32;
                    det2.push(i);
                }
            }
        }
        let mut meas_det2 = vec![Vec::new(); program.measurements.len()];
        for (i, d) in program.detectors.iter().enumerate() {
            if d.stage == Stage::Two {
                for &m in &d.measurements {
                    meas_det2[m].push(det2_local[i]);
                }
            }
        }

        let stage1_steps: Vec<Stage1Step> = program
            .timesteps
            .iter()
            .filter(|t| t.stage == Stage::One)
            .map(|t| Stage1Step { noiseless: t.noiseless, locs: t.locations.iter().map(FlatLoc::from_location).collect() })
            .collect();
        let t1 = stage1_steps.len();
        debug_assert!(program.timesteps[t1..].iter().all(|t| t.stage == Stage::Two));

        // Stage-II round ranges.
        let rounds = program.stage_rounds(Stage::Two);
        let mut round_range = vec![(0usize, 0usize); rounds + 1];
        for (t, ts) in program.timesteps.iter().enumerate().skip(t1) {
            let r = &mut round_range[ts.round];
            if r.1 == 0 {
                r.0 = t;
            }
            r.1 = t + 1;
        }

        // Location lookup per (stage-II timestep, qubit).
        let nt = program.timesteps.len();
        let mut loc_at = vec![u32::MAX; (nt - t1) * nq];
        for (t, ts) in program.timesteps.iter().enumerate().skip(t1) {
            for (i, l) in ts.locations.iter().enumerate() {
                for q in l.qubits() {
                    loc_at[(t - t1) * nq + q] = i as u32;
                }
            }
        }

        let mut m = CircuitModel {
            noise,
            channels,
            theta,
            stage1_steps,
            stage1_dets,
            meas_det2,
            det2,
            region1_data: Vec::new(),
            carry: Vec::new(),
            locations: Vec::new(),
            loc_base: Vec::new(),
            effects: EffectPool::new(),
            num_data,
            program,
        };

        let mut sf = SparseFrame::new(nq);
        let mut acc = DetAcc::new(m.det2.len());
        let mut flips = Vec::new();

        // Boundary tables, from the end of the last round backwards.
        let obs_mask = m.tracked_logicals();
        let mut sig: Vec<[u32; 2]> = (0..num_data)
            .map(|q| {
                let mut ids = [0u32; 2];
                for (j, p) in [Pauli::X, Pauli::Z].into_iter().enumerate() {
                    let mut f = PauliFrame::new(num_data);
                    f.apply(q, p);
                    ids[j] = m.effects.push(&[], logical_bits(&f, &m.program.layout) & obs_mask);
                }
                ids
            })
            .collect();
        let mut sigs = vec![Vec::new(); rounds + 1];
        for r in (1..=rounds).rev() {
            sigs[r] = sig.clone();
            let (start, end) = round_range[r];
            let mut next = Vec::with_capacity(num_data);
            for q in 0..num_data {
                let mut ids = [0u32; 2];
                for (j, b) in [1u8, 2u8].into_iter().enumerate() {
                    sf.xor(q, b);
                    m.propagate_sparse(&loc_at, t1, start, end, &mut sf, &mut flips);
                    m.finish(&mut sf, &flips, &sig, &mut acc);
                    let (d, o) = acc.take();
                    ids[j] = m.effects.push(&d, o);
                }
                next.push(ids);
            }
            sig = next;
        }
        sigs[0] = sig;
        m.carry = sigs[0].clone();
        if let Some(s1) = &m.program.stage1 {
            m.region1_data = s1.data_map.clone();
        }

        // Per-leg component effects of every stage-II location.
        let mut loc_base = vec![0usize; nt + 1];
        let mut locations = Vec::new();
        for t in 0..nt {
            loc_base[t] = locations.len();
            if t < t1 {
                continue;
            }
            let ts = &m.program.timesteps[t];
            let r = ts.round;
            let end = round_range[r].1;
            for (i, l) in ts.locations.iter().enumerate() {
                let kind = l.kind();
                let qs = l.qubits();
                let mut qubits = [0u32; 3];
                for (j, &q) in qs.iter().enumerate() {
                    qubits[j] = q as u32;
                }
                let comp = m.effects.len() as u32;
                if let Location::MeasX { meas, .. } = l {
                    let d = m.meas_det2[*meas].clone();
                    m.effects.push(&d, 0);
                } else {
                    let from = if kind.error_before() { t } else { t + 1 };
                    for &q in &qs {
                        for b in [1u8, 2u8] {
                            sf.xor(q, b);
                            m.propagate_sparse(&loc_at, t1, from, end, &mut sf, &mut flips);
                            m.finish(&mut sf, &flips, &sigs[r], &mut acc);
                            let (d, o) = acc.take();
                            m.effects.push(&d, o);
                        }
                    }
                }
                locations.push(Stage2Location {
                    timestep: t,
                    index: i,
                    kind,
                    round: r,
                    noiseless: ts.noiseless,
                    qubits,
                    arity: qs.len() as u8,
                    comp,
                });
            }
        }
        loc_base[nt] = locations.len();
        m.locations = locations;
        m.loc_base = loc_base;
        Ok(m)
    }

    /// Logical bits with a deterministic value. An injection fixes both; a memory run
    /// fixes only the logicals commuting with every prepared single-qubit state.
    fn tracked_logicals(&self) -> u8 {
        if self.program.stage1.is_some() {
            return 3;
        }
        let Some(first) = self.program.timesteps.first() else { return 3 };
        let kets: Vec<(usize, Pauli)> = first
            .locations
            .iter()
            .filter_map(|l| match *l {
                Location::PrepZ(q) if q < self.num_data => Some((q, Pauli::Z)),
                Location::PrepX(q) if q < self.num_data => Some((q, Pauli::X)),
                _ => None,
            })
            .collect();
        let layout = &self.program.layout;
        let fixed = |kind| kets.iter().all(|&(q, p)| !layout.logical(kind).get(q).anticommutes(p));
        u8::from(fixed(LogicalKind::Z)) | u8::from(fixed(LogicalKind::X)) << 1
    }

    /// Push the sparse frame through timesteps `[from, end)`, recording measurement flips.
    fn propagate_sparse(&self, loc_at: &[u32], t1: usize, from: usize, end: usize, sf: &mut SparseFrame, flips: &mut Vec<usize>) {
        let nq = self.program.num_qubits;
        flips.clear();
        let mut seen: Vec<u32> = Vec::new();
        for t in from..end {
            seen.clear();
            for &q in &sf.support {
                if sf.bits[q] != 0 {
                    let i = loc_at[(t - t1) * nq + q];
                    if i != u32::MAX && !seen.contains(&i) {
                        seen.push(i);
                    }
                }
            }
            for &i in &seen {
                let l = &self.program.timesteps[t].locations[i as usize];
                match l {
                    Location::PrepZ(q) | Location::PrepX(q) => sf.bits[*q] = 0,
                    Location::Cx { control, target } => {
                        let xc = sf.bits[*control] & 1;
                        let zt = sf.bits[*target] & 2;
                        sf.xor(*target, xc);
                        sf.xor(*control, zt);
                    }
                    Location::Cz { a, b } => {
                        let xa = sf.bits[*a] & 1;
                        let xb = sf.bits[*b] & 1;
                        sf.xor(*a, xb << 1);
                        sf.xor(*b, xa << 1);
                    }
                    Location::MeasX { ancilla, meas } => {
                        if sf.bits[*ancilla] & 2 != 0 {
                            flips.push(*meas);
                        }
                    }
                    Location::Rot { .. } => unreachable!("rotation after Stage I"),
                    Location::Idle { .. } => {}
                }
            }
        }
    }

    /// Turn measurement flips plus the end-of-round data frame into an accumulated effect.
    fn finish(&self, sf: &mut SparseFrame, flips: &[usize], sig: &[[u32; 2]], acc: &mut DetAcc) {
        for &mi in flips {
            for &d in &self.meas_det2[mi] {
                acc.toggle(d);
            }
        }
        for &q in &sf.support {
            if q < self.num_data {
                let b = sf.bits[q];
                if b & 1 != 0 {
                    acc.add(self.effects.get(sig[q][0]));
                }
                if b & 2 != 0 {
                    acc.add(self.effects.get(sig[q][1]));
                }
            }
        }
        sf.reset();
    }

    pub fn channel(&self, kind: LocationKind) -> &Channel {
        &self.channels[kind as usize]
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn num_detectors(&self) -> usize {
        self.det2.len()
    }

    /// (stabilizer, round) of a stage-II detector.
    pub fn detector_label(&self, d: u32) -> (usize, usize) {
        let det = &self.program.detectors[self.det2[d as usize]];
        (det.stabilizer, det.round)
    }

    pub fn has_stage1(&self) -> bool {
        !self.stage1_steps.is_empty()
    }

    /// Stage-II location id of `(timestep, index)`, if that timestep belongs to Stage II.
    pub fn location_id(&self, timestep: usize, index: usize) -> Option<usize> {
        let (a, b) = (self.loc_base[timestep], self.loc_base[timestep + 1]);
        (a + index < b).then_some(a + index)
    }

    /// Toggle the effect of `fault` at stage-II location `id`.
    #[inline]
    pub fn apply_fault(&self, id: usize, fault: Fault, syn: &mut Syndrome) {
        let l = &self.locations[id];
        match fault {
            Fault::MeasFlip => syn.toggle_effect(self.effects.get(l.comp)),
            Fault::Pauli(t) => {
                for (j, p) in t.iter().take(l.arity as usize).enumerate() {
                    let b = p.bits();
                    if b & 1 != 0 {
                        syn.toggle_effect(self.effects.get(l.comp + 2 * j as u32));
                    }
                    if b & 2 != 0 {
                        syn.toggle_effect(self.effects.get(l.comp + 2 * j as u32 + 1));
                    }
                }
            }
        }
    }

    /// Effect of one stage-II fault as a sorted detector list.
    pub fn fault_effect(&self, id: usize, fault: Fault) -> (Vec<u32>, u8) {
        let mut syn = Syndrome::new(self.num_detectors());
        self.apply_fault(id, fault, &mut syn);
        (syn.fired(), syn.obs)
    }

    /// Run Stage I on a dense frame. `draw` decides each location's fault, `twirl` each
    /// anticommuting rotation. Returns `false` when a stage-I detector fires; otherwise
    /// the carried effect is added to `syn`.
    pub(crate) fn run_stage1(
        &self,
        frame: &mut PauliFrame,
        meas: &mut Vec<bool>,
        syn: &mut Syndrome,
        mut draw: impl FnMut(usize, usize, &FlatLoc) -> Option<Fault>,
        mut twirl: impl FnMut() -> bool,
    ) -> bool {
        frame.clear();
        meas.clear();
        meas.resize(self.program.measurements.len(), false);
        let mut qbuf = [0usize; 3];
        for (t, step) in self.stage1_steps.iter().enumerate() {
            for (i, l) in step.locs.iter().enumerate() {
                let fault = if step.noiseless { None } else { draw(t, i, l) };
                let n = l.n as usize;
                for (j, &q) in l.qs().iter().enumerate() {
                    qbuf[j] = q as usize;
                }
                let qs = &qbuf[..n];
                let before = l.kind.error_before();
                if before {
                    if let Some(f) = fault {
                        frame.apply_fault(qs, f);
                    }
                }
                match l.op {
                    Op::Prep => frame.reset(qs[0]),
                    Op::Cx => frame.cx(qs[0], qs[1]),
                    Op::Cz => frame.cz(qs[0], qs[1]),
                    Op::Rot => {
                        if frame.x_parity(qs) && twirl() {
                            for &q in qs {
                                frame.apply(q, Pauli::Z);
                            }
                        }
                    }
                    Op::Idle => {}
                    Op::Meas(mi) => {
                        meas[mi as usize] = frame.get(qs[0]).has_z() ^ (fault == Some(Fault::MeasFlip));
                    }
                }
                if !before {
                    if let Some(f @ Fault::Pauli(_)) = fault {
                        frame.apply_fault(qs, f);
                    }
                }
            }
        }
        for d in &self.stage1_dets {
            if d.iter().fold(false, |a, &m| a ^ meas[m as usize]) {
                return false;
            }
        }
        for (mi, &f) in meas.iter().enumerate() {
            if f {
                for &d in &self.meas_det2[mi] {
                    syn.toggle(d);
                }
            }
        }
        for &q in &self.region1_data {
            let b = frame.get(q).bits();
            if b & 1 != 0 {
                syn.toggle_effect(self.effects.get(self.carry[q][0]));
            }
            if b & 2 != 0 {
                syn.toggle_effect(self.effects.get(self.carry[q][1]));
            }
        }
        true
    }

    /// Stage-I locations as `(timestep, index, kind)`.
    pub fn stage1_locations(&self) -> Vec<(usize, usize, LocationKind)> {
        let mut v = Vec::new();
        for (t, s) in self.stage1_steps.iter().enumerate() {
            if s.noiseless {
                continue;
            }
            for (i, l) in s.locs.iter().enumerate() {
                v.push((t, i, l.kind));
            }
        }
        v
    }

    /// Effect of a single stage-I fault with the rotation left untwirled, or `None`
    /// when Stage I rejects it.
    pub fn stage1_fault_effect(&self, timestep: usize, index: usize, fault: Fault) -> Option<(Vec<u32>, u8)> {
        let mut frame = PauliFrame::new(self.program.num_qubits);
        let mut meas = Vec::new();
        let mut syn = Syndrome::new(self.num_detectors());
        let ok = self.run_stage1(
            &mut frame,
            &mut meas,
            &mut syn,
            |t, i, _| (t == timestep && i == index).then_some(fault),
            || false,
        );
        ok.then(|| (syn.fired(), syn.obs))
    }

    /// Draw one stage-I shot with independent per-location sampling.
    pub(crate) fn sample_stage1<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        frame: &mut PauliFrame,
        meas: &mut Vec<bool>,
        syn: &mut Syndrome,
        boost: f64,
        weight: &mut f64,
    ) -> bool {
        let theta = self.theta;
        let rng = std::cell::RefCell::new(rng);
        self.run_stage1(
            frame,
            meas,
            syn,
            |_, _, l| {
                let ch = self.channel(l.kind);
                let p = ch.total();
                if p <= 0.0 {
                    return None;
                }
                let u: f64 = rng.borrow_mut().random();
                let pb = (p * boost).min(1.0);
                if u < pb {
                    if pb != p {
                        *weight *= p / pb;
                    }
                    Some(ch.pick_conditional(u / pb))
                } else {
                    if pb != p {
                        *weight *= (1.0 - p) / (1.0 - pb);
                    }
                    None
                }
            },
            || {
                let s = (2.0 * theta).sin();
                rng.borrow_mut().random::<f64>() < s * s
            },
        )
    }

    /// Locations touching region-I data or ancillas, used to focus importance sampling.
    pub fn touches_region1(&self, id: usize) -> bool {
        let Some(s1) = &self.program.stage1 else { return false };
        let l = &self.locations[id];
        l.qubits[..l.arity as usize]
            .iter()
            .any(|&q| s1.data_map.contains(&(q as usize)) || s1.ancilla_map.contains(&(q as usize)))
    }

    /// Noisy stage-II locations of each kind.
    pub fn noisy_locations_by_kind(&self) -> Vec<(LocationKind, Vec<u32>)> {
        let mut out = Vec::new();
        for k in LocationKind::ALL {
            let ids: Vec<u32> =
                self.locations.iter().enumerate().filter(|(_, l)| !l.noiseless && l.kind == k).map(|(i, _)| i as u32).collect();
            if !ids.is_empty() {
                out.push((k, ids));
            }
        }
        out
    }

    /// Number of distinct stage-II rounds.
    pub fn stage2_rounds(&self) -> usize {
        self.program.stage_rounds(Stage::Two)
    }

    pub fn stage1_detector_count(&self) -> usize {
        self.stage1_dets.len()
    }
}
