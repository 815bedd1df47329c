//! Space-time detector graph built by enumerating every elementary fault.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::noise::{Fault, LocationKind};
use crate::pauli::Pauli;
use crate::sim::CircuitModel;

use super::matching::DistanceTable;

/// Fixed-point scale of integer edge weights.
pub const WEIGHT_SCALE: f64 = 1e6;

/// Where a fault sits in the program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaultRef {
    pub timestep: u32,
    pub index: u32,
    pub kind: LocationKind,
    /// Channel entry, or for a decomposed fault the entry it was split from.
    pub fault: Fault,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub u: u32,
    /// Second endpoint; equal to the node count for the boundary.
    pub v: u32,
    pub probability: f64,
    pub weight: i64,
    /// Bit 0 flips `X_L`-type class (anticommutes with `Z_L`), bit 1 the `Z_L`-type.
    pub obs: u8,
    pub provenance: Vec<FaultRef>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("fault {fault:?} at timestep {timestep} location {index} flips {events} detectors even after splitting")]
    HyperEdge { timestep: usize, index: usize, fault: Fault, events: usize },
}

#[derive(Clone, Debug)]
pub struct DetectorGraph {
    pub num_nodes: usize,
    pub edges: Vec<Edge>,
    adj_off: Vec<u32>,
    adj: Vec<(u32, i64, u8)>,
    /// Distance and path parity from each node to the boundary (`i64::MAX` if unreachable).
    pub boundary_dist: Vec<i64>,
    pub boundary_obs: Vec<u8>,
    /// Edges whose merged faults disagreed on the logical annotation.
    pub annotation_conflicts: usize,
    /// Faults whose event set had to be split into components.
    pub decomposed: usize,
    /// Total probability of faults that flip a logical without firing any detector.
    pub undetectable: f64,
    labels: Vec<(usize, usize)>,
    pub(crate) table: Option<DistanceTable>,
}

#[derive(Default)]
struct EdgeAcc {
    p: f64,
    best: f64,
    obs: u8,
    conflict: bool,
    provenance: Vec<FaultRef>,
}

/// Symmetric difference of two sorted lists.
fn xor_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

struct Builder {
    n: u32,
    acc: BTreeMap<(u32, u32), EdgeAcc>,
    undetectable: f64,
    decomposed: usize,
}

impl Builder {
    fn add(&mut self, dets: &[u32], obs: u8, p: f64, r: FaultRef) {
        let key = match *dets {
            [] => {
                if obs != 0 {
                    self.undetectable += p;
                }
                return;
            }
            [a] => (a, self.n),
            [a, b] => (a.min(b), a.max(b)),
            _ => unreachable!("caller splits hyperedges"),
        };
        let e = self.acc.entry(key).or_default();
        if e.provenance.is_empty() {
            e.obs = obs;
            e.best = p;
        } else if e.obs != obs {
            e.conflict = true;
            if p > e.best {
                e.obs = obs;
                e.best = p;
            }
        } else if p > e.best {
            e.best = p;
        }
        e.p += p;
        e.provenance.push(r);
    }

    /// Add a fault given per-component effects; split into X and Z parts, then into
    /// single-qubit letters, when the whole touches more than two detectors.
    fn add_split(&mut self, parts: &[(Pauli, Vec<u32>, u8)], p: f64, r: FaultRef) -> Result<(), GraphError> {
        let fold = |pred: &dyn Fn(Pauli) -> bool| {
            parts.iter().filter(|c| pred(c.0)).fold((Vec::new(), 0u8), |(d, o), c| (xor_sorted(&d, &c.1), o ^ c.2))
        };
        let (all, obs) = fold(&|_| true);
        if all.len() <= 2 {
            self.add(&all, obs, p, r);
            return Ok(());
        }
        self.decomposed += 1;
        let xs = fold(&|l| l == Pauli::X);
        let zs = fold(&|l| l == Pauli::Z);
        if xs.0.len() <= 2 && zs.0.len() <= 2 {
            self.add(&xs.0, xs.1, p, r);
            self.add(&zs.0, zs.1, p, r);
            return Ok(());
        }
        for c in parts {
            if c.1.len() > 2 {
                return Err(GraphError::HyperEdge {
                    timestep: r.timestep as usize,
                    index: r.index as usize,
                    fault: r.fault,
                    events: c.1.len(),
                });
            }
            self.add(&c.1, c.2, p, r);
        }
        Ok(())
    }
}

/// Enumerate every fault of the program, propagate it and merge faults by event pair.
///
/// Stage-I faults are taken with the rotation untwirled, and those that Stage I
/// itself would reject are left out since they never reach the decoder.
pub fn build_detector_graph(model: &CircuitModel) -> Result<DetectorGraph, GraphError> {
    let n = model.num_detectors() as u32;
    let mut b = Builder { n, acc: BTreeMap::new(), undetectable: 0.0, decomposed: 0 };

    for (t, i, kind) in model.stage1_locations() {
        let ch = model.channel(kind);
        for &(fault, p) in &ch.entries {
            let r = FaultRef { timestep: t as u32, index: i as u32, kind, fault };
            let Some((dets, obs)) = model.stage1_fault_effect(t, i, fault) else { continue };
            if dets.len() <= 2 {
                b.add(&dets, obs, p, r);
                continue;
            }
            let Fault::Pauli(tuple) = fault else { unreachable!("a flip fires at most two detectors") };
            let mut parts = Vec::new();
            for (j, &l) in tuple.iter().enumerate().take(kind.arity()) {
                for single in [Pauli::X, Pauli::Z] {
                    if l.bits() & single.bits() != 0 {
                        let mut t1 = [Pauli::I; 3];
                        t1[j] = single;
                        if let Some((d, o)) = model.stage1_fault_effect(t, i, Fault::Pauli(t1)) {
                            parts.push((single, d, o));
                        }
                    }
                }
            }
            b.add_split(&parts, p, r)?;
        }
    }

    for loc in &model.locations {
        if loc.noiseless {
            continue;
        }
        let ch = model.channel(loc.kind);
        let comp = |j: usize, letter: Pauli| -> (Vec<u32>, u8) {
            let k = loc.comp + 2 * j as u32 + u32::from(letter == Pauli::Z);
            let (d, o) = model.effects.get(k);
            (d.to_vec(), o)
        };
        for &(fault, p) in &ch.entries {
            let r = FaultRef { timestep: loc.timestep as u32, index: loc.index as u32, kind: loc.kind, fault };
            match fault {
                Fault::MeasFlip => {
                    let (d, o) = model.effects.get(loc.comp);
                    b.add_split(&[(Pauli::I, d.to_vec(), o)], p, r)?;
                }
                Fault::Pauli(t) => {
                    let mut parts = Vec::new();
                    for (j, &l) in t.iter().enumerate().take(loc.arity as usize) {
                        if l.has_x() {
                            let (d, o) = comp(j, Pauli::X);
                            parts.push((Pauli::X, d, o));
                        }
                        if l.has_z() {
                            let (d, o) = comp(j, Pauli::Z);
                            parts.push((Pauli::Z, d, o));
                        }
                    }
                    b.add_split(&parts, p, r)?;
                }
            }
        }
    }

    let mut edges = Vec::with_capacity(b.acc.len());
    let mut conflicts = 0;
    for ((u, v), e) in b.acc {
        conflicts += usize::from(e.conflict);
        edges.push(Edge { u, v, probability: e.p, weight: weight_of(e.p), obs: e.obs, provenance: e.provenance });
    }
    let labels = (0..n).map(|d| model.detector_label(d)).collect();
    let mut g = DetectorGraph::from_edges(n as usize, edges, labels);
    g.annotation_conflicts = conflicts;
    g.decomposed = b.decomposed;
    g.undetectable = b.undetectable;
    Ok(g)
}

/// `-ln p` in fixed point, clamped at zero.
pub fn weight_of(p: f64) -> i64 {
    if p <= 0.0 {
        return i64::MAX / 4;
    }
    ((-p.ln()).max(0.0) * WEIGHT_SCALE).round() as i64
}

impl DetectorGraph {
    /// Graph over `num_nodes` detectors plus the boundary node `num_nodes`.
    pub fn from_edges(num_nodes: usize, edges: Vec<Edge>, labels: Vec<(usize, usize)>) -> Self {
        let nb = num_nodes + 1;
        let mut deg = vec![0u32; nb + 1];
        for e in &edges {
            deg[e.u as usize + 1] += 1;
            deg[e.v as usize + 1] += 1;
        }
        for i in 0..nb {
            deg[i + 1] += deg[i];
        }
        let mut fill = deg.clone();
        let mut adj = vec![(0u32, 0i64, 0u8); 2 * edges.len()];
        for e in &edges {
            adj[fill[e.u as usize] as usize] = (e.v, e.weight, e.obs);
            fill[e.u as usize] += 1;
            adj[fill[e.v as usize] as usize] = (e.u, e.weight, e.obs);
            fill[e.v as usize] += 1;
        }
        let mut g = DetectorGraph {
            num_nodes,
            edges,
            adj_off: deg,
            adj,
            boundary_dist: Vec::new(),
            boundary_obs: Vec::new(),
            annotation_conflicts: 0,
            decomposed: 0,
            undetectable: 0.0,
            labels,
            table: None,
        };
        let (d, o) = g.dijkstra_all(num_nodes as u32);
        g.boundary_dist = d[..num_nodes].to_vec();
        g.boundary_obs = o[..num_nodes].to_vec();
        g.table = DistanceTable::build(&g);
        g
    }

    pub fn boundary(&self) -> u32 {
        self.num_nodes as u32
    }

    #[inline]
    pub(crate) fn neighbours(&self, u: u32) -> &[(u32, i64, u8)] {
        &self.adj[self.adj_off[u as usize] as usize..self.adj_off[u as usize + 1] as usize]
    }

    /// Full single-source shortest paths, with the path's logical parity.
    pub fn dijkstra_all(&self, src: u32) -> (Vec<i64>, Vec<u8>) {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let nb = self.num_nodes + 1;
        let mut dist = vec![i64::MAX; nb];
        let mut obs = vec![0u8; nb];
        let mut heap = BinaryHeap::new();
        dist[src as usize] = 0;
        heap.push(Reverse((0i64, src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            for &(v, w, o) in self.neighbours(u) {
                let nd = d + w;
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    obs[v as usize] = obs[u as usize] ^ o;
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        (dist, obs)
    }

    /// Deterministic edge list: endpoints, probability, weight and annotation.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "graph nodes {} edges {} conflicts {} decomposed {}",
            self.num_nodes,
            self.edges.len(),
            self.annotation_conflicts,
            self.decomposed
        );
        let name = |v: u32| -> String {
            if v as usize == self.num_nodes {
                "B".into()
            } else {
                let (st, r) = self.labels.get(v as usize).copied().unwrap_or((0, 0));
                format!("d{v}(s{st},r{r})")
            }
        };
        for e in &self.edges {
            let _ = writeln!(s, "{} {} p {:.11e} w {:.11e} obs {}", name(e.u), name(e.v), e.probability, -e.probability.ln(), e.obs);
        }
        s
    }

    /// Edge joining `u` and `v`, if any.
    pub fn edge_between(&self, u: u32, v: u32) -> Option<&Edge> {
        let (a, b) = (u.min(v), u.max(v));
        self.edges.iter().find(|e| e.u == a && e.v == b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{ModelKind, NoiseModel};
    use crate::pauli::Pauli;
    use crate::protocol::{build_memory, build_stage1, build_stage2, Location, PatternChoice, SchemeVariant};
    use crate::sim::CircuitModel;

    fn memory_model(p: f64) -> CircuitModel {
        CircuitModel::new(build_memory(3, 3, 3).unwrap(), NoiseModel::new(ModelKind::B, p, 100.0).unwrap()).unwrap()
    }

    #[test]
    fn zero_noise_has_no_edges() {
        let g = build_detector_graph(&memory_model(0.0)).unwrap();
        assert!(g.edges.is_empty());
        assert!(g.boundary_dist.iter().all(|&d| d == i64::MAX));
    }

    #[test]
    fn mid_memory_data_dephasing_is_space_like() {
        let m = memory_model(1e-3);
        let l = m
            .locations
            .iter()
            .find(|l| l.round == 2 && l.kind == LocationKind::IdleMeas && (l.qubits[0] as usize) == 6)
            .unwrap();
        let id = m.location_id(l.timestep, l.index).unwrap();
        let (dets, _) = m.fault_effect(id, Fault::Pauli([Pauli::Z, Pauli::I, Pauli::I]));
        assert_eq!(dets.len(), 2);
        let rounds: Vec<usize> = dets.iter().map(|&d| m.detector_label(d).1).collect();
        assert_eq!(rounds[0], rounds[1]);
    }

    #[test]
    fn measurement_flip_is_time_like() {
        let m = memory_model(1e-3);
        for (id, l) in m.locations.iter().enumerate().filter(|(_, l)| l.kind == LocationKind::MeasX && l.round == 2) {
            let (dets, obs) = m.fault_effect(id, Fault::MeasFlip);
            assert_eq!(obs, 0);
            let labels: Vec<(usize, usize)> = dets.iter().map(|&d| m.detector_label(d)).collect();
            let Location::MeasX { ancilla, .. } = m.program.timesteps[l.timestep].locations[l.index] else { unreachable!() };
            let s = ancilla - m.program.layout.num_data();
            assert_eq!(labels, vec![(s, 2), (s, 3)]);
        }
    }

    #[test]
    fn edges_are_well_formed() {
        let s1 = build_stage1(SchemeVariant::TwoQubitZz, 1, 3, std::f64::consts::FRAC_PI_8).unwrap();
        let prog = build_stage2(&s1, 3, 7, 3, PatternChoice::Default).unwrap();
        let m = CircuitModel::new(prog, NoiseModel::new(ModelKind::A, 1e-3, 1e4).unwrap()).unwrap();
        let g = build_detector_graph(&m).unwrap();
        assert!(!g.edges.is_empty());
        for e in &g.edges {
            assert!(e.u < e.v && e.v as usize <= g.num_nodes);
            assert!(e.probability > 0.0 && e.weight >= 0 && e.weight < i64::MAX / 4);
            assert!(!e.provenance.is_empty());
            assert_eq!(e.weight, weight_of(e.probability));
        }
        let mut pairs: Vec<(u32, u32)> = g.edges.iter().map(|e| (e.u, e.v)).collect();
        pairs.sort_unstable();
        pairs.dedup();
        assert_eq!(pairs.len(), g.edges.len());
        assert!(g.boundary_dist.iter().all(|&d| d < i64::MAX));
    }

    #[test]
    fn dump_lists_every_edge() {
        let g = build_detector_graph(&memory_model(1e-3)).unwrap();
        let text = g.dump();
        assert_eq!(text.lines().count(), g.edges.len() + 1);
        assert!(text.lines().skip(1).any(|l| l.contains(" B ")));
    }

    #[test]
    fn weights_follow_log_probability() {
        assert_eq!(weight_of(1.0), 0);
        assert_eq!(weight_of((-2.0f64).exp()), 2_000_000);
        assert!(weight_of(1e-3) > weight_of(1e-2));
    }
}
