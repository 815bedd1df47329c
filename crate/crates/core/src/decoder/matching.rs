//! Exact minimum-weight matching of flagged detectors, each node pairing with another
//! flagged node or with the boundary.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use super::blossom::max_weight_matching;
use super::graph::DetectorGraph;

/// Components up to this many nodes are solved by dynamic programming over subsets.
pub const SUBSET_DP_LIMIT: usize = 12;

const INF: i64 = i64::MAX / 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("flagged node {0} has no partner and no path to the boundary")]
    Infeasible(u32),
    #[error("node {0} is not a detector of the graph")]
    UnknownNode(u32),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatchResult {
    /// Matched pairs; `None` pairs the node with the boundary.
    pub pairs: Vec<(u32, Option<u32>)>,
    pub obs: u8,
    pub weight: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    /// Subset DP for small components, blossom above.
    Auto,
    SubsetDp,
    Blossom,
}

/// Costs of a boundary matching instance on `n` nodes.
#[derive(Clone, Debug)]
pub struct MatchingProblem {
    pub n: usize,
    /// Row-major `n × n`; `None` when the pair is not allowed.
    pub pair: Vec<Option<i64>>,
    pub boundary: Vec<Option<i64>>,
}

impl MatchingProblem {
    pub fn new(n: usize) -> Self {
        Self { n, pair: vec![None; n * n], boundary: vec![None; n] }
    }

    pub fn set_pair(&mut self, a: usize, b: usize, w: i64) {
        self.pair[a * self.n + b] = Some(w);
        self.pair[b * self.n + a] = Some(w);
    }

    #[inline]
    pub fn cost(&self, a: usize, b: usize) -> Option<i64> {
        self.pair[a * self.n + b]
    }

    /// Minimum-cost assignment; each entry is the partner or `None` for the boundary.
    pub fn solve(&self, solver: Solver) -> Result<(Vec<Option<usize>>, i64), usize> {
        match solver {
            Solver::SubsetDp => self.solve_dp(),
            Solver::Blossom => self.solve_blossom(),
            Solver::Auto if self.n <= SUBSET_DP_LIMIT => self.solve_dp(),
            Solver::Auto => self.solve_blossom(),
        }
    }

    fn solve_dp(&self) -> Result<(Vec<Option<usize>>, i64), usize> {
        let n = self.n;
        assert!(n <= 20, "subset DP on {n} nodes");
        let full = (1usize << n) - 1;
        let mut f = vec![INF; full + 1];
        let mut choice = vec![usize::MAX; full + 1];
        f[0] = 0;
        for mask in 1..=full {
            let i = mask.trailing_zeros() as usize;
            let rest = mask & !(1 << i);
            if let Some(b) = self.boundary[i] {
                if f[rest] < INF && f[rest] + b < f[mask] {
                    f[mask] = f[rest] + b;
                    choice[mask] = i;
                }
            }
            let mut m = rest;
            while m != 0 {
                let j = m.trailing_zeros() as usize;
                m &= m - 1;
                if let Some(c) = self.cost(i, j) {
                    let r = rest & !(1 << j);
                    if f[r] < INF && f[r] + c < f[mask] {
                        f[mask] = f[r] + c;
                        choice[mask] = j;
                    }
                }
            }
        }
        if f[full] >= INF {
            return Err(self.first_isolated());
        }
        let mut mate = vec![None; n];
        let mut mask = full;
        while mask != 0 {
            let i = mask.trailing_zeros() as usize;
            let j = choice[mask];
            if j == i {
                mask &= !(1 << i);
            } else {
                mate[i] = Some(j);
                mate[j] = Some(i);
                mask &= !(1 << i) & !(1 << j);
            }
        }
        Ok((mate, f[full]))
    }

    fn solve_blossom(&self) -> Result<(Vec<Option<usize>>, i64), usize> {
        let n = self.n;
        let mut wmax = 0;
        for a in 0..n {
            if let Some(b) = self.boundary[a] {
                wmax = wmax.max(b);
            }
            for c in (a + 1..n).filter_map(|c| self.cost(a, c)) {
                wmax = wmax.max(c);
            }
        }
        let big = wmax + 1;
        let mut edges = Vec::new();
        for a in 0..n {
            if let Some(b) = self.boundary[a] {
                edges.push((a, n + a, big - b));
            }
            for c in a + 1..n {
                if let Some(w) = self.cost(a, c) {
                    edges.push((a, c, big - w));
                    edges.push((n + a, n + c, big));
                }
            }
        }
        let mate = max_weight_matching(&edges, true);
        let mut out = vec![None; n];
        let mut total = 0;
        for a in 0..n {
            match mate.get(a).copied().flatten() {
                Some(m) if m == n + a => total += self.boundary[a].expect("boundary edge"),
                Some(m) if m < n => {
                    out[a] = Some(m);
                    if a < m {
                        total += self.cost(a, m).expect("pair edge");
                    }
                }
                _ => return Err(a),
            }
        }
        Ok((out, total))
    }

    fn first_isolated(&self) -> usize {
        (0..self.n)
            .find(|&a| self.boundary[a].is_none() && (0..self.n).all(|b| self.cost(a, b).is_none()))
            .unwrap_or(0)
    }

    /// Exhaustive optimum, used as an oracle.
    pub fn brute_force(&self) -> Option<i64> {
        fn rec(p: &MatchingProblem, used: &mut Vec<bool>, acc: i64, best: &mut Option<i64>) {
            let Some(i) = used.iter().position(|u| !u) else {
                if best.is_none_or(|b| acc < b) {
                    *best = Some(acc);
                }
                return;
            };
            used[i] = true;
            if let Some(b) = p.boundary[i] {
                rec(p, used, acc + b, best);
            }
            for j in i + 1..p.n {
                if !used[j] {
                    if let Some(c) = p.cost(i, j) {
                        used[j] = true;
                        rec(p, used, acc + c, best);
                        used[j] = false;
                    }
                }
            }
            used[i] = false;
        }
        let mut best = None;
        rec(self, &mut vec![false; self.n], 0, &mut best);
        best
    }
}

/// Largest node count whose all-pairs table is precomputed.
pub const TABLE_NODE_LIMIT: usize = 8192;

/// All-pairs distances avoiding the boundary, with each path's logical parity.
#[derive(Clone, Debug)]
pub(crate) struct DistanceTable {
    n: usize,
    /// `u32::MAX` for pairs that are unreachable or too far to ever be matched.
    dist: Vec<u32>,
    obs: Vec<u8>,
}

impl DistanceTable {
    /// Built only when a pair worth matching is always shorter than `u32::MAX`.
    pub(crate) fn build(g: &DetectorGraph) -> Option<Self> {
        use rayon::prelude::*;
        let n = g.num_nodes;
        if n == 0 || n > TABLE_NODE_LIMIT {
            return None;
        }
        let max_b = g.boundary_dist.iter().copied().filter(|&d| d < INF).max().unwrap_or(0);
        if max_b >= i64::from(u32::MAX / 2) {
            return None;
        }
        let rows: Vec<(Vec<u32>, Vec<u8>)> = (0..n as u32)
            .into_par_iter()
            .map(|src| {
                let (d, o) = g.dijkstra_avoiding_boundary(src);
                (d[..n].iter().map(|&x| u32::try_from(x).unwrap_or(u32::MAX)).collect(), o[..n].to_vec())
            })
            .collect();
        let mut dist = Vec::with_capacity(n * n);
        let mut obs = Vec::with_capacity(n * n);
        for (d, o) in rows {
            dist.extend(d);
            obs.extend(o);
        }
        Some(Self { n, dist, obs })
    }

    #[inline]
    fn get(&self, a: u32, b: u32) -> Option<(i64, u8)> {
        let i = a as usize * self.n + b as usize;
        let d = self.dist[i];
        (d != u32::MAX).then(|| (i64::from(d), self.obs[i]))
    }
}

/// Per-worker buffers for repeated decoding.
#[derive(Clone, Debug, Default)]
pub struct DecoderScratch {
    dist: Vec<i64>,
    obs: Vec<u8>,
    stamp: Vec<u64>,
    slot: Vec<u32>,
    slot_stamp: Vec<u64>,
    gen: u64,
    heap: BinaryHeap<Reverse<(i64, u32)>>,
}

impl DecoderScratch {
    fn prepare(&mut self, nb: usize) {
        if self.dist.len() != nb {
            *self = DecoderScratch {
                dist: vec![0; nb],
                obs: vec![0; nb],
                stamp: vec![0; nb],
                slot: vec![0; nb],
                slot_stamp: vec![0; nb],
                gen: 0,
                heap: BinaryHeap::new(),
            };
        }
    }

    fn bump(&mut self) -> u64 {
        self.gen += 1;
        self.gen
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl DetectorGraph {
    /// Minimum-weight matching of `flagged` (distinct detector ids).
    pub fn decode(&self, flagged: &[u32], scratch: &mut DecoderScratch) -> Result<MatchResult, DecodeError> {
        self.decode_with(flagged, scratch, Solver::Auto)
    }

    pub fn decode_with(&self, flagged: &[u32], scratch: &mut DecoderScratch, solver: Solver) -> Result<MatchResult, DecodeError> {
        let k = flagged.len();
        if k == 0 {
            return Ok(MatchResult::default());
        }
        if let Some(&bad) = flagged.iter().find(|&&f| f as usize >= self.num_nodes) {
            return Err(DecodeError::UnknownNode(bad));
        }
        let pairs = self.candidate_pairs(flagged, scratch);

        let mut uf = UnionFind((0..k).collect());
        for &(a, b, _, _) in &pairs {
            uf.union(a, b);
        }
        let mut comp_of = vec![usize::MAX; k];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut local = vec![0usize; k];
        for a in 0..k {
            let r = uf.find(a);
            if comp_of[r] == usize::MAX {
                comp_of[r] = comps.len();
                comps.push(Vec::new());
            }
            local[a] = comps[comp_of[r]].len();
            comps[comp_of[r]].push(a);
        }
        let mut per_comp: Vec<Vec<(usize, usize, i64)>> = vec![Vec::new(); comps.len()];
        let mut pair_obs = std::collections::HashMap::new();
        for &(a, b, w, o) in &pairs {
            per_comp[comp_of[uf.find(a)]].push((local[a], local[b], w));
            pair_obs.insert((a, b), o);
        }

        let mut result = MatchResult::default();
        for (c, nodes) in comps.iter().enumerate() {
            let mut prob = MatchingProblem::new(nodes.len());
            for (i, &a) in nodes.iter().enumerate() {
                let d = self.boundary_dist[flagged[a] as usize];
                if d < INF {
                    prob.boundary[i] = Some(d);
                }
            }
            for &(i, j, w) in &per_comp[c] {
                prob.set_pair(i, j, w);
            }
            let (mate, w) = prob.solve(solver).map_err(|i| DecodeError::Infeasible(flagged[nodes[i]]))?;
            result.weight += w;
            for (i, m) in mate.iter().enumerate() {
                let a = nodes[i];
                match m {
                    None => {
                        result.pairs.push((flagged[a], None));
                        result.obs ^= self.boundary_obs[flagged[a] as usize];
                    }
                    Some(j) if i < *j => {
                        let b = nodes[*j];
                        result.pairs.push((flagged[a], Some(flagged[b])));
                        result.obs ^= pair_obs[&(a.min(b), a.max(b))];
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(result)
    }

    /// Pairs worth considering: `d(a, b) < d_B(a) + d_B(b)`, found by Dijkstra searches that
    /// never pass through the boundary and stop once no remaining node can qualify.
    fn candidate_pairs(
        &self,
        flagged: &[u32],
        s: &mut DecoderScratch,
    ) -> Vec<(usize, usize, i64, u8)> {
        if let Some(t) = &self.table {
            return self.candidate_pairs_from_table(t, flagged);
        }
        let nb = self.num_nodes + 1;
        s.prepare(nb);
        let k = flagged.len();
        let bd = |a: usize| self.boundary_dist[flagged[a] as usize].min(INF);
        // Later nodes sorted by boundary distance, largest first, for the stopping rule.
        let slot_gen = s.bump();
        for (a, &f) in flagged.iter().enumerate() {
            s.slot[f as usize] = a as u32;
            s.slot_stamp[f as usize] = slot_gen;
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&a| Reverse(bd(a)));
        let mut pairs = Vec::new();
        let mut found = vec![false; k];
        for a in 0..k {
            let mut remaining = k - a - 1;
            if remaining == 0 {
                break;
            }
            found.iter_mut().for_each(|f| *f = false);
            let mut top = 0;
            let advance = |top: &mut usize, found: &[bool]| {
                while *top < k && (order[*top] <= a || found[order[*top]]) {
                    *top += 1;
                }
            };
            advance(&mut top, &found);
            let gen = s.bump();
            let src = flagged[a];
            s.dist[src as usize] = 0;
            s.obs[src as usize] = 0;
            s.stamp[src as usize] = gen;
            s.heap.clear();
            s.heap.push(Reverse((0, src)));
            let bda = bd(a);
            while let Some(Reverse((d, u))) = s.heap.pop() {
                if s.stamp[u as usize] == gen && d > s.dist[u as usize] {
                    continue;
                }
                if top >= k || d >= bda.saturating_add(bd(order[top])) {
                    break;
                }
                if s.slot_stamp[u as usize] == slot_gen {
                    let b = s.slot[u as usize] as usize;
                    if b > a && !found[b] {
                        found[b] = true;
                        remaining -= 1;
                        if d < bda.saturating_add(bd(b)) {
                            pairs.push((a, b, d, s.obs[u as usize]));
                        }
                        advance(&mut top, &found);
                        if remaining == 0 {
                            break;
                        }
                    }
                }
                for &(v, w, o) in self.neighbours(u) {
                    if v as usize == self.num_nodes {
                        continue;
                    }
                    let nd = d + w;
                    let vi = v as usize;
                    if s.stamp[vi] != gen || nd < s.dist[vi] {
                        s.stamp[vi] = gen;
                        s.dist[vi] = nd;
                        s.obs[vi] = s.obs[u as usize] ^ o;
                        s.heap.push(Reverse((nd, v)));
                    }
                }
            }
        }
        pairs
    }

    fn candidate_pairs_from_table(&self, t: &DistanceTable, flagged: &[u32]) -> Vec<(usize, usize, i64, u8)> {
        let bd = |a: usize| self.boundary_dist[flagged[a] as usize].min(INF);
        let mut pairs = Vec::new();
        for a in 0..flagged.len() {
            for b in a + 1..flagged.len() {
                if let Some((d, o)) = t.get(flagged[a], flagged[b]) {
                    if d < bd(a) + bd(b) {
                        pairs.push((a, b, d, o));
                    }
                }
            }
        }
        pairs
    }

    /// Matching problem over `flagged` with every pair's exact shortest-path distance.
    pub fn full_problem(&self, flagged: &[u32]) -> MatchingProblem {
        let k = flagged.len();
        let mut p = MatchingProblem::new(k);
        for (a, &f) in flagged.iter().enumerate() {
            let d = self.boundary_dist[f as usize];
            if d < INF {
                p.boundary[a] = Some(d);
            }
            let (dist, _) = self.dijkstra_avoiding_boundary(f);
            for (b, &g) in flagged.iter().enumerate().skip(a + 1) {
                if dist[g as usize] < INF {
                    p.set_pair(a, b, dist[g as usize]);
                }
            }
        }
        p
    }

    pub(crate) fn dijkstra_avoiding_boundary(&self, src: u32) -> (Vec<i64>, Vec<u8>) {
        let nb = self.num_nodes + 1;
        let mut dist = vec![INF; nb];
        let mut obs = vec![0u8; nb];
        let mut heap = BinaryHeap::new();
        dist[src as usize] = 0;
        heap.push(Reverse((0i64, src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            for &(v, w, o) in self.neighbours(u) {
                if v as usize == self.num_nodes {
                    continue;
                }
                if d + w < dist[v as usize] {
                    dist[v as usize] = d + w;
                    obs[v as usize] = obs[u as usize] ^ o;
                    heap.push(Reverse((d + w, v)));
                }
            }
        }
        (dist, obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{ModelKind, NoiseModel};
    use crate::protocol::build_memory;
    use crate::sim::Simulator;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arb_problem(max_n: usize) -> impl Strategy<Value = MatchingProblem> {
        (1..=max_n).prop_flat_map(|n| {
            let pairs = proptest::collection::vec(proptest::option::weighted(0.7, 1i64..1000), n * n);
            let bnd = proptest::option::weighted(0.6, 1i64..1500);
            (pairs, proptest::collection::vec(bnd, n)).prop_map(move |(pairs, boundary)| {
                let mut p = MatchingProblem::new(n);
                p.boundary = boundary;
                for a in 0..n {
                    for b in a + 1..n {
                        if let Some(w) = pairs[a * n + b] {
                            p.set_pair(a, b, w);
                        }
                    }
                }
                p
            })
        })
    }

    fn check_assignment(p: &MatchingProblem, mate: &[Option<usize>], total: i64) {
        let mut sum = 0;
        for (a, m) in mate.iter().enumerate() {
            match *m {
                None => sum += p.boundary[a].expect("boundary allowed"),
                Some(b) => {
                    assert_eq!(mate[b], Some(a));
                    if a < b {
                        sum += p.cost(a, b).expect("pair allowed");
                    }
                }
            }
        }
        assert_eq!(sum, total);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn solvers_agree_with_exhaustive_search(p in arb_problem(SUBSET_DP_LIMIT)) {
            let best = p.brute_force();
            for solver in [Solver::SubsetDp, Solver::Blossom, Solver::Auto] {
                match (p.solve(solver), best) {
                    (Ok((mate, w)), Some(b)) => {
                        prop_assert_eq!(w, b);
                        check_assignment(&p, &mate, w);
                    }
                    (Err(_), None) => {}
                    (got, want) => prop_assert!(false, "{solver:?}: {got:?} vs {want:?}"),
                }
            }
        }
    }

    #[test]
    fn empty_syndrome_decodes_to_nothing() {
        let sim = Simulator::new(build_memory(3, 3, 2).unwrap(), NoiseModel::new(ModelKind::B, 1e-3, 10.0).unwrap()).unwrap();
        let mut s = DecoderScratch::default();
        assert_eq!(sim.graph.decode(&[], &mut s).unwrap(), MatchResult::default());
        let n = sim.graph.num_nodes as u32;
        assert_eq!(sim.graph.decode(&[n + 5], &mut s), Err(DecodeError::UnknownNode(n + 5)));
    }

    #[test]
    fn single_edge_is_matched_directly() {
        let sim = Simulator::new(build_memory(3, 3, 2).unwrap(), NoiseModel::new(ModelKind::B, 1e-3, 10.0).unwrap()).unwrap();
        let mut s = DecoderScratch::default();
        let e = sim.graph.edges.iter().find(|e| e.v != sim.graph.boundary()).unwrap();
        let r = sim.graph.decode(&[e.u, e.v], &mut s).unwrap();
        assert!(r.weight <= e.weight);
        if r.pairs == vec![(e.u, Some(e.v))] && r.weight == e.weight {
            assert_eq!(r.obs, e.obs);
        }
    }

    #[test]
    fn pruned_decoding_matches_full_problem() {
        let sim = Simulator::new(build_memory(3, 5, 3).unwrap(), NoiseModel::new(ModelKind::A, 2e-3, 100.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = DecoderScratch::default();
        let n = sim.graph.num_nodes as u32;
        for _ in 0..400 {
            let k = rng.random_range(1..=10);
            let mut f: Vec<u32> = (0..k).map(|_| rng.random_range(0..n)).collect();
            f.sort_unstable();
            f.dedup();
            let r = sim.graph.decode(&f, &mut s).unwrap();
            let best = sim.graph.full_problem(&f).brute_force().unwrap();
            assert_eq!(r.weight, best, "{f:?}");
            let b = sim.graph.decode_with(&f, &mut s, Solver::Blossom).unwrap();
            assert_eq!(b.weight, best);
        }
    }
}
