//! Nominal problems `min { c·x : x ∈ X }` and the cardinality facts the
//! approximation guarantees need.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::model::BinarySolution;

/// Directed multigraph whose edges are the items `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathNetwork {
    edges: Vec<(usize, usize)>,
    num_nodes: usize,
    source: usize,
    sink: usize,
    out_edges: Vec<Vec<usize>>,
}

impl PathNetwork {
    /// `edges[e] = (from, to)`. Nodes are `0..=max id`.
    pub fn new(edges: Vec<(usize, usize)>, source: usize, sink: usize) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidProblem("graph has no edges".into()));
        }
        if source == sink {
            return Err(Error::InvalidProblem("source and sink coincide".into()));
        }
        let num_nodes = edges
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .chain([source, sink])
            .max()
            .unwrap()
            + 1;
        let mut out_edges = vec![Vec::new(); num_nodes];
        for (e, &(a, _)) in edges.iter().enumerate() {
            out_edges[a].push(e);
        }
        let net = Self {
            edges,
            num_nodes,
            source,
            sink,
            out_edges,
        };
        if net.min_hops().is_none() {
            return Err(Error::NoPath);
        }
        Ok(net)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub(crate) fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    fn min_hops(&self) -> Option<usize> {
        let mut dist = vec![usize::MAX; self.num_nodes];
        let mut queue = VecDeque::from([self.source]);
        dist[self.source] = 0;
        while let Some(v) = queue.pop_front() {
            if v == self.sink {
                return Some(dist[v]);
            }
            for &e in &self.out_edges[v] {
                let w = self.edges[e].1;
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Nodes lying on at least one source-sink walk.
    fn relevant_nodes(&self) -> Vec<bool> {
        let reach = |start: usize, forward: bool| {
            let mut seen = vec![false; self.num_nodes];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &(a, b) in &self.edges {
                    let (from, to) = if forward { (a, b) } else { (b, a) };
                    if from == v && !seen[to] {
                        seen[to] = true;
                        stack.push(to);
                    }
                }
            }
            seen
        };
        let fwd = reach(self.source, true);
        let bwd = reach(self.sink, false);
        fwd.iter().zip(&bwd).map(|(&a, &b)| a && b).collect()
    }

    /// Longest source-sink path in hops, or `None` when the relevant
    /// subgraph has a cycle.
    fn longest_hops_if_acyclic(&self) -> Option<usize> {
        let relevant = self.relevant_nodes();
        let rel_edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .copied()
            .filter(|&(a, b)| relevant[a] && relevant[b])
            .collect();
        let mut indeg = vec![0usize; self.num_nodes];
        for &(_, b) in &rel_edges {
            indeg[b] += 1;
        }
        let mut order = Vec::new();
        let mut queue: VecDeque<usize> = (0..self.num_nodes).filter(|&v| relevant[v] && indeg[v] == 0).collect();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(a, b) in &rel_edges {
                if a == v {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        queue.push_back(b);
                    }
                }
            }
        }
        if order.len() != relevant.iter().filter(|&&r| r).count() {
            return None;
        }
        let mut longest = vec![None::<usize>; self.num_nodes];
        longest[self.source] = Some(0);
        for &v in &order {
            if let Some(d) = longest[v] {
                for &(a, b) in &rel_edges {
                    if a == v {
                        longest[b] = Some(longest[b].map_or(d + 1, |x| x.max(d + 1)));
                    }
                }
            }
        }
        longest[self.sink]
    }

    /// Label-setting shortest path. Ties prefer the smaller predecessor
    /// node, then the smaller edge index.
    fn shortest_path(&self, c: &[f64]) -> Result<Vec<usize>> {
        #[derive(PartialEq)]
        struct Key(f64);
        impl Eq for Key {}
        impl PartialOrd for Key {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Key {
            fn cmp(&self, other: &Self) -> Ordering {
                self.0.total_cmp(&other.0)
            }
        }

        let mut dist = vec![f64::INFINITY; self.num_nodes];
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; self.num_nodes];
        let mut done = vec![false; self.num_nodes];
        let mut heap = BinaryHeap::new();
        dist[self.source] = 0.0;
        heap.push(Reverse((Key(0.0), self.source)));
        while let Some(Reverse((Key(d), v))) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            for &e in &self.out_edges[v] {
                let w = self.edges[e].1;
                if done[w] {
                    continue;
                }
                let nd = d + c[e];
                if nd < dist[w] {
                    dist[w] = nd;
                    pred[w] = Some((v, e));
                    heap.push(Reverse((Key(nd), w)));
                } else if nd == dist[w] && pred[w].is_none_or(|p| (v, e) < p) {
                    pred[w] = Some((v, e));
                }
            }
        }
        if !dist[self.sink].is_finite() {
            return Err(Error::NoPath);
        }
        let mut path = Vec::new();
        let mut v = self.sink;
        while v != self.source {
            let (u, e) = pred[v].ok_or(Error::NoPath)?;
            path.push(e);
            v = u;
        }
        path.sort_unstable();
        Ok(path)
    }

    /// Whether `edges` (any order) is exactly a simple source-sink path.
    fn is_path(&self, edges: &[usize]) -> bool {
        if edges.is_empty() || edges.iter().any(|&e| e >= self.edges.len()) {
            return false;
        }
        let mut next = vec![None; self.num_nodes];
        for &e in edges {
            let (a, b) = self.edges[e];
            if next[a].is_some() {
                return false;
            }
            next[a] = Some(b);
        }
        let mut visited = vec![false; self.num_nodes];
        let mut v = self.source;
        let mut steps = 0;
        visited[v] = true;
        while v != self.sink {
            match next[v] {
                Some(w) if !visited[w] => {
                    visited[w] = true;
                    v = w;
                    steps += 1;
                }
                _ => return false,
            }
        }
        steps == edges.len()
    }
}

/// The nominal feasible set `X`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// Choose exactly `p` of `n` items.
    Selection { n: usize, p: usize },
    /// Source-sink paths; item `e` is edge `e`.
    ShortestPath(PathNetwork),
}

impl ProblemSpec {
    pub fn selection(n: usize, p: usize) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::InvalidProblem(format!(
                "selection needs 1 <= p <= n, got n = {n}, p = {p}"
            )));
        }
        Ok(Self::Selection { n, p })
    }

    pub fn shortest_path(edges: Vec<(usize, usize)>, source: usize, sink: usize) -> Result<Self> {
        PathNetwork::new(edges, source, sink).map(Self::ShortestPath)
    }

    /// Number of items `n`.
    pub fn dimension(&self) -> usize {
        match self {
            ProblemSpec::Selection { n, .. } => *n,
            ProblemSpec::ShortestPath(g) => g.edges.len(),
        }
    }

    pub fn is_feasible(&self, x: &BinarySolution) -> bool {
        match self {
            ProblemSpec::Selection { n, p } => x.len() == *p && x.selected().iter().all(|&j| j < *n),
            ProblemSpec::ShortestPath(g) => g.is_path(x.selected()),
        }
    }
}

/// A minimizer `x(c)` of the nominal problem.
///
/// Selection takes the `p` cheapest items, ties broken by lower index.
pub fn nominal_solve(spec: &ProblemSpec, c: &[f64]) -> Result<BinarySolution> {
    if c.len() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            found: c.len(),
        });
    }
    if let Some(&v) = c.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidCost { value: v });
    }
    match spec {
        ProblemSpec::Selection { p, .. } => Ok(BinarySolution::from_sorted(cheapest(c, *p))),
        ProblemSpec::ShortestPath(g) => g.shortest_path(c).map(BinarySolution::from_sorted),
    }
}

/// Indices of the `p` smallest values, ordered by (value, index), returned sorted.
pub(crate) fn cheapest(c: &[f64], p: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..c.len()).collect();
    let by_cost = |a: &usize, b: &usize| c[*a].total_cmp(&c[*b]).then(a.cmp(b));
    if p < idx.len() {
        idx.select_nth_unstable_by(p, by_cost);
        idx.truncate(p);
    }
    idx.sort_unstable();
    idx
}

/// Largest `k` with `k <= Σ xⱼ` for every feasible `x`.
pub fn min_solution_cardinality(spec: &ProblemSpec) -> usize {
    match spec {
        ProblemSpec::Selection { p, .. } => *p,
        ProblemSpec::ShortestPath(g) => g.min_hops().expect("network validated at construction"),
    }
}

/// An upper bound on `|X| = max Σ xⱼ`; exact for selection and for
/// acyclic networks, `n` otherwise.
pub fn max_solution_cardinality_bound(spec: &ProblemSpec) -> usize {
    match spec {
        ProblemSpec::Selection { p, .. } => *p,
        ProblemSpec::ShortestPath(g) => g.longest_hops_if_acyclic().unwrap_or(g.edges.len()),
    }
}

pub fn validate_k(spec: &ProblemSpec, k: usize) -> bool {
    k >= 1 && k <= min_solution_cardinality(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_min(c: &[f64], p: usize) -> f64 {
        let n = c.len();
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == p)
            .map(|m| (0..n).filter(|j| m >> j & 1 == 1).map(|j| c[j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn selection_small_example_scenarios() {
        let spec = ProblemSpec::selection(4, 2).unwrap();
        let mid = [11.0 / 3.0, 5.0, 13.0 / 3.0, 16.0 / 3.0];
        assert_eq!(nominal_solve(&spec, &mid).unwrap().selected(), &[0, 2]);
        let lp1 = [3.75, 6.88, 6.75, 5.50];
        assert_eq!(nominal_solve(&spec, &lp1).unwrap().selected(), &[0, 3]);
        let wc = [5.0, 8.0, 9.0, 7.0];
        let x = nominal_solve(&spec, &wc).unwrap();
        assert_eq!(x.selected(), &[0, 3]);
        assert_eq!(x.cost(&wc), 12.0);
    }

    #[test]
    fn selection_forced_and_ties() {
        let spec = ProblemSpec::selection(3, 3).unwrap();
        assert_eq!(nominal_solve(&spec, &[9.0, 1.0, 4.0]).unwrap().selected(), &[0, 1, 2]);
        let spec = ProblemSpec::selection(4, 2).unwrap();
        assert_eq!(nominal_solve(&spec, &[1.0; 4]).unwrap().selected(), &[0, 1]);
        assert_eq!(nominal_solve(&spec, &[2.0, 1.0, 1.0, 1.0]).unwrap().selected(), &[1, 2]);
    }

    #[test]
    fn selection_spec_validation() {
        assert!(ProblemSpec::selection(4, 0).is_err());
        assert!(ProblemSpec::selection(4, 5).is_err());
        let spec = ProblemSpec::selection(4, 2).unwrap();
        assert!(nominal_solve(&spec, &[1.0; 3]).is_err());
        assert!(nominal_solve(&spec, &[1.0, -1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn cardinalities_and_k() {
        let s = ProblemSpec::selection(30, 9).unwrap();
        assert_eq!(min_solution_cardinality(&s), 9);
        let s = ProblemSpec::selection(4, 2).unwrap();
        assert_eq!(min_solution_cardinality(&s), 2);
        assert!(validate_k(&s, 2));
        assert!(!validate_k(&s, 3));
        assert!(!validate_k(&s, 0));
        let s = ProblemSpec::selection(10, 3).unwrap();
        assert_eq!(max_solution_cardinality_bound(&s), 3);
        assert!(validate_k(&s, 1));
    }

    #[test]
    fn single_edge_network() {
        let g = ProblemSpec::shortest_path(vec![(0, 1)], 0, 1).unwrap();
        assert_eq!(min_solution_cardinality(&g), 1);
        assert_eq!(max_solution_cardinality_bound(&g), 1);
        assert_eq!(nominal_solve(&g, &[3.0]).unwrap().selected(), &[0]);
    }

    #[test]
    fn small_dag_cardinalities() {
        // s=0 -> a=1 -> t=2, plus s -> t
        let g = ProblemSpec::shortest_path(vec![(0, 1), (1, 2), (0, 2)], 0, 2).unwrap();
        assert_eq!(min_solution_cardinality(&g), 1);
        assert_eq!(max_solution_cardinality_bound(&g), 2);
        assert_eq!(nominal_solve(&g, &[1.0, 1.0, 5.0]).unwrap().selected(), &[0, 1]);
        assert_eq!(nominal_solve(&g, &[1.0, 1.0, 1.5]).unwrap().selected(), &[2]);
    }

    #[test]
    fn cyclic_network_falls_back_to_n() {
        // 0 -> 1 -> 2 -> 3, with a cycle 1 <-> 2
        let edges = vec![(0, 1), (1, 2), (2, 1), (2, 3)];
        let g = ProblemSpec::shortest_path(edges, 0, 3).unwrap();
        assert_eq!(max_solution_cardinality_bound(&g), 4);
        assert_eq!(min_solution_cardinality(&g), 3);
    }

    #[test]
    fn network_validation() {
        assert!(matches!(
            ProblemSpec::shortest_path(vec![(0, 1)], 1, 0),
            Err(Error::NoPath)
        ));
        assert!(ProblemSpec::shortest_path(vec![(0, 1)], 0, 0).is_err());
    }

    #[test]
    fn path_feasibility() {
        let g = ProblemSpec::shortest_path(vec![(0, 1), (1, 2), (0, 2), (2, 0)], 0, 2).unwrap();
        let sol = |v: Vec<usize>| BinarySolution::new(v, 4).unwrap();
        assert!(g.is_feasible(&sol(vec![0, 1])));
        assert!(g.is_feasible(&sol(vec![2])));
        assert!(!g.is_feasible(&sol(vec![0])));
        assert!(!g.is_feasible(&sol(vec![0, 1, 2])));
        assert!(!g.is_feasible(&sol(vec![2, 3])));
    }

    #[test]
    fn zero_cost_ties_pick_smaller_predecessor() {
        // two parallel routes to t=3 of equal cost, via 1 or via 2
        let g = ProblemSpec::shortest_path(vec![(0, 2), (0, 1), (2, 3), (1, 3)], 0, 3).unwrap();
        let x = nominal_solve(&g, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(x.selected(), &[1, 3]);
        assert!(g.is_feasible(&x));
    }

    proptest! {
        #[test]
        fn selection_matches_brute_force(
            c in prop::collection::vec(0u32..=100, 1..=12),
            p_frac in 0.0f64..1.0,
        ) {
            let c: Vec<f64> = c.into_iter().map(f64::from).collect();
            let n = c.len();
            let p = 1 + ((n - 1) as f64 * p_frac) as usize;
            let spec = ProblemSpec::selection(n, p).unwrap();
            let x = nominal_solve(&spec, &c).unwrap();
            prop_assert!(spec.is_feasible(&x));
            prop_assert_eq!(x.cost(&c), brute_min(&c, p));
        }

        #[test]
        fn selection_argmin_is_scale_invariant(
            c in prop::collection::vec(0u32..=100, 2..=12),
            scale in 0.01f64..100.0,
        ) {
            let c: Vec<f64> = c.into_iter().map(f64::from).collect();
            let spec = ProblemSpec::selection(c.len(), c.len() / 2 + 1).unwrap();
            let scaled: Vec<f64> = c.iter().map(|v| v * scale).collect();
            prop_assert_eq!(nominal_solve(&spec, &c).unwrap(), nominal_solve(&spec, &scaled).unwrap());
        }

        #[test]
        fn path_solution_is_feasible_and_cardinalities_ordered(
            extra in prop::collection::vec((0usize..6, 0usize..6), 0..10),
            costs in prop::collection::vec(0u32..=20, 16),
        ) {
            let mut edges = vec![(0, 1), (1, 5)];
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            let spec = ProblemSpec::shortest_path(edges, 0, 5).unwrap();
            let c: Vec<f64> = costs[..spec.dimension()].iter().map(|&v| f64::from(v)).collect();
            let x = nominal_solve(&spec, &c).unwrap();
            prop_assert!(spec.is_feasible(&x));
            prop_assert!(min_solution_cardinality(&spec) <= max_solution_cardinality_bound(&spec));
            prop_assert!(x.len() <= max_solution_cardinality_bound(&spec));
        }
    }
}
