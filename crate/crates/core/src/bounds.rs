//! Upper and lower bounds on the min-max optimum `OPT`.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, Constraint, LinearProgram, LpStatus};
use crate::model::{
    bound_ratio, BinarySolution, BoundReport, ConvexWeights, Provenance, Scenario, UncertaintySet, EPS_CMP,
};
use crate::problems::{nominal_solve, ProblemSpec};
use crate::scenarios::binomial;

/// Default enumeration budget for [`exact_minmax`].
pub const DEFAULT_EXACT_BUDGET: u64 = 20_000_000;

/// `max_i cⁱ·x`, an upper bound on `OPT` for any feasible `x`.
pub fn upper_bound(u: &UncertaintySet, x: &BinarySolution) -> f64 {
    u.max_cost_of(x.selected())
}

/// Largest deviation between `c` and `Σ λᵢ cⁱ`.
pub fn hull_deviation(u: &UncertaintySet, c: &[f64], lam: &ConvexWeights) -> Result<f64> {
    if lam.lambda().len() != u.num_scenarios() {
        return Err(Error::DimensionMismatch {
            expected: u.num_scenarios(),
            found: lam.lambda().len(),
        });
    }
    if c.len() != u.num_items() {
        return Err(Error::DimensionMismatch {
            expected: u.num_items(),
            found: c.len(),
        });
    }
    Ok(u.combine(lam)
        .iter()
        .zip(c)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `c·x(c)`, valid as a lower bound because `c ∈ conv(U)`.
///
/// Membership is checked through `lam`; scenarios that do not match their
/// weights (such as the element-wise worst case) are refused.
pub fn lower_bound(u: &UncertaintySet, c: &Scenario, lam: &ConvexWeights, x_c: &BinarySolution) -> Result<f64> {
    let deviation = hull_deviation(u, c.values(), lam)?;
    let scale = 1.0 + c.values().iter().copied().fold(0.0, f64::max);
    if deviation > EPS_CMP * scale {
        return Err(Error::NotInHull { deviation });
    }
    Ok(x_c.cost(c.values()))
}

/// Solves the nominal problem for `c` once and reports both bounds.
///
/// `apriori` is the guarantee already known for `c` (from the scenario LP
/// or [`crate::scenarios::fixed_scenario_guarantee`]).
pub fn aposteriori_report(
    u: &UncertaintySet,
    spec: &ProblemSpec,
    c: &Scenario,
    lam: &ConvexWeights,
    apriori: f64,
    k_used: Option<usize>,
) -> Result<BoundReport> {
    let x = nominal_solve(spec, c.values())?;
    let lb = lower_bound(u, c, lam, &x)?;
    let ub = upper_bound(u, &x);
    Ok(BoundReport {
        apriori,
        lb,
        ub,
        aposteriori: bound_ratio(ub, lb),
        scenario_provenance: c.provenance(),
        k_used,
    })
}

/// Result of the max-min problem `max_{c ∈ conv(U)} min_{x ∈ X} c·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxMinBound {
    pub value: f64,
    pub weights: ConvexWeights,
    pub scenario: Scenario,
}

/// Max-min lower bound for selection, via the dual of the nominal LP
/// relaxation `{Σx = p, 0 <= x <= 1}`:
///
/// ```text
/// max p·μ − Σⱼ νⱼ   s.t.  μ − νⱼ <= Σᵢ λᵢ cⁱⱼ,  ν >= 0,  λ ∈ simplex,  μ free
/// ```
pub fn maxmin_lower_bound(u: &UncertaintySet, spec: &ProblemSpec) -> Result<MaxMinBound> {
    let (n, p) = match spec {
        ProblemSpec::Selection { n, p } => (*n, *p),
        ProblemSpec::ShortestPath(_) => {
            return Err(Error::Unsupported(
                "max-min bound is only available for selection".into(),
            ))
        }
    };
    if u.num_items() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.num_items(),
        });
    }
    let big_n = u.num_scenarios();
    // variables: λ (0..N), μ (N), ν (N+1..N+1+n)
    let nv = big_n + 1 + n;
    let mu = big_n;
    let mut lp = LinearProgram::new(nv);
    let mut objective = vec![0.0; nv];
    objective[mu] = p as f64;
    objective[mu + 1..].iter_mut().for_each(|v| *v = -1.0);
    lp.maximize(objective)?;
    lp.set_bounds(mu, f64::NEG_INFINITY, f64::INFINITY)?;
    let mut simplex = vec![0.0; nv];
    simplex[..big_n].iter_mut().for_each(|v| *v = 1.0);
    lp.add_constraint(Constraint::eq(simplex, 1.0))?;
    for j in 0..n {
        let mut row = vec![0.0; nv];
        for (i, c) in u.scenarios().enumerate() {
            row[i] = -c[j];
        }
        row[mu] = 1.0;
        row[mu + 1 + j] = -1.0;
        lp.add_constraint(Constraint::le(row, 0.0))?;
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("max-min LP ended with status {:?}", sol.status)));
    }
    let weights = ConvexWeights::from_lp(&sol.x[..big_n])?;
    let scenario = Scenario::new(u, u.combine(&weights), Provenance::MaxMin)?;
    Ok(MaxMinBound {
        value: sol.objective,
        weights,
        scenario,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactOptions {
    /// Abandon partial solutions whose running maximum exceeds the incumbent.
    pub prune: bool,
    /// Refuse selection instances with more subsets / networks with more paths.
    pub budget: u64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            prune: true,
            budget: DEFAULT_EXACT_BUDGET,
        }
    }
}

/// `OPT` and a lexicographically smallest optimal solution, by enumeration.
pub fn exact_minmax(u: &UncertaintySet, spec: &ProblemSpec) -> Result<(f64, BinarySolution)> {
    exact_minmax_with(u, spec, &ExactOptions::default())
}

pub fn exact_minmax_with(
    u: &UncertaintySet,
    spec: &ProblemSpec,
    options: &ExactOptions,
) -> Result<(f64, BinarySolution)> {
    if u.num_items() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            found: u.num_items(),
        });
    }
    match spec {
        ProblemSpec::Selection { n, p } => {
            let count = binomial(*n, *p);
            if count > options.budget {
                return Err(Error::TooLarge {
                    count,
                    budget: options.budget,
                });
            }
            Ok(exact_selection(u, *p, options.prune))
        }
        ProblemSpec::ShortestPath(_) => exact_paths(u, spec, options),
    }
}

/// Best `(value, solution)` seen, ordered by value then lexicographically.
#[derive(Clone)]
struct Best {
    value: f64,
    items: Vec<usize>,
}

impl Best {
    fn none() -> Self {
        Self {
            value: f64::INFINITY,
            items: Vec::new(),
        }
    }

    fn offer(&mut self, value: f64, items: &[usize]) {
        if value > self.value {
            return;
        }
        let mut sorted = items.to_vec();
        sorted.sort_unstable();
        if value < self.value || (value == self.value && sorted < self.items) {
            self.value = value;
            self.items = sorted;
        }
    }

    fn merge(mut self, other: Best) -> Best {
        self.offer(other.value, &other.items);
        self
    }
}

/// Incumbent shared across workers. Nonnegative floats order like their bits.
struct Incumbent(AtomicU64);

impl Incumbent {
    fn new() -> Self {
        Self(AtomicU64::new(f64::INFINITY.to_bits()))
    }

    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    fn lower_to(&self, v: f64) {
        self.0.fetch_min(v.to_bits(), Ordering::Relaxed);
    }
}

struct SelectionSearch<'a> {
    u: &'a UncertaintySet,
    order: Vec<usize>,
    p: usize,
    prune: bool,
    incumbent: &'a Incumbent,
}

impl SelectionSearch<'_> {
    /// `levels` holds one row of per-scenario partial sums per depth; the
    /// row for `chosen.len()` is current.
    fn dfs(&self, next: usize, chosen: &mut Vec<usize>, levels: &mut [f64], best: &mut Best) {
        let big_n = self.u.num_scenarios();
        let depth = chosen.len();
        let running = levels[depth * big_n..(depth + 1) * big_n]
            .iter()
            .copied()
            .fold(0.0, f64::max);
        if self.prune && running > self.incumbent.get() {
            return;
        }
        if depth == self.p {
            best.offer(running, chosen);
            self.incumbent.lower_to(running);
            return;
        }
        let remaining = self.p - depth;
        for pos in next..=self.order.len() - remaining {
            let item = self.order[pos];
            let (cur, rest) = levels.split_at_mut((depth + 1) * big_n);
            let cur = &cur[depth * big_n..];
            for (i, slot) in rest[..big_n].iter_mut().enumerate() {
                *slot = cur[i] + self.u.scenario(i)[item];
            }
            chosen.push(item);
            self.dfs(pos + 1, chosen, levels, best);
            chosen.pop();
        }
    }
}

fn exact_selection(u: &UncertaintySet, p: usize, prune: bool) -> (f64, BinarySolution) {
    let n = u.num_items();
    let big_n = u.num_scenarios();
    let mid = u.combine(&ConvexWeights::uniform(big_n));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mid[a].total_cmp(&mid[b]).then(a.cmp(&b)));
    let incumbent = Incumbent::new();
    let search = SelectionSearch {
        u,
        order,
        p,
        prune,
        incumbent: &incumbent,
    };

    // Split on the first chosen position; the result does not depend on scheduling.
    let best = (0..=n - p)
        .into_par_iter()
        .map(|first| {
            let mut best = Best::none();
            let item = search.order[first];
            let mut levels = vec![0.0; (p + 1) * big_n];
            for i in 0..big_n {
                levels[big_n + i] = u.scenario(i)[item];
            }
            let mut chosen = vec![item];
            search.dfs(first + 1, &mut chosen, &mut levels, &mut best);
            best
        })
        .reduce(Best::none, Best::merge);
    // Recompute in item order so the value does not depend on summation order.
    let value = u.max_cost_of(&best.items);
    (value, BinarySolution::from_sorted(best.items))
}

fn exact_paths(u: &UncertaintySet, spec: &ProblemSpec, options: &ExactOptions) -> Result<(f64, BinarySolution)> {
    let ProblemSpec::ShortestPath(g) = spec else {
        unreachable!()
    };
    struct Walk<'a> {
        u: &'a UncertaintySet,
        g: &'a crate::problems::PathNetwork,
        options: ExactOptions,
        visited: Vec<bool>,
        edges: Vec<usize>,
        partial: Vec<f64>,
        best: Best,
        paths: u64,
    }
    impl Walk<'_> {
        fn go(&mut self, v: usize) -> Result<()> {
            let running = self.partial.iter().copied().fold(0.0, f64::max);
            if self.options.prune && running > self.best.value {
                return Ok(());
            }
            if v == self.g.sink() {
                self.paths += 1;
                if self.paths > self.options.budget {
                    return Err(Error::TooLarge {
                        count: self.paths,
                        budget: self.options.budget,
                    });
                }
                let edges = self.edges.clone();
                self.best.offer(running, &edges);
                return Ok(());
            }
            for &e in self.g.out_edges(v) {
                let w = self.g.edges()[e].1;
                if self.visited[w] {
                    continue;
                }
                self.visited[w] = true;
                self.edges.push(e);
                let saved = self.partial.clone();
                for (i, s) in self.partial.iter_mut().enumerate() {
                    *s += self.u.scenario(i)[e];
                }
                let r = self.go(w);
                self.partial = saved;
                self.edges.pop();
                self.visited[w] = false;
                r?;
            }
            Ok(())
        }
    }
    let mut walk = Walk {
        u,
        g,
        options: *options,
        visited: vec![false; g.num_nodes()],
        edges: Vec::new(),
        partial: vec![0.0; u.num_scenarios()],
        best: Best::none(),
        paths: 0,
    };
    walk.visited[g.source()] = true;
    walk.go(g.source())?;
    let items = walk.best.items;
    Ok((u.max_cost_of(&items), BinarySolution::from_sorted(items)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{midpoint_scenario, worstcase_scenario};

    fn example() -> UncertaintySet {
        UncertaintySet::new(vec![
            vec![5.0, 5.0, 3.0, 3.0],
            vec![3.0, 8.0, 9.0, 7.0],
            vec![3.0, 2.0, 1.0, 6.0],
        ])
        .unwrap()
    }

    fn sol(v: &[usize]) -> BinarySolution {
        BinarySolution::new(v.to_vec(), 4).unwrap()
    }

    #[test]
    fn upper_bounds_small_example() {
        let u = example();
        assert_eq!(upper_bound(&u, &sol(&[0, 2])), 12.0);
        assert_eq!(upper_bound(&u, &sol(&[0, 3])), 10.0);
        let zero = UncertaintySet::new(vec![vec![0.0; 4]; 2]).unwrap();
        assert_eq!(upper_bound(&zero, &sol(&[1, 2])), 0.0);
    }

    #[test]
    fn midpoint_lower_bound_and_report() {
        let u = example();
        let spec = ProblemSpec::selection(4, 2).unwrap();
        let mid = midpoint_scenario(&u);
        let lam = ConvexWeights::uniform(3);
        let lb = lower_bound(&u, &mid, &lam, &sol(&[0, 2])).unwrap();
        assert!((lb - 8.0).abs() < 1e-12);
        let report = aposteriori_report(&u, &spec, &mid, &lam, 3.0, None).unwrap();
        assert!((report.aposteriori - 1.5).abs() < 1e-12);
        assert_eq!(report.ub, 12.0);
        assert_eq!(report.scenario_provenance, Provenance::Midpoint);
    }

    #[test]
    fn printed_lp_scenario_bounds() {
        let u = example();
        let spec = ProblemSpec::selection(4, 2).unwrap();
        let lam = ConvexWeights::new(vec![0.375, 0.625, 0.0]).unwrap();
        let c = Scenario::new(&u, u.combine(&lam), Provenance::Custom).unwrap();
        let report = aposteriori_report(&u, &spec, &c, &lam, 4.0 / 3.0, Some(1)).unwrap();
        assert!((report.lb - 9.25).abs() < 1e-12);
        assert_eq!(report.ub, 10.0);
        assert!((report.aposteriori - 10.0 / 9.25).abs() < 1e-12);
    }

    #[test]
    fn worstcase_is_refused_as_lower_bound() {
        let u = example();
        let wc = worstcase_scenario(&u);
        let err = lower_bound(&u, &wc, &ConvexWeights::uniform(3), &sol(&[0, 3])).unwrap_err();
        assert!(matches!(err, Error::NotInHull { .. }));
    }

    #[test]
    fn single_scenario_bounds_are_tight() {
        let u = UncertaintySet::new(vec![vec![4.0, 1.0, 7.0, 2.0]]).unwrap();
        let spec = ProblemSpec::selection(4, 2).unwrap();
        let c = Scenario::given(&u, 0);
        let r = aposteriori_report(&u, &spec, &c, &ConvexWeights::vertex(1, 0), 1.0, None).unwrap();
        assert_eq!((r.lb, r.ub, r.aposteriori), (3.0, 3.0, 1.0));
        let (opt, x) = exact_minmax(&u, &spec).unwrap();
        assert_eq!(opt, 3.0);
        assert_eq!(x.selected(), &[1, 3]);
        assert!((maxmin_lower_bound(&u, &spec).unwrap().value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn maxmin_small_example() {
        let u = example();
        let spec = ProblemSpec::selection(4, 2).unwrap();
        let mm = maxmin_lower_bound(&u, &spec).unwrap();
        assert!((mm.value - 10.0).abs() < 1e-9, "{}", mm.value);
        let x = nominal_solve(&spec, mm.scenario.values()).unwrap();
        // the max-min scenario prices its own nominal optimum at the bound
        assert!((x.cost(mm.scenario.values()) - mm.value).abs() < 1e-9);
    }

    #[test]
    fn maxmin_rejects_paths() {
        let u = UncertaintySet::new(vec![vec![1.0]]).unwrap();
        let spec = ProblemSpec::shortest_path(vec![(0, 1)], 0, 1).unwrap();
        assert!(matches!(maxmin_lower_bound(&u, &spec), Err(Error::Unsupported(_))));
    }

    #[test]
    fn exact_small_example() {
        let (opt, x) = exact_minmax(&example(), &ProblemSpec::selection(4, 2).unwrap()).unwrap();
        assert_eq!(opt, 10.0);
        assert_eq!(x.selected(), &[0, 3]);
    }

    #[test]
    fn exact_refuses_oversized() {
        let u = UncertaintySet::new(vec![vec![1.0; 40]]).unwrap();
        let spec = ProblemSpec::selection(40, 20).unwrap();
        assert!(matches!(exact_minmax(&u, &spec), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn exact_ties_are_lexicographic() {
        let u = UncertaintySet::new(vec![vec![1.0; 5], vec![1.0; 5]]).unwrap();
        let spec = ProblemSpec::selection(5, 2).unwrap();
        assert_eq!(exact_minmax(&u, &spec).unwrap().1.selected(), &[0, 1]);
    }

    #[test]
    fn exact_on_paths() {
        // s=0 -> 1 -> 3 (edges 0,1), s -> 2 -> 3 (edges 2,3), s -> 3 (edge 4)
        let spec = ProblemSpec::shortest_path(vec![(0, 1), (1, 3), (0, 2), (2, 3), (0, 3)], 0, 3).unwrap();
        let u = UncertaintySet::new(vec![vec![1.0, 1.0, 4.0, 0.0, 5.0], vec![5.0, 1.0, 0.0, 1.0, 5.0]]).unwrap();
        let (opt, x) = exact_minmax(&u, &spec).unwrap();
        assert_eq!(opt, 4.0);
        assert_eq!(x.selected(), &[2, 3]);
        let tight = ExactOptions {
            budget: 1,
            ..Default::default()
        };
        assert!(matches!(
            exact_minmax_with(&u, &spec, &tight),
            Err(Error::TooLarge { .. })
        ));
    }
}
