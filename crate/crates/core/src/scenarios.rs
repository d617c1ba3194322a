//! Representative scenarios and their a-priori guarantees.
//!
//! The LP scenario solves
//!
//! ```text
//! max t
//! s.t. t·Σ_{j∈S} cⁱⱼ <= Σ_{j∈S} cⱼ     for all i, |S| = k
//!      c = Σ λᵢ cⁱ,  Σ λᵢ = 1,  λ >= 0
//! ```
//!
//! with `c` substituted out, so the LP variables are `(t, λ₁..λ_N)`. Any
//! optimum `(t*, c*)` makes `x(c*)` a `1/t*`-approximation of the min-max
//! problem, and `(1/N, ĉ)` is always feasible, so `1/t* <= N`.

use crate::error::{Error, Result};
use crate::lp::{solve_lp, solve_lp_with_rows, Constraint, LinearProgram, LpStatus};
use crate::model::{ConvexWeights, Provenance, Scenario, UncertaintySet, EPS_CMP, EPS_CUT};
use crate::problems::{max_solution_cardinality_bound, min_solution_cardinality, ProblemSpec};

/// Component-wise average `ĉ`.
pub fn midpoint_scenario(u: &UncertaintySet) -> Scenario {
    let weights = ConvexWeights::uniform(u.num_scenarios());
    Scenario::new(u, u.combine(&weights), Provenance::Midpoint).expect("average of valid rows")
}

/// Component-wise maximum `c̄`. Generally not in `conv(U)`.
pub fn worstcase_scenario(u: &UncertaintySet) -> Scenario {
    let mut values = vec![0.0f64; u.num_items()];
    for row in u.scenarios() {
        for (v, &c) in values.iter_mut().zip(row) {
            *v = v.max(c);
        }
    }
    Scenario::new(u, values, Provenance::WorstCase).expect("maximum of valid rows")
}

/// A violated subset constraint `t·Σ_S cⁱ > Σ_S c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub scenario: usize,
    /// Sorted item indices, `|S| = k`.
    pub subset: Vec<usize>,
    /// `t·Σ_S cⁱ − Σ_S c`.
    pub amount: f64,
}

/// For scenario `i`, the size-`k` subset minimizing `Σ_S (cⱼ − t·cⁱⱼ)`,
/// ties broken by lower index, with its value `Σ_S (t·cⁱⱼ − cⱼ)`.
fn most_violated_subset(row: &[f64], c: &[f64], t: f64, k: usize, slack: &mut Vec<(f64, usize)>) -> (Vec<usize>, f64) {
    slack.clear();
    slack.extend(c.iter().zip(row).enumerate().map(|(j, (&cj, &rj))| (cj - t * rj, j)));
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < slack.len() {
        slack.select_nth_unstable_by(k - 1, cmp);
    }
    let mut subset: Vec<usize> = slack[..k].iter().map(|&(_, j)| j).collect();
    subset.sort_unstable();
    let amount = subset.iter().map(|&j| t * row[j] - c[j]).sum();
    (subset, amount)
}

/// Most violated constraint per scenario, keeping only violations above `EPS_CUT`.
pub fn violations_per_scenario(u: &UncertaintySet, c: &[f64], t: f64, k: usize) -> Vec<Violation> {
    let mut buf = Vec::with_capacity(u.num_items());
    u.scenarios()
        .enumerate()
        .filter_map(|(i, row)| {
            let (subset, amount) = most_violated_subset(row, c, t, k, &mut buf);
            (amount > EPS_CUT).then_some(Violation {
                scenario: i,
                subset,
                amount,
            })
        })
        .collect()
}

/// The `(i, S)` maximizing `t·Σ_S cⁱ − Σ_S c`, if that exceeds `EPS_CUT`.
///
/// Ties go to the lowest scenario index.
pub fn separation_oracle(u: &UncertaintySet, c: &Scenario, t: f64, k: usize) -> Option<Violation> {
    assert!(
        t > 0.0 && k >= 1 && k <= u.num_items(),
        "separation needs t > 0 and 1 <= k <= n"
    );
    violations_per_scenario(u, c.values(), t, k)
        .into_iter()
        .fold(None, |best: Option<Violation>, v| match best {
            Some(b) if b.amount >= v.amount => Some(b),
            _ => Some(v),
        })
}

/// The largest `t <= 1` for which the fixed scenario `c` satisfies every
/// subset constraint of size `k`, i.e. `min_{i,S} Σ_S c / Σ_S cⁱ`.
///
/// Dinkelbach iteration: at each step the separation routine finds the
/// subset maximizing `t·A(S) − B(S)`, and `t` drops to that subset's ratio
/// `B/A`. Terminates at the exact minimum ratio.
pub fn fixed_scenario_threshold(u: &UncertaintySet, c: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > u.num_items() {
        return Err(Error::InvalidK {
            k,
            min_cardinality: u.num_items(),
        });
    }
    if c.len() != u.num_items() {
        return Err(Error::DimensionMismatch {
            expected: u.num_items(),
            found: c.len(),
        });
    }
    let mut t: f64 = 1.0;
    let mut buf = Vec::with_capacity(c.len());
    loop {
        let mut best: Option<(f64, f64, f64)> = None; // (violation, B, A)
        for row in u.scenarios() {
            let (subset, amount) = most_violated_subset(row, c, t, k, &mut buf);
            if amount > 0.0 && best.is_none_or(|b| amount > b.0) {
                let a: f64 = subset.iter().map(|&j| row[j]).sum();
                let b: f64 = subset.iter().map(|&j| c[j]).sum();
                best = Some((amount, b, a));
            }
        }
        match best {
            Some((_, b, a)) if b / a < t => t = b / a,
            _ => return Ok(t),
        }
    }
}

/// `1/t` for the fixed scenario `c`: the a-priori guarantee of `x(c)` when
/// `c ∈ conv(U)`. `+∞` when some scenario charges a subset that `c` prices at zero.
pub fn fixed_scenario_guarantee(u: &UncertaintySet, c: &Scenario, k: usize) -> Result<f64> {
    let t = fixed_scenario_threshold(u, c.values(), k)?;
    Ok(if t > 0.0 { 1.0 / t } else { f64::INFINITY })
}

/// `min(N, |X|)`: the guarantee of the element-wise worst-case solution.
pub fn worstcase_apriori_bound(u: &UncertaintySet, spec: &ProblemSpec) -> f64 {
    u.num_scenarios().min(max_solution_cardinality_bound(spec)) as f64
}

/// How the subset constraints of the scenario LP are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStrategy {
    /// Enumerate rows eagerly when `N·C(n,k)` is at most this many.
    Auto {
        eager_row_limit: u64,
    },
    Eager,
    Lazy,
}

impl Default for RowStrategy {
    fn default() -> Self {
        RowStrategy::Auto { eager_row_limit: 2_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpScenarioOptions {
    pub rows: RowStrategy,
    /// Largest subset size accepted.
    pub max_k: usize,
}

impl Default for LpScenarioOptions {
    fn default() -> Self {
        Self {
            rows: RowStrategy::default(),
            max_k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpScenario {
    /// LP optimum; the a-priori guarantee is `1 / t_star`.
    pub t_star: f64,
    pub scenario: Scenario,
    pub weights: ConvexWeights,
    /// Subset rows present in the final LP.
    pub rows_used: usize,
    pub lp_iterations: usize,
}

impl LpScenario {
    pub fn apriori(&self) -> f64 {
        if self.t_star > 0.0 {
            1.0 / self.t_star
        } else {
            f64::INFINITY
        }
    }
}

/// `C(n, k)` saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u64;
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul(n as u64 - i) {
            Some(v) => v / (i + 1),
            None => return u64::MAX,
        };
    }
    acc
}

/// Lexicographic enumeration of the size-`k` subsets of `0..n`.
pub(crate) fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < n - k + p) else {
            return;
        };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

fn subset_row(u: &UncertaintySet, i: usize, subset: &[usize]) -> Constraint {
    let mut coeffs = Vec::with_capacity(u.num_scenarios() + 1);
    coeffs.push(u.cost_of(i, subset));
    coeffs.extend((0..u.num_scenarios()).map(|l| -u.cost_of(l, subset)));
    Constraint::le(coeffs, 0.0)
}

/// Builds the LP scenario for subset size `k` with default options.
pub fn construct_lp_scenario(u: &UncertaintySet, spec: &ProblemSpec, k: usize) -> Result<LpScenario> {
    construct_lp_scenario_with(u, spec, k, &LpScenarioOptions::default())
}

pub fn construct_lp_scenario_with(
    u: &UncertaintySet,
    spec: &ProblemSpec,
    k: usize,
    options: &LpScenarioOptions,
) -> Result<LpScenario> {
    if u.num_items() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            found: u.num_items(),
        });
    }
    let min_card = min_solution_cardinality(spec);
    if k == 0 || k > min_card {
        return Err(Error::InvalidK {
            k,
            min_cardinality: min_card,
        });
    }
    if k > options.max_k {
        return Err(Error::KTooLarge { k, max: options.max_k });
    }
    let big_n = u.num_scenarios();
    let n = u.num_items();

    // variables: t, λ₁..λ_N
    let mut lp = LinearProgram::new(big_n + 1);
    let mut objective = vec![0.0; big_n + 1];
    objective[0] = 1.0;
    lp.maximize(objective)?;
    lp.set_bounds(0, 0.0, 1.0)?;
    let mut simplex = vec![1.0; big_n + 1];
    simplex[0] = 0.0;
    lp.add_constraint(Constraint::eq(simplex, 1.0))?;

    let total_rows = binomial(n, k).saturating_mul(big_n as u64);
    let eager = match options.rows {
        RowStrategy::Eager => true,
        RowStrategy::Lazy => false,
        RowStrategy::Auto { eager_row_limit } => total_rows <= eager_row_limit,
    };

    let (sol, rows_used) = if eager {
        for i in 0..big_n {
            let mut err = None;
            for_each_subset(n, k, |s| {
                if err.is_none() {
                    err = lp.add_constraint(subset_row(u, i, s)).err();
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        (solve_lp(&lp)?, total_rows as usize)
    } else {
        let mut added = 0;
        let weights_of = |x: &[f64]| -> Vec<f64> { x[1..].iter().map(|&l| l.max(0.0)).collect() };
        let sol = solve_lp_with_rows(&lp, |x| {
            let lam = weights_of(x);
            let mut c = vec![0.0; n];
            for (row, &l) in u.scenarios().zip(&lam) {
                for (cj, &v) in c.iter_mut().zip(row) {
                    *cj += l * v;
                }
            }
            let cuts: Vec<Constraint> = violations_per_scenario(u, &c, x[0], k)
                .into_iter()
                .map(|v| subset_row(u, v.scenario, &v.subset))
                .collect();
            added += cuts.len();
            cuts
        })?;
        (sol, added)
    };

    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("scenario LP ended with status {:?}", sol.status)));
    }
    let t_star = sol.x[0].clamp(0.0, 1.0);
    let weights = ConvexWeights::from_lp(&sol.x[1..])?;
    let values = u.combine(&weights);
    let scenario = Scenario::new(u, values, Provenance::Lp(k))?;

    // (1/N, ĉ) is feasible, so anything below 1/N signals numerical trouble.
    if t_star + EPS_CMP < 1.0 / big_n as f64 {
        return Err(Error::Lp(format!("t* = {t_star} below the feasible value 1/N")));
    }
    Ok(LpScenario {
        t_star,
        scenario,
        weights,
        rows_used,
        lp_iterations: sol.iterations,
    })
}
