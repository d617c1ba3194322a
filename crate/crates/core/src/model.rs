//! Domain types shared across the crate.
//!
//! All types are immutable once constructed; constructors validate their
//! invariants so downstream code can rely on them.

use std::fmt;

use crate::error::{Error, Result};

/// Feasibility tolerance used inside the LP engine and for convex weights.
pub const EPS_FEAS: f64 = 1e-9;
/// Tolerance for user-facing comparisons (bounds, hull membership).
pub const EPS_CMP: f64 = 1e-6;
/// Minimum violation for a subset constraint to count as a cut.
pub const EPS_CUT: f64 = 1e-7;

fn check_cost(value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidCost { value })
    }
}

/// A finite uncertainty set: `N` cost vectors over `n` items.
///
/// Stored row-major, one row per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    n: usize,
    costs: Vec<f64>,
}

impl UncertaintySet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidProblem("uncertainty set needs at least one scenario".into()))?;
        let n = first.len();
        if n == 0 {
            return Err(Error::InvalidProblem("scenarios need at least one item".into()));
        }
        let mut costs = Vec::with_capacity(n * rows.len());
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for &v in row {
                check_cost(v)?;
            }
            costs.extend_from_slice(row);
        }
        Ok(Self { n, costs })
    }

    /// Number of items `n`.
    pub fn num_items(&self) -> usize {
        self.n
    }

    /// Number of scenarios `N`.
    pub fn num_scenarios(&self) -> usize {
        self.costs.len() / self.n
    }

    pub fn scenario(&self, i: usize) -> &[f64] {
        &self.costs[i * self.n..(i + 1) * self.n]
    }

    pub fn scenarios(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.costs.chunks_exact(self.n)
    }

    /// Cost of `items` under scenario `i`.
    pub fn cost_of(&self, i: usize, items: &[usize]) -> f64 {
        let row = self.scenario(i);
        items.iter().map(|&j| row[j]).sum()
    }

    /// Worst-case cost of `items` over all scenarios.
    pub fn max_cost_of(&self, items: &[usize]) -> f64 {
        (0..self.num_scenarios())
            .map(|i| self.cost_of(i, items))
            .fold(0.0, f64::max)
    }

    /// `Σ λᵢ cⁱ`.
    pub fn combine(&self, weights: &ConvexWeights) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &l) in self.scenarios().zip(weights.lambda()) {
            if l != 0.0 {
                for (o, &c) in out.iter_mut().zip(row) {
                    *o += l * c;
                }
            }
        }
        out
    }

    /// Largest entry of the matrix.
    pub fn max_entry(&self) -> f64 {
        self.costs.iter().copied().fold(0.0, f64::max)
    }
}

/// Where a scenario came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Row `i` of the uncertainty set.
    Given(usize),
    Midpoint,
    WorstCase,
    /// Built by the scenario LP with subset size `k`.
    Lp(usize),
    /// Optimal scenario of the max-min problem.
    MaxMin,
    Custom,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Given(i) => write!(f, "given({i})"),
            Provenance::Midpoint => f.write_str("midpoint"),
            Provenance::WorstCase => f.write_str("worstcase"),
            Provenance::Lp(k) => write!(f, "lp({k})"),
            Provenance::MaxMin => f.write_str("maxmin"),
            Provenance::Custom => f.write_str("custom"),
        }
    }
}

/// A single cost vector, possibly outside the uncertainty set.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    values: Vec<f64>,
    provenance: Provenance,
}

impl Scenario {
    /// Builds a scenario for `u`, checking length and sign.
    pub fn new(u: &UncertaintySet, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if values.len() != u.num_items() {
            return Err(Error::DimensionMismatch {
                expected: u.num_items(),
                found: values.len(),
            });
        }
        for &v in &values {
            check_cost(v)?;
        }
        Ok(Self { values, provenance })
    }

    pub fn given(u: &UncertaintySet, i: usize) -> Self {
        Self {
            values: u.scenario(i).to_vec(),
            provenance: Provenance::Given(i),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Convex combination weights `λ` over the scenarios of an uncertainty set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexWeights {
    lambda: Vec<f64>,
}

impl ConvexWeights {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if let Some(&l) = lambda.iter().find(|&&l| !l.is_finite() || l < -EPS_FEAS) {
            return Err(Error::InvalidWeights(format!("weight {l} is negative or not finite")));
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > EPS_FEAS {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { lambda })
    }

    /// Clamps tiny negative entries from LP round-off and renormalizes.
    pub fn from_lp(raw: &[f64]) -> Result<Self> {
        let clamped: Vec<f64> = raw.iter().map(|&l| l.max(0.0)).collect();
        let sum: f64 = clamped.iter().sum();
        if sum.is_nan() || sum <= 0.0 || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Lp(format!("weights from LP sum to {sum}")));
        }
        Self::new(clamped.into_iter().map(|l| l / sum).collect())
    }

    pub fn uniform(count: usize) -> Self {
        Self {
            lambda: vec![1.0 / count as f64; count],
        }
    }

    /// All weight on scenario `i`.
    pub fn vertex(count: usize, i: usize) -> Self {
        let mut lambda = vec![0.0; count];
        lambda[i] = 1.0;
        Self { lambda }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
}

/// A feasible-solution candidate `x ∈ {0,1}ⁿ`, stored as its sorted support.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinarySolution {
    selected: Vec<usize>,
}

impl BinarySolution {
    /// Sorts `indices` and rejects duplicates or indices `>= n`.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidProblem("duplicate index in solution".into()));
        }
        if let Some(&j) = indices.last() {
            if j >= n {
                return Err(Error::InvalidProblem(format!("index {j} out of range for n = {n}")));
            }
        }
        Ok(Self { selected: indices })
    }

    pub(crate) fn from_sorted(selected: Vec<usize>) -> Self {
        debug_assert!(selected.windows(2).all(|w| w[0] < w[1]));
        Self { selected }
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// `c · x`.
    pub fn cost(&self, c: &[f64]) -> f64 {
        self.selected.iter().map(|&j| c[j]).sum()
    }
}

/// Bounds obtained from one representative scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Guarantee known before solving the nominal problem.
    pub apriori: f64,
    pub lb: f64,
    pub ub: f64,
    /// `ub / lb`.
    pub aposteriori: f64,
    pub scenario_provenance: Provenance,
    pub k_used: Option<usize>,
}

/// `ub / lb` with the conventions `0/0 = 1` and `x/0 = ∞`.
pub fn bound_ratio(ub: f64, lb: f64) -> f64 {
    if lb > 0.0 {
        ub / lb
    } else if ub > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Formats `x` with `sig` significant digits, trimming trailing zeros.
///
/// Locale independent; switches to exponent notation outside `1e-4..1e15`.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..15).contains(&exp) {
        return format!("{}e{}", trim_zeros(mantissa), exp);
    }
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    let rounded: f64 = sci.parse().expect("round trip");
    trim_zeros(&format!("{:.*}", decimals, rounded)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
