//! Dense two-phase tableau simplex with Bland's rule, plus a row-generation
//! driver for LPs whose constraint family is too large to write down.
//!
//! All programs are maximization problems
//!
//! ```text
//! max  c·x   s.t.  aᵢ·x {≤,=,≥} bᵢ,   l ≤ x ≤ u
//! ```
//!
//! Variable bounds are eliminated before the tableau is built: finite lower
//! bounds shift the variable, `(-∞, u]` mirrors it, free variables split in
//! two, and finite upper bounds become explicit rows.

use crate::error::{Error, Result};
use crate::model::EPS_FEAS;

/// Reduced costs above this enter the basis.
const TOL_REDUCED: f64 = 1e-9;
/// Smallest admissible pivot magnitude in the ratio test.
const TOL_PIVOT: f64 = 1e-9;
/// Row-generation rounds before giving up.
const MAX_ROUNDS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            relation: Relation::Le,
            rhs,
        }
    }

    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            relation: Relation::Eq,
            rhs,
        }
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            relation: Relation::Ge,
            rhs,
        }
    }

    /// Amount by which `x` violates the constraint (`<= 0` when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        match self.relation {
            Relation::Le => lhs - self.rhs,
            Relation::Ge => self.rhs - lhs,
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }

    fn scale(&self, x: &[f64]) -> f64 {
        1.0 + self.rhs.abs() + self.coeffs.iter().zip(x).map(|(a, v)| (a * v).abs()).sum::<f64>()
    }
}

/// A maximization LP over `num_vars` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    /// Zero objective, no constraints, every variable in `[0, ∞)`.
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn maximize(&mut self, coeffs: Vec<f64>) -> Result<()> {
        if coeffs.len() != self.num_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars(),
                found: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Lp("objective coefficients must be finite".into()));
        }
        self.objective = coeffs;
        Ok(())
    }

    pub fn add_constraint(&mut self, constraint: Constraint) -> Result<()> {
        if constraint.coeffs.len() != self.num_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars(),
                found: constraint.coeffs.len(),
            });
        }
        if !constraint.rhs.is_finite() || constraint.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Lp("constraint data must be finite".into()));
        }
        self.constraints.push(constraint);
        Ok(())
    }

    /// Sets `lower <= x[var] <= upper`; either side may be infinite.
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<()> {
        if var >= self.num_vars() {
            return Err(Error::Lp(format!("variable {var} out of range")));
        }
        if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::Lp(format!(
                "invalid bounds [{lower}, {upper}] for variable {var}"
            )));
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
        Ok(())
    }

    /// Whether `x` satisfies every row and bound within `EPS_FEAS`
    /// (scaled by the row magnitude).
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        let bounds_ok = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&l, &u))| v >= l - EPS_FEAS * (1.0 + l.abs()) && v <= u + EPS_FEAS * (1.0 + u.abs()));
        bounds_ok && self.constraints.iter().all(|c| c.violation(x) <= EPS_FEAS * c.scale(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values; meaningful only when `status` is optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Simplex pivots over both phases (and all rounds of row generation).
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, num_vars: usize, iterations: usize) -> Self {
        let objective = match status {
            LpStatus::Unbounded => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        Self {
            status,
            x: vec![f64::NAN; num_vars],
            objective,
            iterations,
        }
    }
}

/// How an original variable is recovered from tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lower + y`
    Shift { col: usize, lower: f64 },
    /// `x = upper - y`
    Mirror { col: usize, upper: f64 },
    /// `x = y⁺ - y⁻`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    width: usize,
    a: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    max_iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.a[i * self.width + self.width - 1]
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let inv = 1.0 / self.a[r * w + c];
        let mut prow = self.a[r * w..(r + 1) * w].to_vec();
        for v in &mut prow {
            *v *= inv;
        }
        prow[c] = 1.0;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let row = &mut self.a[i * w..(i + 1) * w];
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.obj[c] = 0.0;
        }
        self.a[r * w..(r + 1) * w].copy_from_slice(&prow);
        self.basis[r] = c;
    }

    /// Primal simplex over columns `0..limit` with Bland's rule.
    fn run(&mut self, limit: usize) -> Result<Outcome> {
        loop {
            let Some(enter) = (0..limit).find(|&j| self.obj[j] > TOL_REDUCED) else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, enter);
                if a <= TOL_PIVOT {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if (!tie && ratio < br) || (tie && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(Error::Lp(format!("iteration limit {} reached", self.max_iterations)));
            }
            self.pivot(r, enter);
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.a.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

/// Solves `lp` to optimality or reports infeasibility / unboundedness.
///
/// Deterministic: identical input gives identical pivots and output.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let nv = lp.num_vars();
    if lp.lower.iter().zip(&lp.upper).any(|(l, u)| l > u) {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, nv, 0));
    }

    // Map variables onto nonnegative columns.
    let mut maps = Vec::with_capacity(nv);
    let mut ncols = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for (&l, &u) in lp.lower.iter().zip(&lp.upper) {
        let map = if l.is_finite() {
            if u.is_finite() {
                bound_rows.push((ncols, u - l));
            }
            ncols += 1;
            VarMap::Shift {
                col: ncols - 1,
                lower: l,
            }
        } else if u.is_finite() {
            ncols += 1;
            VarMap::Mirror {
                col: ncols - 1,
                upper: u,
            }
        } else {
            ncols += 2;
            VarMap::Split {
                pos: ncols - 2,
                neg: ncols - 1,
            }
        };
        maps.push(map);
    }
    let transform = |coeffs: &[f64]| -> (Vec<f64>, f64) {
        let mut row = vec![0.0; ncols];
        let mut offset = 0.0;
        for (&a, map) in coeffs.iter().zip(&maps) {
            match *map {
                VarMap::Shift { col, lower } => {
                    row[col] += a;
                    offset += a * lower;
                }
                VarMap::Mirror { col, upper } => {
                    row[col] -= a;
                    offset += a * upper;
                }
                VarMap::Split { pos, neg } => {
                    row[pos] += a;
                    row[neg] -= a;
                }
            }
        }
        (row, offset)
    };

    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let (row, offset) = transform(&c.coeffs);
        rows.push((row, c.relation, c.rhs - offset));
    }
    for &(col, width) in &bound_rows {
        let mut row = vec![0.0; ncols];
        row[col] = 1.0;
        rows.push((row, Relation::Le, width));
    }
    let (cost, _) = transform(&lp.objective);

    // Normalize to nonnegative right-hand sides.
    for (row, rel, rhs) in &mut rows {
        if *rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = ncols + n_slack;
    let width = art_start + n_art + 1;
    let mut tab = Tableau {
        rows: m,
        width,
        a: vec![0.0; m * width],
        obj: vec![0.0; width],
        basis: vec![0; m],
        iterations: 0,
        max_iterations: 50_000 + 50 * (m + width),
    };
    let (mut next_slack, mut next_art) = (ncols, art_start);
    let mut max_rhs: f64 = 0.0;
    for (i, (row, rel, rhs)) in rows.iter().enumerate() {
        let base = i * width;
        tab.a[base..base + ncols].copy_from_slice(row);
        tab.a[base + width - 1] = *rhs;
        max_rhs = max_rhs.max(*rhs);
        match rel {
            Relation::Le => {
                tab.a[base + next_slack] = 1.0;
                tab.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                tab.a[base + next_slack] = -1.0;
                next_slack += 1;
                tab.a[base + next_art] = 1.0;
                tab.basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                tab.a[base + next_art] = 1.0;
                tab.basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    // Phase 1: maximize -Σ artificials.
    if n_art > 0 {
        for i in 0..m {
            if tab.basis[i] >= art_start {
                for j in 0..width {
                    if j < art_start || j == width - 1 {
                        tab.obj[j] += tab.a[i * width + j];
                    }
                }
            }
        }
        tab.run(art_start + n_art)?;
        let infeasibility = tab.obj[width - 1];
        if infeasibility > 1e-8 * (1.0 + max_rhs) {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, nv, tab.iterations));
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.rows {
            if tab.basis[i] < art_start {
                i += 1;
                continue;
            }
            let best = (0..art_start)
                .map(|j| (j, tab.at(i, j).abs()))
                .filter(|&(_, v)| v > TOL_PIVOT)
                .fold(None, |acc: Option<(usize, f64)>, (j, v)| match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((j, v)),
                });
            match best {
                Some((j, _)) => {
                    tab.pivot(i, j);
                    i += 1;
                }
                None => tab.remove_row(i),
            }
        }
    }

    // Phase 2 objective row.
    tab.obj.iter_mut().for_each(|v| *v = 0.0);
    tab.obj[..ncols].copy_from_slice(&cost);
    for i in 0..tab.rows {
        let cb = cost.get(tab.basis[i]).copied().unwrap_or(0.0);
        if cb != 0.0 {
            for j in 0..width {
                tab.obj[j] -= cb * tab.a[i * width + j];
            }
        }
    }
    if let Outcome::Unbounded = tab.run(art_start)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, nv, tab.iterations));
    }

    let mut y = vec![0.0; ncols];
    for i in 0..tab.rows {
        if tab.basis[i] < ncols {
            y[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, lower } => lower + y[col],
            VarMap::Mirror { col, upper } => upper - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    debug_assert!(lp.is_feasible(&x), "simplex returned an infeasible point");
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        iterations: tab.iterations,
    })
}

/// Solves `lp` with lazily generated rows.
///
/// `row_source` receives the current optimum and returns constraints it
/// violates (each by more than the caller's cut tolerance); an empty list
/// certifies optimality over the implicit constraint set.
pub fn solve_lp_with_rows<F>(lp: &LinearProgram, mut row_source: F) -> Result<LpSolution>
where
    F: FnMut(&[f64]) -> Vec<Constraint>,
{
    let mut work = lp.clone();
    let mut iterations = 0;
    for _ in 0..MAX_ROUNDS {
        let mut sol = solve_lp(&work)?;
        iterations += sol.iterations;
        sol.iterations = iterations;
        if sol.status != LpStatus::Optimal {
            return Ok(sol);
        }
        let cuts = row_source(&sol.x);
        if cuts.is_empty() {
            return Ok(sol);
        }
        for cut in cuts {
            work.add_constraint(cut)?;
        }
    }
    Err(Error::Lp(format!(
        "row generation did not converge in {MAX_ROUNDS} rounds"
    )))
}
