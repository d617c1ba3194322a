//! Random selection instances and the averaged bound experiments.
//!
//! # Reproducibility
//!
//! Every instance has its own seed,
//! `instance_seed(master, n, p, N, id)`, obtained by folding the five
//! values through the SplitMix64 finalizer. The seed is expanded to a
//! 32-byte ChaCha8 key (four further SplitMix64 outputs, little endian)
//! and costs are drawn row by row from `{0, …, 100}` by rejection sampling
//! on 32-bit outputs: a draw `x` is accepted when `x < 101·⌊2³²/101⌋` and
//! mapped to `x mod 101`. Instances are evaluated independently and
//! aggregated in instance order, so results do not depend on the number of
//! worker threads.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{exact_minmax_with, maxmin_lower_bound, upper_bound, ExactOptions};
use crate::error::{Error, Result};
use crate::instance::serialize_instance;
use crate::model::{bound_ratio, format_sig, UncertaintySet, EPS_CMP};
use crate::problems::{nominal_solve, ProblemSpec};
use crate::scenarios::{
    binomial, construct_lp_scenario_with, fixed_scenario_guarantee, midpoint_scenario, LpScenarioOptions,
};

/// Largest generated cost.
pub const MAX_COST: u32 = 100;

pub const CSV_HEADER: &str = "n,p,N,metric,method,k,value,stderr,instances,runtime_ms";

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for instance `id` of cell `(n, p, N)`.
pub fn instance_seed(master: u64, n: usize, p: usize, big_n: usize, id: u64) -> u64 {
    [n as u64, p as u64, big_n as u64, id]
        .into_iter()
        .fold(splitmix64(master), |h, v| splitmix64(h ^ v))
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform integer in `0..=max` by rejection sampling.
fn draw_uniform(rng: &mut impl RngCore, max: u32) -> u32 {
    let range = u64::from(max) + 1;
    let zone = (1u64 << 32) / range * range;
    loop {
        let x = u64::from(rng.next_u32());
        if x < zone {
            return (x % range) as u32;
        }
    }
}

/// `N` scenarios of `n` i.i.d. uniform costs in `{0, …, 100}` for selection(n, p).
pub fn generate_instance(n: usize, p: usize, big_n: usize, seed: u64) -> Result<(UncertaintySet, ProblemSpec)> {
    let spec = ProblemSpec::selection(n, p)?;
    if big_n == 0 {
        return Err(Error::InvalidProblem("need at least one scenario".into()));
    }
    let mut rng = rng_for(seed);
    let rows = (0..big_n)
        .map(|_| (0..n).map(|_| f64::from(draw_uniform(&mut rng, MAX_COST))).collect())
        .collect();
    Ok((UncertaintySet::new(rows)?, spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub n: usize,
    pub p: usize,
    pub big_n: usize,
}

/// The 15-cell standard grid: (n, p) in {(10,3), (20,6), (30,9)}, N in {2, 5, 10, 50, 100}.
pub fn standard_cells() -> Vec<Cell> {
    let mut cells = Vec::new();
    for (n, p) in [(10, 3), (20, 6), (30, 9)] {
        for big_n in [2, 5, 10, 50, 100] {
            cells.push(Cell { n, p, big_n });
        }
    }
    cells
}

/// Parses `standard`, or triples `n,p,N` (or `n p N`) separated by `;` or newlines.
pub fn parse_grid_cells(text: &str) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for (idx, line) in text.split(['\n', ';']).enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "standard" {
            cells.extend(standard_cells());
            continue;
        }
        let nums: Vec<usize> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Syntax {
                line: idx + 1,
                message: format!("invalid grid cell '{line}'"),
            })?;
        let [n, p, big_n] = nums[..] else {
            return Err(Error::Syntax {
                line: idx + 1,
                message: format!("expected 'n,p,N', got '{line}'"),
            });
        };
        ProblemSpec::selection(n, p)?;
        if big_n == 0 {
            return Err(Error::InvalidProblem("N must be positive".into()));
        }
        cells.push(Cell { n, p, big_n });
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub cells: Vec<Cell>,
    pub instances: usize,
    pub master_seed: u64,
    /// Subset sizes for the Mid-k and LP-k methods; sizes above `p` are skipped per cell.
    pub ks: Vec<usize>,
    pub compute_opt: bool,
    /// Skip OPT for cells with `C(n,p)·N` above this.
    pub opt_budget: u64,
    pub lp_options: LpScenarioOptions,
    pub workers: usize,
    /// Write every generated instance here as `inst_<n>_<p>_<N>_<id>.txt`.
    pub dump_dir: Option<PathBuf>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            cells: standard_cells(),
            instances: 1000,
            master_seed: 0,
            ks: vec![1, 2, 3],
            compute_opt: true,
            opt_budget: 200_000_000,
            lp_options: LpScenarioOptions::default(),
            workers: 1,
            dump_dir: None,
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::InvalidProblem("instance count must be at least 1".into()));
        }
        if self.ks.contains(&0) {
            return Err(Error::InvalidProblem("k must be positive".into()));
        }
        for c in &self.cells {
            ProblemSpec::selection(c.n, c.p)?;
            if c.big_n == 0 {
                return Err(Error::InvalidProblem("N must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Apriori,
    Aposteriori,
    Opt,
    Ub,
    Lb,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Apriori => "apriori",
            Metric::Aposteriori => "aposteriori",
            Metric::Opt => "opt",
            Metric::Ub => "ub",
            Metric::Lb => "lb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Mid,
    Lp,
    MaxMin,
    Opt,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mid => "Mid",
            Method::Lp => "LP",
            Method::MaxMin => "MM",
            Method::Opt => "OPT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricKey {
    pub metric: Metric,
    pub method: Method,
    pub k: Option<usize>,
}

/// Output rows for one cell, in emission order.
pub fn metric_keys(ks: &[usize], p: usize) -> Vec<MetricKey> {
    let ks: Vec<usize> = ks.iter().copied().filter(|&k| k <= p).collect();
    let key = |metric, method, k| MetricKey { metric, method, k };
    let mut keys = Vec::new();
    keys.extend(ks.iter().map(|&k| key(Metric::Apriori, Method::Mid, Some(k))));
    keys.extend(ks.iter().map(|&k| key(Metric::Apriori, Method::Lp, Some(k))));
    for metric in [Metric::Aposteriori, Metric::Ub, Metric::Lb] {
        if metric == Metric::Ub {
            keys.push(key(Metric::Opt, Method::Opt, None));
        }
        keys.push(key(metric, Method::Mid, None));
        keys.extend(ks.iter().map(|&k| key(metric, Method::Lp, Some(k))));
        keys.push(key(metric, Method::MaxMin, None));
    }
    keys
}

/// Per-instance values aligned with `metric_keys`, plus per-key runtimes in ms.
struct InstanceOutcome {
    values: Vec<Option<f64>>,
    millis: Vec<f64>,
    failed: bool,
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn evaluate_instance(
    grid: &ExperimentGrid,
    cell: Cell,
    keys: &[MetricKey],
    id: u64,
    want_opt: bool,
) -> Result<InstanceOutcome> {
    let seed = instance_seed(grid.master_seed, cell.n, cell.p, cell.big_n, id);
    let (u, spec) = generate_instance(cell.n, cell.p, cell.big_n, seed)?;
    if let Some(dir) = &grid.dump_dir {
        let path = dir.join(format!("inst_{}_{}_{}_{}.txt", cell.n, cell.p, cell.big_n, id));
        std::fs::write(&path, serialize_instance(&u, &spec))
            .map_err(|e| Error::InvalidProblem(format!("cannot write {}: {e}", path.display())))?;
    }

    let mut values = vec![None; keys.len()];
    let mut millis = vec![0.0; keys.len()];
    let mut failed = false;
    let slot = |metric: Metric, method: Method, k: Option<usize>| {
        keys.iter().position(|key| *key == MetricKey { metric, method, k })
    };
    let mut record = |metric, method, k, value: Option<f64>, ms: f64| {
        if let Some(i) = slot(metric, method, k) {
            values[i] = value;
            millis[i] = ms;
        }
    };

    // Midpoint: a-priori per k, then one nominal solve for the a-posteriori bounds.
    let mid = midpoint_scenario(&u);
    let ks: Vec<usize> = grid.ks.iter().copied().filter(|&k| k <= cell.p).collect();
    for &k in &ks {
        let start = Instant::now();
        let g = fixed_scenario_guarantee(&u, &mid, k).ok();
        failed |= g.is_none();
        record(Metric::Apriori, Method::Mid, Some(k), g, ms_since(start));
    }
    let start = Instant::now();
    let x_mid = nominal_solve(&spec, mid.values())?;
    let mid_lb = x_mid.cost(mid.values());
    let mid_ub = upper_bound(&u, &x_mid);
    let ms = ms_since(start);
    record(
        Metric::Aposteriori,
        Method::Mid,
        None,
        Some(bound_ratio(mid_ub, mid_lb)),
        ms,
    );
    record(Metric::Ub, Method::Mid, None, Some(mid_ub), ms);
    record(Metric::Lb, Method::Mid, None, Some(mid_lb), ms);

    let mut lbs = vec![mid_lb];
    let mut ubs = vec![mid_ub];
    for &k in &ks {
        let start = Instant::now();
        match construct_lp_scenario_with(&u, &spec, k, &grid.lp_options) {
            Ok(lp) => {
                let build_ms = ms_since(start);
                let x = nominal_solve(&spec, lp.scenario.values())?;
                let lb = x.cost(lp.scenario.values());
                let ub = upper_bound(&u, &x);
                let total_ms = ms_since(start);
                record(Metric::Apriori, Method::Lp, Some(k), Some(lp.apriori()), build_ms);
                record(
                    Metric::Aposteriori,
                    Method::Lp,
                    Some(k),
                    Some(bound_ratio(ub, lb)),
                    total_ms,
                );
                record(Metric::Ub, Method::Lp, Some(k), Some(ub), total_ms);
                record(Metric::Lb, Method::Lp, Some(k), Some(lb), total_ms);
                lbs.push(lb);
                ubs.push(ub);
            }
            Err(_) => failed = true,
        }
    }

    let start = Instant::now();
    let mut mm_lb = None;
    match maxmin_lower_bound(&u, &spec) {
        Ok(mm) => {
            let x = nominal_solve(&spec, mm.scenario.values())?;
            let ub = upper_bound(&u, &x);
            let ms = ms_since(start);
            record(
                Metric::Aposteriori,
                Method::MaxMin,
                None,
                Some(bound_ratio(ub, mm.value)),
                ms,
            );
            record(Metric::Ub, Method::MaxMin, None, Some(ub), ms);
            record(Metric::Lb, Method::MaxMin, None, Some(mm.value), ms);
            mm_lb = Some(mm.value);
            ubs.push(ub);
        }
        Err(_) => failed = true,
    }

    if want_opt {
        let start = Instant::now();
        let opts = ExactOptions {
            prune: true,
            budget: u64::MAX,
        };
        match exact_minmax_with(&u, &spec, &opts) {
            Ok((opt, _)) => {
                record(Metric::Opt, Method::Opt, None, Some(opt), ms_since(start));
                debug_assert!(lbs.iter().chain(&mm_lb).all(|&lb| lb <= opt + EPS_CMP));
                debug_assert!(ubs.iter().all(|&ub| opt <= ub + EPS_CMP));
            }
            Err(_) => failed = true,
        }
    }
    if let Some(mm) = mm_lb {
        debug_assert!(lbs.iter().all(|&lb| lb <= mm + EPS_CMP * (1.0 + mm)));
    }
    Ok(InstanceOutcome { values, millis, failed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub key: MetricKey,
    /// `None` when no instance produced this metric (e.g. OPT skipped).
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub count: usize,
    /// Mean wall time per instance.
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub rows: Vec<Aggregate>,
    pub instances: usize,
    /// Instances where at least one method failed.
    pub failures: usize,
}

impl CellResult {
    pub fn mean(&self, metric: Metric, method: Method, k: Option<usize>) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.key == MetricKey { metric, method, k })
            .and_then(|r| r.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResults {
    pub cells: Vec<CellResult>,
}

fn aggregate(key: MetricKey, values: &[f64], millis: f64) -> Aggregate {
    let count = values.len();
    if count == 0 {
        return Aggregate {
            key,
            mean: None,
            stderr: None,
            count,
            runtime_ms: millis,
        };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let stderr = if !mean.is_finite() {
        f64::INFINITY
    } else if count < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    };
    Aggregate {
        key,
        mean: Some(mean),
        stderr: Some(stderr),
        count,
        runtime_ms: millis,
    }
}

fn run_cell(grid: &ExperimentGrid, cell: Cell) -> CellResult {
    let keys = metric_keys(&grid.ks, cell.p);
    let want_opt = grid.compute_opt && binomial(cell.n, cell.p).saturating_mul(cell.big_n as u64) <= grid.opt_budget;
    let outcomes: Vec<Option<InstanceOutcome>> = (0..grid.instances as u64)
        .into_par_iter()
        .map(|id| evaluate_instance(grid, cell, &keys, id, want_opt).ok())
        .collect();
    let failures = outcomes.iter().filter(|o| o.as_ref().is_none_or(|o| o.failed)).count();
    let rows = keys
        .iter()
        .enumerate()
        .map(|(i, &key)| {
            let mut values = Vec::new();
            let mut millis = 0.0;
            for o in outcomes.iter().flatten() {
                if let Some(v) = o.values[i] {
                    values.push(v);
                    millis += o.millis[i];
                }
            }
            let per_instance = if values.is_empty() {
                0.0
            } else {
                millis / values.len() as f64
            };
            aggregate(key, &values, per_instance)
        })
        .collect();
    CellResult {
        cell,
        rows,
        instances: grid.instances,
        failures,
    }
}

/// Runs every cell, calling `progress` after each one.
pub fn run_grid_with_progress(grid: &ExperimentGrid, mut progress: impl FnMut(&CellResult)) -> Result<GridResults> {
    grid.validate()?;
    if let Some(dir) = &grid.dump_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::InvalidProblem(format!("cannot create {}: {e}", dir.display())))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidProblem(format!("thread pool: {e}")))?;
    let mut cells = Vec::with_capacity(grid.cells.len());
    for &cell in &grid.cells {
        let result = pool.install(|| run_cell(grid, cell));
        progress(&result);
        cells.push(result);
    }
    Ok(GridResults { cells })
}

pub fn run_grid(grid: &ExperimentGrid) -> Result<GridResults> {
    run_grid_with_progress(grid, |_| {})
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub n: usize,
    pub p: usize,
    pub big_n: usize,
    pub metric: String,
    pub method: String,
    pub k: Option<usize>,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub instances: usize,
    pub runtime_ms: Option<f64>,
}

/// Flattens results into CSV rows. Runtimes are left blank unless
/// `timing` is set, since they vary between runs.
pub fn csv_rows(results: &GridResults, timing: bool) -> Vec<CsvRow> {
    results
        .cells
        .iter()
        .flat_map(|cr| {
            cr.rows.iter().map(move |a| CsvRow {
                n: cr.cell.n,
                p: cr.cell.p,
                big_n: cr.cell.big_n,
                metric: a.key.metric.as_str().to_string(),
                method: a.key.method.as_str().to_string(),
                k: a.key.k,
                value: a.mean,
                stderr: a.stderr,
                instances: a.count,
                runtime_ms: timing.then_some(a.runtime_ms),
            })
        })
        .collect()
}

pub fn write_csv(rows: &[CsvRow]) -> String {
    let opt = |v: Option<f64>| v.map(|v| format_sig(v, 6)).unwrap_or_default();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.p,
            r.big_n,
            r.metric,
            r.method,
            r.k.map(|k| k.to_string()).unwrap_or_default(),
            opt(r.value),
            opt(r.stderr),
            r.instances,
            opt(r.runtime_ms),
        );
    }
    out
}

/// The results table as CSV text, 6 significant digits, fixed row order.
pub fn emit_csv(results: &GridResults, timing: bool) -> String {
    write_csv(&csv_rows(results, timing))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(Error::Syntax {
                line: 1,
                message: "missing CSV header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let err = |m: &str| Error::Syntax {
            line: idx + 1,
            message: m.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(err("expected 10 fields"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| err("invalid integer"));
        let opt_f = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| err("invalid number"))
            }
        };
        rows.push(CsvRow {
            n: int(fields[0])?,
            p: int(fields[1])?,
            big_n: int(fields[2])?,
            metric: fields[3].to_string(),
            method: fields[4].to_string(),
            k: if fields[5].is_empty() {
                None
            } else {
                Some(int(fields[5])?)
            },
            value: opt_f(fields[6])?,
            stderr: opt_f(fields[7])?,
            instances: int(fields[8])?,
            runtime_ms: opt_f(fields[9])?,
        });
    }
    Ok(rows)
}
