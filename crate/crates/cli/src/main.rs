//! `robustkit` command-line front end.
//!
//! Results go to stdout as `key=value` lines (or CSV for `experiment`);
//! diagnostics go to stderr. Exit codes: 0 success, 1 domain error,
//! 2 usage error, 3 enumeration budget exceeded.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use robustkit::bounds::{
    aposteriori_report, exact_minmax_with, maxmin_lower_bound, upper_bound, ExactOptions, DEFAULT_EXACT_BUDGET,
};
use robustkit::experiments::{
    emit_csv, generate_instance, instance_seed, parse_grid_cells, run_grid_with_progress, ExperimentGrid,
};
use robustkit::instance::{parse_instance, serialize_instance};
use robustkit::model::format_sig;
use robustkit::problems::nominal_solve;
use robustkit::scenarios::{
    construct_lp_scenario_with, fixed_scenario_guarantee, midpoint_scenario, worstcase_apriori_bound,
    worstcase_scenario, LpScenarioOptions, RowStrategy,
};
use robustkit::{BinarySolution, ConvexWeights, ProblemSpec, Scenario, UncertaintySet};

const SIG: usize = 6;

#[derive(Parser)]
#[command(
    name = "robustkit",
    version,
    about = "Representative scenarios for min-max robust problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random selection instances.
    Gen(GenArgs),
    /// Build a single scenario and report its a-priori guarantee.
    Construct(ConstructArgs),
    /// Solve for a scenario and report lower/upper bounds on the robust optimum.
    Bounds(BoundsArgs),
    /// Run an experiment grid and write the results as CSV.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    /// Number of scenarios.
    #[arg(long = "N", value_parser = clap::value_parser!(u64).range(1..))]
    big_n: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioMethod {
    Midpoint,
    Worstcase,
    Lp,
}

#[derive(Args)]
struct ConstructArgs {
    /// Instance file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    method: ScenarioMethod,
    /// Subset size for the guarantee; ignored by `worstcase`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Enumerate all subset rows of the scenario LP up front instead of generating them.
    #[arg(long, conflicts_with = "lazy")]
    eager: bool,
    #[arg(long)]
    lazy: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    scenario: ConstructArgs,
    /// Also report the max-min lower bound (selection only).
    #[arg(long)]
    with_maxmin: bool,
    /// Also compute the exact optimum by enumeration.
    #[arg(long)]
    with_exact: bool,
    /// Largest number of subsets or paths `--with-exact` may enumerate.
    #[arg(long, default_value_t = DEFAULT_EXACT_BUDGET)]
    exact_budget: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// File with one `n p N` triple per line, an inline list such as `10,3,10;20,5,10`, or `standard`.
    #[arg(long, default_value = "standard")]
    grid_spec: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Instances per cell.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    /// Subset sizes for the Mid-k and LP-k methods.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    k: Vec<usize>,
    #[arg(long, env = "ROBUSTKIT_WORKERS")]
    workers: Option<usize>,
    /// Fill the runtime_ms column (makes the CSV nondeterministic).
    #[arg(long)]
    timing: bool,
    /// Skip the exact optimum.
    #[arg(long)]
    no_opt: bool,
    /// Skip the exact optimum for cells with C(n,p)·N above this.
    #[arg(long, default_value_t = 200_000_000)]
    opt_budget: u64,
    /// Write every generated instance into this directory.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

fn read_instance(path: &Path) -> anyhow::Result<(UncertaintySet, ProblemSpec)> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_instance(&text).with_context(|| format!("invalid instance {}", path.display()))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| format_sig(v, SIG)).collect::<Vec<_>>().join(",")
}

fn join_items(x: &BinarySolution) -> String {
    x.selected().iter().map(|j| j.to_string()).collect::<Vec<_>>().join(",")
}

/// A scenario with its a-priori guarantee and, when it lies in conv(U), its weights.
struct Built {
    method: &'static str,
    scenario: Scenario,
    weights: Option<ConvexWeights>,
    apriori: f64,
    k: Option<usize>,
    t_star: Option<f64>,
}

fn build(u: &UncertaintySet, spec: &ProblemSpec, args: &ConstructArgs) -> anyhow::Result<Built> {
    let k = args.k as usize;
    Ok(match args.method {
        ScenarioMethod::Midpoint => {
            let scenario = midpoint_scenario(u);
            let apriori = fixed_scenario_guarantee(u, &scenario, k)?;
            let weights = Some(ConvexWeights::uniform(u.num_scenarios()));
            Built {
                method: "midpoint",
                scenario,
                weights,
                apriori,
                k: Some(k),
                t_star: None,
            }
        }
        ScenarioMethod::Worstcase => Built {
            method: "worstcase",
            scenario: worstcase_scenario(u),
            weights: None,
            apriori: worstcase_apriori_bound(u, spec),
            k: None,
            t_star: None,
        },
        ScenarioMethod::Lp => {
            let rows = match (args.eager, args.lazy) {
                (true, _) => RowStrategy::Eager,
                (_, true) => RowStrategy::Lazy,
                _ => RowStrategy::default(),
            };
            let options = LpScenarioOptions {
                rows,
                ..Default::default()
            };
            let lp = construct_lp_scenario_with(u, spec, k, &options)?;
            Built {
                method: "lp",
                apriori: lp.apriori(),
                t_star: Some(lp.t_star),
                scenario: lp.scenario,
                weights: Some(lp.weights),
                k: Some(k),
            }
        }
    })
}

fn print_built(out: &mut impl std::io::Write, b: &Built) -> std::io::Result<()> {
    writeln!(out, "method={}", b.method)?;
    if let Some(k) = b.k {
        writeln!(out, "k={k}")?;
    }
    writeln!(out, "scenario={}", join(b.scenario.values()))?;
    writeln!(out, "apriori={}", format_sig(b.apriori, SIG))?;
    if let Some(t) = b.t_star {
        writeln!(out, "t_star={}", format_sig(t, SIG))?;
    }
    if let Some(w) = &b.weights {
        writeln!(out, "lambda={}", join(w.lambda()))?;
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    let (n, p, big_n) = (args.n as usize, args.p as usize, args.big_n as usize);
    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    for id in 0..args.count {
        let (u, spec) = generate_instance(n, p, big_n, instance_seed(args.seed, n, p, big_n, id))?;
        let path = args.out_dir.join(format!("inst_{id}.txt"));
        fs::write(&path, serialize_instance(&u, &spec)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn cmd_construct(args: &ConstructArgs) -> anyhow::Result<()> {
    let (u, spec) = read_instance(&args.input)?;
    let built = build(&u, &spec, args)?;
    print_built(&mut std::io::stdout().lock(), &built)?;
    Ok(())
}

fn cmd_bounds(args: &BoundsArgs) -> anyhow::Result<()> {
    let (u, spec) = read_instance(&args.scenario.input)?;
    let built = build(&u, &spec, &args.scenario)?;
    let mut out = std::io::stdout().lock();
    print_built(&mut out, &built)?;
    match &built.weights {
        Some(w) => {
            let report = aposteriori_report(&u, &spec, &built.scenario, w, built.apriori, built.k)?;
            let x = nominal_solve(&spec, built.scenario.values())?;
            writeln!(out, "solution={}", join_items(&x))?;
            writeln!(out, "lb={}", format_sig(report.lb, SIG))?;
            writeln!(out, "ub={}", format_sig(report.ub, SIG))?;
            writeln!(out, "aposteriori={}", format_sig(report.aposteriori, SIG))?;
        }
        None => {
            // The element-wise worst case is outside conv(U): only the upper bound is valid.
            let x = nominal_solve(&spec, built.scenario.values())?;
            writeln!(out, "solution={}", join_items(&x))?;
            writeln!(out, "ub={}", format_sig(upper_bound(&u, &x), SIG))?;
            eprintln!("note: no lower bound for a scenario outside the convex hull of the uncertainty set");
        }
    }
    if args.with_maxmin {
        let mm = maxmin_lower_bound(&u, &spec)?;
        writeln!(out, "maxmin_lb={}", format_sig(mm.value, SIG))?;
        writeln!(out, "maxmin_lambda={}", join(mm.weights.lambda()))?;
    }
    if args.with_exact {
        let options = ExactOptions {
            budget: args.exact_budget,
            ..Default::default()
        };
        let (opt, x) = exact_minmax_with(&u, &spec, &options)?;
        writeln!(out, "opt={}", format_sig(opt, SIG))?;
        writeln!(out, "opt_solution={}", join_items(&x))?;
    }
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> anyhow::Result<()> {
    let path = Path::new(&args.grid_spec);
    let spec_text = if path.is_file() {
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?
    } else {
        args.grid_spec.clone()
    };
    let cells = parse_grid_cells(&spec_text).context("invalid grid spec")?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let grid = ExperimentGrid {
        cells,
        instances: args.count as usize,
        master_seed: args.seed,
        ks: args.k.clone(),
        compute_opt: !args.no_opt,
        opt_budget: args.opt_budget,
        lp_options: LpScenarioOptions::default(),
        workers,
        dump_dir: args.dump_dir.clone(),
    };
    let total = grid.cells.len();
    let mut done = 0;
    let results = run_grid_with_progress(&grid, |cell| {
        done += 1;
        let c = cell.cell;
        eprintln!(
            "[{done}/{total}] n={} p={} N={}: {} instances, {} with failures",
            c.n, c.p, c.big_n, cell.instances, cell.failures
        );
    })?;
    let csv = emit_csv(&results, args.timing);
    match &args.out {
        Some(path) => fs::write(path, &csv).with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().lock().write_all(csv.as_bytes())?,
    }
    if !results.cells.is_empty() && results.cells.iter().all(|c| c.failures == c.instances) {
        bail!("every instance in every cell had a failing method");
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<robustkit::Error>() {
        Some(robustkit::Error::TooLarge { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Construct(a) => cmd_construct(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn budget_refusal_maps_to_exit_3() {
        let too_large = anyhow::Error::new(robustkit::Error::TooLarge { count: 10, budget: 1 });
        assert_eq!(exit_code(&too_large), 3);
        let domain = anyhow::Error::new(robustkit::Error::NoPath).context("while reading");
        assert_eq!(exit_code(&domain), 1);
    }

    #[test]
    fn lists_use_significant_digits() {
        assert_eq!(join(&[1.0 / 3.0, 10.0, 0.0]), "0.333333,10,0");
    }
}
