//! Command-line front end. All option parsing beyond flag splitting is
//! delegated to the library's key=value handlers so that flags, config
//! files, and in-process callers share one code path and one set of error
//! messages. Precedence: built-in defaults, then `--config` file, then
//! flags (with `IMBSIM_WORKERS` counting as the `--workers` flag).

use clap::{Args, Parser, Subcommand};
use imbsim::datagen::SolverConfig;
use imbsim::report::{self, casestudy::CaseStudyOptions, SimOptions, SolveOptions};
use imbsim::Result;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "imbsim",
    version,
    about = "Simulation study of class-imbalance corrections for logistic risk models"
)]
struct Cli {
    /// Key=value config file for the chosen subcommand (flags override it).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and cache data-generating coefficients per (p, event fraction).
    SolveDgm(SolveArgs),
    /// Run the simulation grid and write records, summaries, and figures.
    Simulate(SimulateArgs),
    /// Fit and evaluate the eight models on a cohort CSV.
    Casestudy(CasestudyArgs),
    /// Re-render figures from an existing per-run records CSV.
    Plot(PlotArgs),
}

/// Flags shared by `solve-dgm` and `simulate` that feed [`SimOptions`].
macro_rules! forward {
    ($pairs:ident, $args:expr, { $($key:literal => $field:ident),* $(,)? }) => {
        $(if let Some(v) = &$args.$field {
            $pairs.push(($key, v.clone()));
        })*
    };
}

#[derive(Args)]
struct SolveArgs {
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
    /// Coefficient cache path (default <out>/coefficients.csv).
    #[arg(long)]
    coefficients: Option<String>,
    /// Output directory (location of the default cache).
    #[arg(long)]
    out: Option<String>,
    /// Discrimination target for the solved coefficients.
    #[arg(long = "target-auroc")]
    target_auroc: Option<String>,
    /// `p:event_fraction` pairs, comma separated (default: the full grid).
    #[arg(long)]
    pairs: Option<String>,
    /// Rows per calibration draw inside the solver.
    #[arg(long = "cal-n")]
    cal_n: Option<usize>,
    /// Independent calibration datasets aggregated per pair.
    #[arg(long)]
    datasets: Option<usize>,
    /// Optimizer restarts per calibration dataset.
    #[arg(long)]
    restarts: Option<usize>,
    /// Rows drawn to validate each solved pair.
    #[arg(long = "validate-n")]
    validate_n: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
    /// Monte Carlo runs per scenario.
    #[arg(long)]
    runs: Option<String>,
    /// Common test-set size.
    #[arg(long = "test-n")]
    test_n: Option<String>,
    /// Scenario ids, comma separated, or "all".
    #[arg(long)]
    scenarios: Option<String>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "IMBSIM_WORKERS")]
    workers: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Coefficient cache path (default <out>/coefficients.csv).
    #[arg(long)]
    coefficients: Option<String>,
    /// SMOTE neighbour count.
    #[arg(long = "smote-k")]
    smote_k: Option<String>,
    /// Calibration-curve smoother span.
    #[arg(long = "loess-span")]
    loess_span: Option<String>,
    /// False-positive weight: threshold_odds or inverse_complement.
    #[arg(long = "nb-weight")]
    nb_weight: Option<String>,
    /// Cache entries to use, by discrimination target.
    #[arg(long = "target-auroc")]
    target_auroc: Option<String>,
}

#[derive(Args)]
struct CasestudyArgs {
    /// Cohort CSV (header row required).
    #[arg(long)]
    input: Option<String>,
    /// Outcome column (values 0/1).
    #[arg(long)]
    outcome: Option<String>,
    /// Predictor columns: `name[:ordinal][:spline]`, comma separated.
    #[arg(long)]
    predictors: Option<String>,
    /// Train:test ratio, e.g. 4:1.
    #[arg(long = "split-ratio")]
    split_ratio: Option<String>,
    /// Seed for the split and downstream resampling.
    #[arg(long = "split-seed")]
    split_seed: Option<String>,
    /// Stratify the split by outcome.
    #[arg(long)]
    stratified: bool,
    /// Probability thresholds; numbers and/or the token `train_rate`.
    #[arg(long)]
    thresholds: Option<String>,
    /// Models to fit: "all" or `dataset:algorithm` pairs.
    #[arg(long)]
    methods: Option<String>,
    /// SMOTE neighbour count.
    #[arg(long = "smote-k")]
    smote_k: Option<String>,
    /// Bootstrap replicates for confidence intervals.
    #[arg(long)]
    bootstrap: Option<String>,
    /// Calibration-curve smoother span.
    #[arg(long = "loess-span")]
    loess_span: Option<String>,
    /// False-positive weight: threshold_odds or inverse_complement.
    #[arg(long = "nb-weight")]
    nb_weight: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct PlotArgs {
    /// Per-run records CSV produced by `simulate`.
    #[arg(long)]
    records: PathBuf,
    /// Output directory for the figures.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn sim_options(config: Option<&PathBuf>, pairs: &[(&str, String)]) -> Result<SimOptions> {
    let mut opts = SimOptions::default();
    if let Some(path) = config {
        opts.apply_file(path)?;
    }
    for (key, value) in pairs {
        opts.apply_kv(key, value)?;
    }
    Ok(opts)
}

fn run_solve(config: Option<&PathBuf>, args: &SolveArgs, log: &mut dyn Write) -> Result<()> {
    let mut pairs: Vec<(&str, String)> = Vec::new();
    forward!(pairs, args, {
        "seed" => seed,
        "coefficients" => coefficients,
        "out" => out,
        "target_auroc" => target_auroc,
    });
    let sim = sim_options(config, &pairs)?;
    let mut solver = SolverConfig::default();
    if let Some(n) = args.cal_n {
        solver.n_calibration = n;
    }
    if let Some(n) = args.datasets {
        solver.n_datasets = n;
    }
    if let Some(n) = args.restarts {
        solver.n_restarts = n;
    }
    let opts = SolveOptions {
        seed: sim.seed,
        cache_path: sim.coefficients_path(),
        pairs: match &args.pairs {
            Some(spec) => report::parse_pairs(spec)?,
            None => report::grid_pairs(),
        },
        target_auroc: sim.target_auroc,
        solver,
        validation_n: args.validate_n.unwrap_or(100_000),
    };
    report::cmd_solve(&opts, log)?;
    writeln!(log, "cache: {}", opts.cache_path.display())?;
    Ok(())
}

fn run_simulate(config: Option<&PathBuf>, args: &SimulateArgs, log: &mut dyn Write) -> Result<()> {
    let mut pairs: Vec<(&str, String)> = Vec::new();
    forward!(pairs, args, {
        "seed" => seed,
        "runs" => runs,
        "test_n" => test_n,
        "scenarios" => scenarios,
        "workers" => workers,
        "out" => out,
        "coefficients" => coefficients,
        "smote_k" => smote_k,
        "loess_span" => loess_span,
        "nb_weight" => nb_weight,
        "target_auroc" => target_auroc,
    });
    let opts = sim_options(config, &pairs)?;
    let outcome = report::cmd_simulate(&opts, log)?;
    writeln!(log, "records: {}", outcome.records_path.display())?;
    writeln!(log, "summary: {}", outcome.summary_path.display())?;
    writeln!(log, "exclusions: {}", outcome.exclusions_path.display())?;
    writeln!(log, "figures: {} files in {}", outcome.figure_paths.len(), opts.out_dir.display())?;
    Ok(())
}

fn run_casestudy(
    config: Option<&PathBuf>,
    args: &CasestudyArgs,
    log: &mut dyn Write,
) -> Result<()> {
    let mut opts = CaseStudyOptions::default();
    if let Some(path) = config {
        opts.apply_file(path)?;
    }
    let mut pairs: Vec<(&str, String)> = Vec::new();
    forward!(pairs, args, {
        "input" => input,
        "outcome" => outcome,
        "predictors" => predictors,
        "split_ratio" => split_ratio,
        "split_seed" => split_seed,
        "thresholds" => thresholds,
        "methods" => methods,
        "smote_k" => smote_k,
        "bootstrap" => bootstrap,
        "loess_span" => loess_span,
        "nb_weight" => nb_weight,
        "out" => out,
    });
    if args.stratified {
        pairs.push(("stratified", "true".to_string()));
    }
    for (key, value) in &pairs {
        opts.apply_kv(key, value)?;
    }
    let outcome = report::cmd_casestudy(&opts, log)?;
    writeln!(log, "metrics: {}", outcome.metrics_path.display())?;
    writeln!(log, "figures: {} files in {}", outcome.figure_paths.len(), opts.out_dir.display())?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let stdout = std::io::stdout();
    let mut log = stdout.lock();
    match &cli.command {
        Command::SolveDgm(args) => run_solve(cli.config.as_ref(), args, &mut log),
        Command::Simulate(args) => run_simulate(cli.config.as_ref(), args, &mut log),
        Command::Casestudy(args) => run_casestudy(cli.config.as_ref(), args, &mut log),
        Command::Plot(args) => {
            if cli.config.is_some() {
                return Err(imbsim::Error::Config(
                    "the plot subcommand takes no config file".into(),
                ));
            }
            let figures = report::cmd_plot(&args.records, &args.out)?;
            writeln!(log, "figures: {} files in {}", figures.len(), args.out.display())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
