use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use offpolicy::bandit::Imputation;
use offpolicy::harness::oracle_check::ORACLE_TOLERANCE;
use offpolicy::harness::{
    load_csv_dataset, run_eval_protocol, run_opt_protocol, run_oracle_check, run_shift_protocol, to_csv,
    EvalProtocolConfig, LoadOptions, Manifest, OptProtocolConfig, ReportRow,
};
use offpolicy::learners::{BinaryTreeConfig, DlmConfig, LearnerKind};
use offpolicy::oracle::load_instance;
use offpolicy::shift::{SamplingCurve, ShiftConfig, ShiftPopulation, DEFAULT_FRACTIONS};
use offpolicy::{Error, Execution, Result};

#[derive(Parser)]
#[command(name = "offpolicy", version, about = "Off-policy evaluation and learning for contextual bandits")]
struct Cli {
    /// Write the CSV report here (plus `<out>.manifest`) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a DLM policy with DM, IPS and DR over repeated reveals.
    Eval(EvalArgs),
    /// Learn policies from IPS- and DR-imputed bandit feedback.
    Learn(LearnArgs),
    /// Covariate-shift experiment on a synthetic or loaded population.
    Shift(ShiftArgs),
    /// Check closed-form bias and variance against exact enumeration.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file: numeric features, 1-based class label last.
    dataset: PathBuf,
    /// Do not append a constant-1 feature.
    #[arg(long)]
    no_bias: bool,
    /// Z-score feature columns.
    #[arg(long)]
    standardize: bool,
}

impl DataArgs {
    fn options(&self) -> LoadOptions {
        LoadOptions { bias: !self.no_bias, standardize: self.standardize }
    }

    fn name(&self) -> String {
        stem(&self.dataset)
    }
}

#[derive(Args)]
struct DlmArgs {
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
}

impl DlmArgs {
    fn config(&self, execution: Execution) -> DlmConfig {
        DlmConfig {
            restarts: self.restarts,
            max_iterations: self.max_iterations,
            epsilon: self.epsilon,
            execution,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    dlm: DlmArgs,
    #[arg(long, default_value_t = 500)]
    replicates: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    /// Lower bound on logged propensities for IPS and DR (off by default).
    #[arg(long)]
    propensity_floor: Option<f64>,
    /// Also emit every replicate's estimates.
    #[arg(long)]
    per_replicate: bool,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    dlm: DlmArgs,
    #[arg(long, default_value_t = 30)]
    runs: usize,
    /// Learner(s) to train: dlm, ft. Defaults to both.
    #[arg(long, value_delimiter = ',')]
    learner: Vec<LearnerKind>,
    /// Imputation(s): ips, dr. Defaults to both.
    #[arg(long, value_delimiter = ',')]
    impute: Vec<Imputation>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, default_value_t = 8)]
    tree_max_depth: usize,
    #[arg(long, default_value_t = 2)]
    tree_min_leaf: usize,
    /// Also emit every run's test error.
    #[arg(long)]
    per_run: bool,
}

#[derive(Args)]
struct ShiftArgs {
    /// Population CSV to use instead of generating one.
    #[arg(long)]
    population: Option<PathBuf>,
    /// Save the population used to this CSV.
    #[arg(long)]
    export_population: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_FRACTIONS.to_vec())]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 100_000)]
    size: usize,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    /// Average probability that a feature is active.
    #[arg(long, default_value_t = 0.1)]
    sparsity: f64,
    /// Features with a nonzero visit-rate coefficient.
    #[arg(long, default_value_t = 10)]
    active_features: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the Gaussian CDF instead of the density for sampling probabilities.
    #[arg(long)]
    cdf: bool,
    /// Observe every unit (all sampling probabilities 1).
    #[arg(long)]
    uniform_sampling: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Instance files.
    #[arg(required = true)]
    instances: Vec<PathBuf>,
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
}

fn eval(args: &EvalArgs, exec: Execution, manifest: &mut Manifest) -> Result<Vec<ReportRow>> {
    let data = load_csv_dataset(&args.data.dataset, args.data.options())?;
    let config = EvalProtocolConfig {
        replicates: args.replicates,
        train_fraction: args.train_fraction,
        lambda: args.lambda,
        seed: args.seed,
        propensity_floor: args.propensity_floor,
        dlm: args.dlm.config(exec),
        execution: exec,
    };
    manifest
        .push("dataset", args.data.dataset.display())
        .push("examples", data.len())
        .push("classes", data.num_classes)
        .push("bias_feature", !args.data.no_bias)
        .push("standardize", args.data.standardize)
        .push("replicates", config.replicates)
        .push("train_fraction", config.train_fraction)
        .push("lambda", config.lambda)
        .push("propensity_floor", config.propensity_floor.map_or("none".into(), |f| f.to_string()))
        .push("dlm", format!("{:?}", config.dlm))
        .push("seed", config.seed);
    let report = run_eval_protocol(&data, &config)?;
    Ok(report.rows(&args.data.name(), args.per_replicate))
}

fn learn(args: &LearnArgs, exec: Execution, manifest: &mut Manifest) -> Result<Vec<ReportRow>> {
    let data = load_csv_dataset(&args.data.dataset, args.data.options())?;
    let mut config = OptProtocolConfig {
        runs: args.runs,
        train_fraction: args.train_fraction,
        lambda: args.lambda,
        seed: args.seed,
        dlm: args.dlm.config(exec),
        tree: BinaryTreeConfig { max_depth: args.tree_max_depth, min_samples_leaf: args.tree_min_leaf },
        execution: exec,
        ..Default::default()
    };
    if !args.learner.is_empty() {
        config.learners = args.learner.clone();
    }
    if !args.impute.is_empty() {
        config.imputations = args.impute.clone();
    }
    manifest
        .push("dataset", args.data.dataset.display())
        .push("examples", data.len())
        .push("classes", data.num_classes)
        .push("bias_feature", !args.data.no_bias)
        .push("standardize", args.data.standardize)
        .push("runs", config.runs)
        .push("train_fraction", config.train_fraction)
        .push("lambda", config.lambda)
        .push("learners", format!("{:?}", config.learners))
        .push("imputations", format!("{:?}", config.imputations))
        .push("dlm", format!("{:?}", config.dlm))
        .push("tree", format!("{:?}", config.tree))
        .push("seed", config.seed);
    let report = run_opt_protocol(&data, &config)?;
    Ok(report.rows(&args.data.name(), args.per_run))
}

fn shift(args: &ShiftArgs, exec: Execution, manifest: &mut Manifest) -> Result<Vec<ReportRow>> {
    let config = ShiftConfig {
        population_size: args.size,
        feature_dimension: args.dim,
        sparsity: args.sparsity,
        active_features: args.active_features,
        fractions: args.fractions.clone(),
        replicates: args.replicates,
        lambda: args.lambda,
        curve: if args.cdf { SamplingCurve::Cdf } else { SamplingCurve::Density },
        uniform_sampling: args.uniform_sampling,
        seed: args.seed,
        ..Default::default()
    };
    let (population, name) = match &args.population {
        Some(p) => (Some(ShiftPopulation::load(p)?), stem(p)),
        None => (None, "synthetic".to_string()),
    };
    manifest
        .push("population", args.population.as_ref().map_or("synthetic".into(), |p| p.display().to_string()))
        .push("config", format!("{config:?}"));
    if let Some(path) = &args.export_population {
        let pop = match &population {
            Some(p) => p.clone(),
            None => offpolicy::shift::synth_population(
                &config,
                &mut offpolicy::rng::stream(config.seed, "shift-population", 0),
            )?,
        };
        pop.save(path)?;
    }
    let report = run_shift_protocol(&config, population, exec)?;
    Ok(report.rows(&name))
}

fn oracle_check(args: &OracleArgs, manifest: &mut Manifest) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for path in &args.instances {
        let spec = load_instance(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let name = stem(path);
        for check in run_oracle_check(&spec)? {
            if !check.passed() {
                failures.push(format!("{name} {} {}.{}", check.kind, check.model, check.metric));
            }
            rows.push(check.row(&name));
        }
        manifest.push("instance", path.display());
    }
    manifest.push("tolerance", ORACLE_TOLERANCE);
    if let Some(first) = failures.first() {
        emit(&rows, None)?;
        return Err(Error::Degenerate(format!(
            "{} oracle check(s) exceed tolerance {ORACLE_TOLERANCE:e}, first: {first}",
            failures.len()
        )));
    }
    Ok(rows)
}

fn emit(rows: &[ReportRow], out: Option<(&Path, &Manifest)>) -> Result<()> {
    let csv = to_csv(rows);
    match out {
        Some((path, manifest)) => {
            std::fs::write(path, csv)?;
            let mut m = path.as_os_str().to_owned();
            m.push(".manifest");
            manifest.write(PathBuf::from(m))?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    let (name, rows, manifest) = match &cli.command {
        Command::Eval(a) => {
            let mut m = Manifest::new("eval");
            (a.data.name(), eval(a, exec, &mut m)?, m)
        }
        Command::Learn(a) => {
            let mut m = Manifest::new("learn");
            (a.data.name(), learn(a, exec, &mut m)?, m)
        }
        Command::Shift(a) => {
            let mut m = Manifest::new("shift");
            (String::from("shift"), shift(a, exec, &mut m)?, m)
        }
        Command::OracleCheck(a) => {
            let mut m = Manifest::new("oracle-check");
            (String::from("oracle"), oracle_check(a, &mut m)?, m)
        }
    };
    let _ = name;
    emit(&rows, cli.out.as_deref().map(|p| (p, &manifest)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
