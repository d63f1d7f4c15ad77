use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use qiforest::data::{load_path, preprocess, write_csv, HeaderMode, TargetColumn};
use qiforest::diagnostics::decompose_predictions;
use qiforest::diagnostics::theory::{run_theory_trials, TheoryConfig};
use qiforest::ensemble::{train_on_transformed, EnsembleConfig};
use qiforest::experiment::{
    ensemble_seed, format_sweep, format_table, parse_config, run_experiment, run_sweep, split_rows, to_jsonl,
    ExperimentSpec, RunConfig, SweepParam,
};
use qiforest::synth::{generate, reference_datasets, reference_standins};
use qiforest::{LearnerKind, QiError, SubsetMode};

#[derive(Parser)]
#[command(name = "qiforest", version, about = "Quantum-inspired subspace ensembles versus random subspaces")]
struct Cli {
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare two subset schemes over repeated train/test splits.
    Bench(BenchArgs),
    /// Monte Carlo check of variance, covariance and ambiguity on linear learners.
    Theory(TheoryArgs),
    /// Error decomposition of one trained ensemble on held-out rows.
    Decompose(DecomposeArgs),
    /// Write the built-in synthetic stand-in datasets as CSV files.
    Synth(SynthArgs),
}

#[derive(Args, Default)]
struct BenchArgs {
    /// CSV file or directory of CSV files.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use the built-in synthetic stand-in datasets instead of --data.
    #[arg(long)]
    synthetic: bool,
    /// Target column: header name or zero-based index (default: last column).
    #[arg(long)]
    target_col: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// tree | linear
    #[arg(long)]
    learner: Option<LearnerKind>,
    /// Treatment scheme: qis | fraction | uniform
    #[arg(long)]
    mode: Option<SubsetMode>,
    /// Baseline scheme: qis | fraction | uniform
    #[arg(long)]
    baseline: Option<SubsetMode>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON Lines results file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key = value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Fit PCA and target scaling on all rows instead of training rows only.
    #[arg(long)]
    paper_leaky_preprocess: bool,
    /// Treat the first CSV line as data.
    #[arg(long)]
    no_header: bool,
    /// Sweep one parameter, e.g. alpha=0.125,0.25,0.5,1.0 (also trees=, train_frac=).
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 8)]
    dims: usize,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 30)]
    trees: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write per-trial moments as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    /// key = value file with trees, alpha, learner, mode, seed, train_frac.
    #[arg(long)]
    model_config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target_col: Option<String>,
    #[arg(long)]
    no_header: bool,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    learner: Option<LearnerKind>,
    #[arg(long)]
    mode: Option<SubsetMode>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only write datasets whose name contains this string.
    #[arg(long)]
    only: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Bench(args) => bench(args),
        Command::Theory(args) => theory(args),
        Command::Decompose(args) => decompose_cmd(args),
        Command::Synth(args) => synth(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &QiError) -> ExitCode {
    match e {
        QiError::InvalidInput(_) => ExitCode::from(1),
        QiError::DegenerateData(_) | QiError::Io(_) => ExitCode::from(2),
    }
}

/// Flag value, else config-file value, else default.
fn pick<T: FromStr>(flag: Option<T>, file: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, QiError>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(raw) => raw.parse().map_err(|e| QiError::InvalidInput(format!("config key '{key}': {e}"))),
        None => Ok(default),
    }
}

fn read_config(path: Option<&Path>) -> Result<BTreeMap<String, String>, QiError> {
    match path {
        Some(p) => parse_config(&std::fs::read_to_string(p)?),
        None => Ok(BTreeMap::new()),
    }
}

fn target_for(raw: Option<String>) -> Result<Option<TargetColumn>, QiError> {
    raw.map(|s| s.parse()).transpose()
}

fn load_inputs(data: &Path, target: Option<TargetColumn>, no_header: bool) -> Result<Vec<qiforest::Dataset>, QiError> {
    let header = if no_header { HeaderMode::Absent } else { HeaderMode::Auto };
    match target {
        Some(t) => load_path(data, &t, header),
        None => {
            // Default target: last column of each file.
            let probe = load_path(data, &TargetColumn::Index(0), header)?;
            probe
                .iter()
                .map(|ds| {
                    let path = ds.source_path.as_deref().unwrap_or(data);
                    let last = TargetColumn::Index(ds.dimension());
                    qiforest::load_csv(path, &last, header)
                })
                .collect()
        }
    }
}

fn bench(args: BenchArgs) -> Result<ExitCode, QiError> {
    let file = read_config(args.config.as_deref())?;
    let defaults = RunConfig::default();
    let config = RunConfig {
        alpha: pick(args.alpha, &file, "alpha", defaults.alpha)?,
        ensemble_size: pick(args.trees, &file, "trees", defaults.ensemble_size)?,
        train_fraction: pick(args.train_frac, &file, "train_frac", defaults.train_fraction)?,
        repeats: pick(args.repeats, &file, "repeats", defaults.repeats)?,
        learner: pick(args.learner, &file, "learner", defaults.learner)?,
        treatment: pick(args.mode, &file, "mode", defaults.treatment)?,
        baseline: pick(args.baseline, &file, "baseline", defaults.baseline)?,
        leaky_preprocess: args.paper_leaky_preprocess || pick(None, &file, "paper_leaky_preprocess", false)?,
    };
    config.validate()?;
    let seed = pick(args.seed, &file, "seed", 0u64)?;
    let threads = pick(args.threads, &file, "threads", 0usize)?;
    let no_header = args.no_header || pick(None, &file, "no_header", false)?;
    let synthetic = args.synthetic || pick(None, &file, "synthetic", false)?;
    let out = args.out.or_else(|| file.get("out").map(PathBuf::from));
    let data = args.data.or_else(|| file.get("data").map(PathBuf::from));
    let target = target_for(args.target_col.or_else(|| file.get("target_col").cloned()))?;
    let sweep = args.sweep.or_else(|| file.get("sweep").cloned());

    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| QiError::InvalidInput(format!("thread pool: {e}")))?;
    }

    let datasets = match (data, synthetic) {
        (Some(_), true) => return Err(QiError::InvalidInput("--data and --synthetic are exclusive".into())),
        (Some(path), false) => load_inputs(&path, target, no_header)?,
        (None, true) => reference_datasets(seed)?,
        (None, false) => return Err(QiError::InvalidInput("one of --data or --synthetic is required".into())),
    };
    let spec = ExperimentSpec::new(datasets, config, seed);

    if let Some(sweep) = sweep {
        let (param, values) = parse_sweep(&sweep)?;
        let points = run_sweep(&spec, param, &values)?;
        print!("{}", format_sweep(param, &points));
        if let Some(path) = out {
            let rows: Vec<_> = points.iter().flat_map(|p| p.report.rows.iter().cloned()).collect();
            std::fs::write(path, to_jsonl(&rows)?)?;
        }
        return Ok(ExitCode::SUCCESS);
    }

    let report = run_experiment(&spec)?;
    if !report.rows.is_empty() {
        print!("{}", format_table(&report.rows));
    }
    if let Some(path) = out {
        std::fs::write(path, to_jsonl(&report.rows)?)?;
    }
    for f in &report.failures {
        eprintln!("error: {}: {}", f.dataset, f.error);
    }
    Ok(if report.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn parse_sweep(raw: &str) -> Result<(SweepParam, Vec<f64>), QiError> {
    let (name, list) =
        raw.split_once('=').ok_or_else(|| QiError::InvalidInput(format!("sweep '{raw}': expected param=v1,v2,...")))?;
    let values = list
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| QiError::InvalidInput(format!("sweep value '{v}': {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(QiError::InvalidInput("sweep needs at least one value".into()));
    }
    Ok((name.parse()?, values))
}

fn theory(args: TheoryArgs) -> Result<ExitCode, QiError> {
    let cfg = TheoryConfig {
        m_dims: args.dims,
        n_samples: args.samples,
        sigma: args.sigma,
        k: args.k,
        t_ensemble: args.trees,
        trials: args.trials,
        noise: args.noise,
    };
    let r = run_theory_trials(&cfg, args.seed)?;
    println!("scheme      E[var]      E[covar]    E[ambi]     E[err_avg]  E[err_ens]");
    for (name, m) in [("RS", &r.rs), ("QI-true", &r.qi_true), ("QI-fitted", &r.qi_fitted)] {
        println!(
            "{name:<11} {:<11.5} {:<11.5} {:<11.5} {:<11.5} {:.5}",
            m.var, m.covar, m.ambi, m.avg_err, m.ensemble_err
        );
    }
    println!(
        "trials with QI > RS: var {}  covar {}  ambi {}  (of {})",
        r.qi_exceeds_rs(|m| m.var),
        r.qi_exceeds_rs(|m| m.covar),
        r.qi_exceeds_rs(|m| m.ambi),
        r.trial_count
    );
    if let Some(path) = args.out {
        let json = serde_json::to_string_pretty(&r).map_err(|e| QiError::InvalidInput(e.to_string()))?;
        std::fs::write(path, json)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn decompose_cmd(args: DecomposeArgs) -> Result<ExitCode, QiError> {
    let file = read_config(args.model_config.as_deref())?;
    let defaults = EnsembleConfig::default();
    let train_frac = pick(args.train_frac, &file, "train_frac", 0.6)?;
    let master = pick(args.seed, &file, "seed", 0u64)?;
    let mut datasets = load_inputs(&args.data, target_for(args.target_col)?, args.no_header)?;
    if datasets.len() != 1 {
        return Err(QiError::InvalidInput("decompose takes a single CSV file".into()));
    }
    let ds = datasets.remove(0);
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(QiError::InvalidInput(format!("train fraction must lie in (0, 1), got {train_frac}")));
    }
    let cfg = EnsembleConfig {
        ensemble_size: pick(args.trees, &file, "trees", defaults.ensemble_size)?,
        alpha: pick(args.alpha, &file, "alpha", defaults.alpha)?,
        learner: pick(args.learner, &file, "learner", defaults.learner)?,
        subset_mode: pick(args.mode, &file, "mode", defaults.subset_mode)?,
        bootstrap: pick(None, &file, "bootstrap", true)?,
        seed: ensemble_seed(master, &ds.name, 0),
    };
    cfg.validate()?;

    let (train, test) = split_rows(ds.instances(), train_frac, master, &ds.name, 0);
    let (pre, transformed) = preprocess(&ds, &train)?;
    let tr = transformed.subset_rows(&train)?;
    let te = transformed.subset_rows(&test)?;
    let model = train_on_transformed(pre.pca().clone(), &tr.x, &tr.y, &cfg)?;
    let report = decompose_predictions(&model.predict_members_transformed(&te.x)?, &te.y)?;

    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| QiError::InvalidInput(e.to_string()))?);
    } else {
        println!("dataset            {}", ds.name);
        println!("learners           {}", report.ensemble_size);
        println!("test rows          {}", report.n_eval);
        println!("ensemble error     {:.6}", report.ensemble_err);
        println!("mean error         {:.6}", report.avg_err);
        println!("mean ambiguity     {:.6}", report.avg_ambiguity);
        println!("bias^2             {:.6}", report.avg_bias_sq);
        println!("mean variance      {:.6}", report.avg_variance);
        println!("mean covariance    {:.6}", report.avg_covariance);
        println!("err - ambi         {:.6}", report.error_ambiguity_rhs());
        println!("bias/var/covar     {:.6}", report.bias_variance_covariance_rhs());
        println!("err/var/covar      {:.6}", report.error_variance_covariance_rhs());
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(args: SynthArgs) -> Result<ExitCode, QiError> {
    std::fs::create_dir_all(&args.out)?;
    for spec in reference_standins() {
        if args.only.as_ref().is_some_and(|s| !spec.name.contains(s.as_str())) {
            continue;
        }
        let ds = generate(&spec, args.seed)?;
        let file = args.out.join(format!("{}.csv", spec.name.replace(' ', "_")));
        write_csv(&ds, &file, "target")?;
        println!("{} ({}x{})", file.display(), ds.instances(), ds.dimension());
    }
    Ok(ExitCode::SUCCESS)
}
