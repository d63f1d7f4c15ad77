//! Repeated train/test benchmark comparing two subset schemes under identical
//! splits and bootstrap draws, plus text and JSON Lines reporting.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{preprocess, Dataset};
use crate::ensemble::{mse, train_on_transformed, EnsembleConfig, EnsembleModel};
use crate::error::{invalid, QiError, Result};
use crate::learners::LearnerKind;
use crate::qis::SubsetMode;
use crate::rng::{derive_seed, name_key, stream, TAG_ENSEMBLE, TAG_SPLIT};

pub const MIN_INSTANCES: usize = 10;

/// Comparison outcome from the treatment's point of view (lower MSE wins).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "++")]
    SignificantlyBetter,
    #[serde(rename = "+")]
    Better,
    #[serde(rename = "=")]
    Tie,
    #[serde(rename = "-")]
    Worse,
    #[serde(rename = "--")]
    SignificantlyWorse,
}

impl Verdict {
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::SignificantlyBetter => "++",
            Verdict::Better => "+",
            Verdict::Tie => "=",
            Verdict::Worse => "-",
            Verdict::SignificantlyWorse => "--",
        }
    }

    /// Significant when the mean gap exceeds `2·√(sd_t² + sd_b²)/√repeats`;
    /// any smaller nonzero gap gives `+` or `-`.
    pub fn compare(treatment: (f64, f64), baseline: (f64, f64), repeats: usize) -> Verdict {
        let gap = baseline.0 - treatment.0;
        let threshold = 2.0 * (treatment.1.powi(2) + baseline.1.powi(2)).sqrt() / (repeats.max(1) as f64).sqrt();
        if gap == 0.0 {
            Verdict::Tie
        } else if gap > threshold {
            Verdict::SignificantlyBetter
        } else if gap > 0.0 {
            Verdict::Better
        } else if -gap > threshold {
            Verdict::SignificantlyWorse
        } else {
            Verdict::Worse
        }
    }

    pub fn is_significant(self) -> bool {
        matches!(self, Verdict::SignificantlyBetter | Verdict::SignificantlyWorse)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Conventional column label for a scheme/learner pair.
pub fn scheme_label(mode: SubsetMode, learner: LearnerKind) -> &'static str {
    match (mode, learner) {
        (SubsetMode::FractionTransition, LearnerKind::Tree) => "QI-Forest",
        (SubsetMode::FractionOnly, LearnerKind::Tree) => "F-Forest",
        (SubsetMode::Uniform, LearnerKind::Tree) => "R-Forest",
        (SubsetMode::FractionTransition, LearnerKind::Linear) => "QIE-LR",
        (SubsetMode::FractionOnly, LearnerKind::Linear) => "FE-LR",
        (SubsetMode::Uniform, LearnerKind::Linear) => "RE-LR",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub ensemble_size: usize,
    pub train_fraction: f64,
    pub repeats: usize,
    pub learner: LearnerKind,
    pub treatment: SubsetMode,
    pub baseline: SubsetMode,
    pub leaky_preprocess: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            ensemble_size: 30,
            train_fraction: 0.6,
            repeats: 15,
            learner: LearnerKind::Tree,
            treatment: SubsetMode::FractionTransition,
            baseline: SubsetMode::Uniform,
            leaky_preprocess: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return invalid(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.ensemble_size == 0 {
            return invalid("ensemble size must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return invalid(format!("train fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.repeats == 0 {
            return invalid("repeats must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub datasets: Vec<Dataset>,
    pub config: RunConfig,
    pub master_seed: u64,
}

impl ExperimentSpec {
    pub fn new(datasets: Vec<Dataset>, config: RunConfig, master_seed: u64) -> Self {
        Self { datasets, config, master_seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub instances: usize,
    pub dimension: usize,
    pub treatment_label: String,
    pub baseline_label: String,
    pub treatment_mean: f64,
    pub treatment_std: f64,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    pub verdict: Verdict,
    pub treatment_mses: Vec<f64>,
    pub baseline_mses: Vec<f64>,
    pub config: RunConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFailure {
    pub dataset: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<DatasetFailure>,
}

/// One repeat's test errors and the digests of the draws both arms consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatOutcome {
    pub treatment_mse: f64,
    pub baseline_mse: f64,
    pub split_digest: u64,
    pub treatment_bootstrap_digest: u64,
    pub baseline_bootstrap_digest: u64,
}

/// Shuffled `(train, test)` row indices; both sides keep at least one row.
pub fn split_rows(n: usize, train_fraction: f64, seed: u64, dataset: &str, repeat: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = stream(seed, &[TAG_SPLIT, name_key(dataset), repeat as u64]);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let test = order.split_off(n_train);
    (order, test)
}

pub fn ensemble_seed(master: u64, dataset: &str, repeat: usize) -> u64 {
    derive_seed(master, &[TAG_ENSEMBLE, name_key(dataset), repeat as u64])
}

fn digest(values: &[usize]) -> u64 {
    values.iter().fold(0xcbf2_9ce4_8422_2325, |h, &v| {
        (v as u64).to_le_bytes().iter().fold(h, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
    })
}

/// Runs treatment and baseline on one split of `ds`.
pub fn run_repeat(ds: &Dataset, config: &RunConfig, master_seed: u64, repeat: usize) -> Result<RepeatOutcome> {
    config.validate()?;
    let n = ds.instances();
    if n < MIN_INSTANCES {
        return invalid(format!("{}: {n} instances, need at least {MIN_INSTANCES}", ds.name));
    }
    let (train, test) = split_rows(n, config.train_fraction, master_seed, &ds.name, repeat);
    let fit_rows: Vec<usize> = if config.leaky_preprocess { (0..n).collect() } else { train.clone() };
    let (pre, transformed) = preprocess(ds, &fit_rows)?;
    let train_set = transformed.subset_rows(&train)?;
    let test_set = transformed.subset_rows(&test)?;

    let seed = ensemble_seed(master_seed, &ds.name, repeat);
    let fit = |mode: SubsetMode| -> Result<(EnsembleModel, f64)> {
        let cfg = EnsembleConfig {
            ensemble_size: config.ensemble_size,
            alpha: config.alpha,
            learner: config.learner,
            subset_mode: mode,
            bootstrap: true,
            seed,
        };
        let model = train_on_transformed(pre.pca().clone(), &train_set.x, &train_set.y, &cfg)?;
        let err = mse(&model.predict_transformed(&test_set.x)?, &test_set.y)?;
        Ok((model, err))
    };
    let (treated, treatment_mse) = fit(config.treatment)?;
    let (base, baseline_mse) = fit(config.baseline)?;

    let outcome = RepeatOutcome {
        treatment_mse,
        baseline_mse,
        split_digest: digest(&train),
        treatment_bootstrap_digest: treated.bootstrap_digest(),
        baseline_bootstrap_digest: base.bootstrap_digest(),
    };
    log::debug!(
        "{} repeat {repeat}: split {:016x} bootstrap {:016x}/{:016x} mse {:.6}/{:.6}",
        ds.name,
        outcome.split_digest,
        outcome.treatment_bootstrap_digest,
        outcome.baseline_bootstrap_digest,
        treatment_mse,
        baseline_mse
    );
    Ok(outcome)
}

fn mean_and_sample_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates per-repeat errors into a row.
pub fn summarize(ds: &Dataset, config: &RunConfig, seed: u64, outcomes: &[RepeatOutcome]) -> ResultRow {
    let treatment_mses: Vec<f64> = outcomes.iter().map(|o| o.treatment_mse).collect();
    let baseline_mses: Vec<f64> = outcomes.iter().map(|o| o.baseline_mse).collect();
    let t = mean_and_sample_std(&treatment_mses);
    let b = mean_and_sample_std(&baseline_mses);
    ResultRow {
        dataset: ds.name.clone(),
        instances: ds.instances(),
        dimension: ds.dimension(),
        treatment_label: scheme_label(config.treatment, config.learner).to_string(),
        baseline_label: scheme_label(config.baseline, config.learner).to_string(),
        treatment_mean: t.0,
        treatment_std: t.1,
        baseline_mean: b.0,
        baseline_std: b.1,
        verdict: Verdict::compare(t, b, outcomes.len()),
        treatment_mses,
        baseline_mses,
        config: config.clone(),
        seed,
    }
}

/// Runs every (dataset, repeat) pair, in parallel, and aggregates in input
/// order. A dataset that fails is reported in `failures` without affecting
/// the others.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let cfg = &spec.config;
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..spec.datasets.len()).flat_map(|d| (0..cfg.repeats).map(move |r| (d, r))).collect();
    let results: Vec<Result<RepeatOutcome>> =
        jobs.par_iter().map(|&(d, r)| run_repeat(&spec.datasets[d], cfg, spec.master_seed, r)).collect();

    let mut report = ExperimentReport::default();
    for (d, ds) in spec.datasets.iter().enumerate() {
        let chunk = &results[d * cfg.repeats..(d + 1) * cfg.repeats];
        match chunk.iter().find_map(|r| r.as_ref().err()) {
            None => {
                let outcomes: Vec<RepeatOutcome> = chunk.iter().flatten().cloned().collect();
                report.rows.push(summarize(ds, cfg, spec.master_seed, &outcomes));
            }
            Some(e) => {
                log::error!("{}: {e}", ds.name);
                report.failures.push(DatasetFailure { dataset: ds.name.clone(), error: e.to_string() });
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    EnsembleSize,
    TrainFraction,
}

impl std::str::FromStr for SweepParam {
    type Err = QiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha" => Ok(SweepParam::Alpha),
            "trees" | "t" | "ensemble_size" => Ok(SweepParam::EnsembleSize),
            "train_frac" | "train-frac" | "n" | "train_fraction" => Ok(SweepParam::TrainFraction),
            other => invalid(format!("unknown sweep parameter '{other}'")),
        }
    }
}

/// Averaged errors over all datasets for one setting of a swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub treatment_mean: f64,
    pub baseline_mean: f64,
    pub report: ExperimentReport,
}

impl SweepPoint {
    /// `baseline − treatment`; positive when the treatment wins.
    pub fn gap(&self) -> f64 {
        self.baseline_mean - self.treatment_mean
    }
}

pub fn run_sweep(spec: &ExperimentSpec, param: SweepParam, values: &[f64]) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            let mut config = spec.config.clone();
            match param {
                SweepParam::Alpha => config.alpha = value,
                SweepParam::TrainFraction => config.train_fraction = value,
                SweepParam::EnsembleSize => {
                    if !(value >= 1.0 && value.fract() == 0.0) {
                        return invalid(format!("ensemble size must be a positive integer, got {value}"));
                    }
                    config.ensemble_size = value as usize;
                }
            }
            let sub = ExperimentSpec { datasets: spec.datasets.clone(), config, master_seed: spec.master_seed };
            let report = run_experiment(&sub)?;
            if report.rows.is_empty() {
                return invalid("every dataset failed");
            }
            let k = report.rows.len() as f64;
            Ok(SweepPoint {
                value,
                treatment_mean: report.rows.iter().map(|r| r.treatment_mean).sum::<f64>() / k,
                baseline_mean: report.rows.iter().map(|r| r.baseline_mean).sum::<f64>() / k,
                report,
            })
        })
        .collect()
}

fn render_columns(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell}{}", " ".repeat(widths[c] - cell.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Aligned table: dataset, instances, dimension, both arms as
/// `mean ± std`, verdict.
pub fn format_table(rows: &[ResultRow]) -> String {
    let (t_label, b_label) =
        rows.first().map_or(("Treatment", "Baseline"), |r| (r.treatment_label.as_str(), r.baseline_label.as_str()));
    let mut lines = vec![vec![
        "Data".to_string(),
        "Instances".to_string(),
        "Dimension".to_string(),
        t_label.to_string(),
        b_label.to_string(),
        String::new(),
    ]];
    for r in rows {
        lines.push(vec![
            r.dataset.clone(),
            r.instances.to_string(),
            r.dimension.to_string(),
            format!("{:.4} ± {:.4}", r.treatment_mean, r.treatment_std),
            format!("{:.4} ± {:.4}", r.baseline_mean, r.baseline_std),
            r.verdict.symbol().to_string(),
        ]);
    }
    render_columns(&lines)
}

pub fn format_sweep(param: SweepParam, points: &[SweepPoint]) -> String {
    let name = match param {
        SweepParam::Alpha => "alpha",
        SweepParam::EnsembleSize => "T",
        SweepParam::TrainFraction => "N",
    };
    let (t_label, b_label) = points
        .first()
        .and_then(|p| p.report.rows.first())
        .map_or(("Treatment", "Baseline"), |r| (r.treatment_label.as_str(), r.baseline_label.as_str()));
    let mut lines = vec![vec![name.to_string(), t_label.to_string(), b_label.to_string(), "gap".to_string()]];
    for p in points {
        lines.push(vec![
            format!("{}", p.value),
            format!("{:.4}", p.treatment_mean),
            format!("{:.4}", p.baseline_mean),
            format!("{:+.4}", p.gap()),
        ]);
    }
    render_columns(&lines)
}

/// One JSON object per line, fields in declaration order.
pub fn to_jsonl(rows: &[ResultRow]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).map_err(|e| QiError::InvalidInput(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<ResultRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| QiError::InvalidInput(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Parses `key = value` lines; `#` starts a comment. Dashes in keys are
/// normalized to underscores.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return invalid(format!("config line {}: expected key = value", i + 1));
        };
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return invalid(format!("config line {}: empty key", i + 1));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}
