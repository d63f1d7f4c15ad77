//! Bagged ensembles over feature subsets: Random Forest (uniform subsets),
//! Quantum-Inspired Forest (QIS subsets) and their linear-learner variants,
//! combined by simple averaging.
//!
//! The two forests share every random draw except the subset weights:
//! bootstrap rows for learner `i` come from stream `(seed, BOOTSTRAP, i)` and
//! all subsets are drawn in order from stream `(seed, SUBSETS)`. With equal
//! seeds, a uniform-mode QI forest is therefore bit-identical to a Random
//! Forest, and so is any forest with `alpha = 1`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::learners::{train_learner_on_rows, LearnerKind, TrainedLearner};
use crate::matrix::{check_targets, DataMatrix};
use crate::pca::PcaModel;
use crate::qis::{generate_subsets, subset_size, FeatureSubset, SubsetMode};
use crate::rng::{stream, TAG_BOOTSTRAP, TAG_SUBSETS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub ensemble_size: usize,
    pub alpha: f64,
    pub learner: LearnerKind,
    pub subset_mode: SubsetMode,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 30,
            alpha: 0.5,
            learner: LearnerKind::Tree,
            subset_mode: SubsetMode::FractionTransition,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size == 0 {
            return invalid("ensemble size must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return invalid(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleModel {
    learners: Vec<TrainedLearner>,
    pca: PcaModel,
    config: EnsembleConfig,
    bootstrap_digest: u64,
}

impl EnsembleModel {
    pub fn learners(&self) -> &[TrainedLearner] {
        &self.learners
    }

    pub fn pca(&self) -> &PcaModel {
        &self.pca
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    /// FNV-1a digest of every learner's bootstrap row indices, in learner order.
    pub fn bootstrap_digest(&self) -> u64 {
        self.bootstrap_digest
    }

    pub fn subsets(&self) -> impl Iterator<Item = &FeatureSubset> {
        self.learners.iter().map(|l| l.subset())
    }

    /// Per-learner predictions (`T` vectors of length `n`) on raw-feature rows.
    pub fn predict_members(&self, x: &DataMatrix) -> Result<Vec<Vec<f64>>> {
        let xt = self.pca.transform(x)?;
        self.predict_members_transformed(&xt)
    }

    pub fn predict_members_transformed(&self, xt: &DataMatrix) -> Result<Vec<Vec<f64>>> {
        self.learners.iter().map(|l| l.predict_matrix(xt)).collect()
    }

    pub fn predict_transformed(&self, xt: &DataMatrix) -> Result<Vec<f64>> {
        let members = self.predict_members_transformed(xt)?;
        Ok(average_members(&members, xt.rows()))
    }
}

fn average_members(members: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for preds in members {
        for (o, p) in out.iter_mut().zip(preds) {
            *o += p;
        }
    }
    let t = members.len() as f64;
    out.iter_mut().for_each(|o| *o /= t);
    out
}

/// Simple-averaging prediction `H(x) = (1/T) Σ h_i(x)` on raw-feature rows.
pub fn predict_ensemble(model: &EnsembleModel, x: &DataMatrix) -> Result<Vec<f64>> {
    let xt = model.pca.transform(x)?;
    model.predict_transformed(&xt)
}

/// Algorithm-2 style forest: bootstrap rows plus uniform random subspaces.
pub fn train_random_forest(x: &DataMatrix, y: &[f64], config: &EnsembleConfig) -> Result<EnsembleModel> {
    if config.subset_mode != SubsetMode::Uniform {
        return invalid("random forest requires the uniform subset mode");
    }
    train_ensemble(x, y, config)
}

/// Same as [`train_random_forest`] except subsets come from QIS weights.
pub fn train_qi_forest(x: &DataMatrix, y: &[f64], config: &EnsembleConfig) -> Result<EnsembleModel> {
    if config.subset_mode == SubsetMode::Uniform {
        return invalid("QI forest requires the fraction or fraction-transition subset mode");
    }
    train_ensemble(x, y, config)
}

/// Fits full-rank PCA on `x`, then trains with any subset mode.
pub fn train_ensemble(x: &DataMatrix, y: &[f64], config: &EnsembleConfig) -> Result<EnsembleModel> {
    config.validate()?;
    check_targets(x, y)?;
    let pca = PcaModel::fit(x)?;
    let xt = pca.transform(x)?;
    train_on_transformed(pca, &xt, y, config)
}

/// Trains on data already transformed by `pca` (e.g. PCA fitted elsewhere on
/// the same training rows); `pca` is stored for later prediction.
pub fn train_on_transformed(
    pca: PcaModel,
    xt: &DataMatrix,
    y: &[f64],
    config: &EnsembleConfig,
) -> Result<EnsembleModel> {
    config.validate()?;
    check_targets(xt, y)?;
    if xt.cols() != pca.dims() {
        return invalid(format!("transformed data has {} columns, PCA has {}", xt.cols(), pca.dims()));
    }
    let (n, m) = (xt.rows(), xt.cols());
    let t = config.ensemble_size;
    let k = subset_size(config.alpha, m);

    let mut subset_rng = stream(config.seed, &[TAG_SUBSETS]);
    let subsets = generate_subsets(xt, y, t, k, config.subset_mode, &mut subset_rng)?;

    let row_sets: Vec<Vec<usize>> =
        (0..t).map(|i| if config.bootstrap { bootstrap_rows(config.seed, i, n) } else { (0..n).collect() }).collect();
    let bootstrap_digest = digest_rows(&row_sets);

    let learners = subsets
        .par_iter()
        .zip(row_sets.par_iter())
        .map(|(subset, rows)| train_learner_on_rows(config.learner, xt, y, rows, subset))
        .collect::<Result<Vec<_>>>()?;

    Ok(EnsembleModel { learners, pca, config: config.clone(), bootstrap_digest })
}

/// The `n` row indices, drawn with replacement, used by learner `learner`.
pub fn bootstrap_rows(seed: u64, learner: usize, n: usize) -> Vec<usize> {
    let mut rng = stream(seed, &[TAG_BOOTSTRAP, learner as u64]);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn digest_rows(row_sets: &[Vec<usize>]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for rows in row_sets {
        for &r in rows {
            for b in (r as u64).to_le_bytes() {
                h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

/// Mean squared error `(1/n) Σ (pred − truth)²`.
pub fn mse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return invalid(format!("{} predictions but {} targets", predictions.len(), truth.len()));
    }
    if truth.is_empty() {
        return invalid("cannot score an empty prediction set");
    }
    let sum: f64 = predictions.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(sum / truth.len() as f64)
}
