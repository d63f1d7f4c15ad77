//! Ensemble error decompositions evaluated on a finite sample, plus Monte
//! Carlo checks of the linear first-order theory (see [`theory`]).
//!
//! All expectations are averages over the evaluation rows. Learners in a
//! bagged subspace ensemble are exchangeable, so the expected residual
//! `E[h_i − f]` is taken as the pooled mean residual `b̄` over learners and
//! rows. With that shared centering the three decompositions are exact
//! identities on any sample:
//!
//! ```text
//! err(H) = err̄ − ambī
//! err(H) = b̄² + var̄ / T + (1 − 1/T) covar̄
//! err(H) = err̄ − (1 − 1/T)(var̄ − covar̄)
//! ```

pub mod theory;

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleModel;
use crate::error::{invalid, Result};
use crate::matrix::DataMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// Mean over learners and rows of `(h_i − y)²`.
    pub avg_err: f64,
    /// Mean over learners and rows of `(h_i − H)²`.
    pub avg_ambiguity: f64,
    /// Mean over rows of `(H − y)²`.
    pub ensemble_err: f64,
    pub avg_variance: f64,
    /// Pairwise mean with `T(T − 1)` normalization; 0 when `T = 1`.
    pub avg_covariance: f64,
    pub avg_bias_sq: f64,
    pub ensemble_size: usize,
    pub n_eval: usize,
}

impl DecompositionReport {
    /// `err̄ − ambī`.
    pub fn error_ambiguity_rhs(&self) -> f64 {
        self.avg_err - self.avg_ambiguity
    }

    /// `b̄² + var̄/T + (1 − 1/T) covar̄`.
    pub fn bias_variance_covariance_rhs(&self) -> f64 {
        let t = self.ensemble_size as f64;
        self.avg_bias_sq + self.avg_variance / t + (1.0 - 1.0 / t) * self.avg_covariance
    }

    /// `err̄ − (1 − 1/T)(var̄ − covar̄)`.
    pub fn error_variance_covariance_rhs(&self) -> f64 {
        let t = self.ensemble_size as f64;
        self.avg_err - (1.0 - 1.0 / t) * (self.avg_variance - self.avg_covariance)
    }
}

/// Decomposes an ensemble's error on `(x, y)` (raw-feature rows).
pub fn decompose(model: &EnsembleModel, x: &DataMatrix, y: &[f64]) -> Result<DecompositionReport> {
    let members = model.predict_members(x)?;
    decompose_predictions(&members, y)
}

/// Decomposition from per-learner predictions `members[i][row]`.
pub fn decompose_predictions(members: &[Vec<f64>], y: &[f64]) -> Result<DecompositionReport> {
    let t = members.len();
    let n = y.len();
    if t == 0 {
        return invalid("need at least one learner");
    }
    if n == 0 {
        return invalid("evaluation set is empty");
    }
    if let Some(bad) = members.iter().find(|p| p.len() != n) {
        return invalid(format!("learner produced {} predictions for {n} targets", bad.len()));
    }
    let (tf, nf) = (t as f64, n as f64);

    let mut ensemble = vec![0.0; n];
    let mut bias = 0.0;
    for preds in members {
        for ((h, p), target) in ensemble.iter_mut().zip(preds).zip(y) {
            *h += p;
            bias += p - target;
        }
    }
    ensemble.iter_mut().for_each(|h| *h /= tf);
    bias /= tf * nf;

    let mut err_sum = 0.0;
    let mut ambi_sum = 0.0;
    let mut var_sum = 0.0;
    let mut cross_sum = 0.0;
    let mut ens_err_sum = 0.0;
    for row in 0..n {
        let (target, h) = (y[row], ensemble[row]);
        ens_err_sum += (h - target).powi(2);
        let mut dev_total = 0.0;
        let mut dev_sq = 0.0;
        for preds in members {
            let p = preds[row];
            err_sum += (p - target).powi(2);
            ambi_sum += (p - h).powi(2);
            let dev = p - target - bias;
            dev_total += dev;
            dev_sq += dev * dev;
        }
        var_sum += dev_sq;
        cross_sum += dev_total * dev_total - dev_sq;
    }

    let report = DecompositionReport {
        avg_err: err_sum / (tf * nf),
        avg_ambiguity: ambi_sum / (tf * nf),
        ensemble_err: ens_err_sum / nf,
        avg_variance: var_sum / (tf * nf),
        avg_covariance: if t > 1 { cross_sum / (tf * (tf - 1.0) * nf) } else { 0.0 },
        avg_bias_sq: bias * bias,
        ensemble_size: t,
        n_eval: n,
    };
    debug_assert!(
        (report.ensemble_err - report.error_ambiguity_rhs()).abs() <= 1e-9 * report.avg_err.max(f64::MIN_POSITIVE),
        "error-ambiguity identity violated"
    );
    Ok(report)
}
