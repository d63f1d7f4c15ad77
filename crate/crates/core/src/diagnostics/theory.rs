//! Linear first-order analysis of quantum-inspired versus random subspaces.
//!
//! Learners are least-squares regressors on subsets of PCA-transformed
//! (orthogonal) features, so each one reproduces the full-model weights on
//! its subset: `h_i(x) = Σ_{k∈F_i} w_k x_k`. Moments here use inner products
//! over the evaluation rows (sums, not means), matching the convention
//! `‖x_k‖² = s_k²`. Under it, one-feature learners drawn with probabilities
//! `p` have
//!
//! ```text
//! E[var(h_i)]        = Σ_k p_k  w_k² s_k²
//! E[covar(h_i, h_j)] = Σ_k p_k² w_k² s_k²
//! ```

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, QiError, Result};
use crate::learners::train_linear;
use crate::matrix::{ols_solve, DataMatrix};
use crate::pca::PcaModel;
use crate::qis::{fraction_transition_probabilities, sample_subset, FeatureSubset, SubsetMode, SubspaceWeights};
use crate::rng::{stream, Stream, TAG_TRIAL};

const MAX_REDRAWS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig {
    pub m_dims: usize,
    pub n_samples: usize,
    /// Standard deviation of the Gaussian true weights.
    pub sigma: f64,
    pub k: usize,
    pub t_ensemble: usize,
    pub trials: usize,
    /// Standard deviation of additive target noise; 0 reproduces the noiseless derivation.
    pub noise: f64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self { m_dims: 8, n_samples: 200, sigma: 1.0, k: 4, t_ensemble: 30, trials: 100, noise: 0.0 }
    }
}

impl TheoryConfig {
    fn validate(&self) -> Result<()> {
        if self.m_dims == 0 || self.k == 0 || self.k > self.m_dims {
            return invalid(format!("need 1 <= k <= m_dims, got k={} m={}", self.k, self.m_dims));
        }
        if self.n_samples < self.m_dims + 1 {
            return invalid(format!("need more samples than dimensions, got n={} m={}", self.n_samples, self.m_dims));
        }
        if self.trials == 0 || self.t_ensemble == 0 {
            return invalid("trials and ensemble size must be positive");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) || !(self.noise >= 0.0 && self.noise.is_finite()) {
            return invalid("sigma must be positive and noise nonnegative");
        }
        Ok(())
    }
}

/// Ensemble moments for one subset scheme, sum-over-rows convention.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemeMoments {
    /// Mean over learners of `Σ_x (h_i − mean h_i)²`.
    pub var: f64,
    /// Mean over ordered pairs `i ≠ j` of `Σ_x (h_i − mean h_i)(h_j − mean h_j)`.
    pub covar: f64,
    /// `(1/T) Σ_i Σ_x (h_i − H)²`.
    pub ambi: f64,
    /// `(1/T) Σ_i Σ_x (h_i − y)²`.
    pub avg_err: f64,
    /// `Σ_x (H − y)²`.
    pub ensemble_err: f64,
}

impl SchemeMoments {
    fn accumulate(&mut self, other: &SchemeMoments) {
        self.var += other.var;
        self.covar += other.covar;
        self.ambi += other.ambi;
        self.avg_err += other.avg_err;
        self.ensemble_err += other.ensemble_err;
    }

    fn scaled(mut self, factor: f64) -> Self {
        self.var *= factor;
        self.covar *= factor;
        self.ambi *= factor;
        self.avg_err *= factor;
        self.ensemble_err *= factor;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMoments {
    pub rs: SchemeMoments,
    /// QI weights `∝ w_k² s_k²` from the known generating weights.
    pub qi_true: SchemeMoments,
    /// QI weights `∝ t_k² s_k²` from least-squares amplitudes.
    pub qi_fitted: SchemeMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryTrialResult {
    pub trial_count: usize,
    pub rs: SchemeMoments,
    pub qi_true: SchemeMoments,
    pub qi_fitted: SchemeMoments,
    pub trials: Vec<TrialMoments>,
}

impl TheoryTrialResult {
    pub fn e_var_qi(&self) -> f64 {
        self.qi_fitted.var
    }
    pub fn e_var_rs(&self) -> f64 {
        self.rs.var
    }
    pub fn e_cov_qi(&self) -> f64 {
        self.qi_fitted.covar
    }
    pub fn e_cov_rs(&self) -> f64 {
        self.rs.covar
    }
    pub fn e_ambi_qi(&self) -> f64 {
        self.qi_fitted.ambi
    }
    pub fn e_ambi_rs(&self) -> f64 {
        self.rs.ambi
    }

    /// Trials in which `pick(qi) > pick(rs)` for the fitted-amplitude QI scheme.
    pub fn qi_exceeds_rs(&self, pick: impl Fn(&SchemeMoments) -> f64) -> usize {
        self.trials.iter().filter(|t| pick(&t.qi_fitted) > pick(&t.rs)).count()
    }
}

/// Moments of an ensemble's predictions `members[i][row]` against `y`.
pub fn prediction_moments(members: &[Vec<f64>], y: &[f64]) -> SchemeMoments {
    let t = members.len();
    let n = y.len();
    let tf = t as f64;
    let centered: Vec<Vec<f64>> = members
        .iter()
        .map(|p| {
            let mean = p.iter().sum::<f64>() / n as f64;
            p.iter().map(|v| v - mean).collect()
        })
        .collect();

    let mut out = SchemeMoments::default();
    let mut cross = 0.0;
    for row in 0..n {
        let h = members.iter().map(|p| p[row]).sum::<f64>() / tf;
        out.ensemble_err += (h - y[row]).powi(2);
        let mut total = 0.0;
        let mut sq = 0.0;
        for (p, c) in members.iter().zip(&centered) {
            out.ambi += (p[row] - h).powi(2);
            out.avg_err += (p[row] - y[row]).powi(2);
            total += c[row];
            sq += c[row] * c[row];
        }
        out.var += sq;
        cross += total * total - sq;
    }
    out.var /= tf;
    out.ambi /= tf;
    out.avg_err /= tf;
    out.covar = if t > 1 { cross / (tf * (tf - 1.0)) } else { 0.0 };
    out
}

fn scheme_moments(
    xt: &DataMatrix,
    y: &[f64],
    weights: &SubspaceWeights,
    k: usize,
    t: usize,
    rng: &mut Stream,
) -> Result<SchemeMoments> {
    let members = (0..t)
        .map(|_| {
            let subset = sample_subset(weights, k, rng)?;
            train_linear(xt, y, &subset)?.predict_matrix(xt)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(prediction_moments(&members, y))
}

struct TrialData {
    xt: DataMatrix,
    y: Vec<f64>,
    s: Vec<f64>,
    w: Vec<f64>,
}

fn draw_trial(cfg: &TheoryConfig, rng: &mut Stream) -> Result<TrialData> {
    let (n, m) = (cfg.n_samples, cfg.m_dims);
    for _ in 0..MAX_REDRAWS {
        let latent: Vec<f64> = (0..n * m).map(|_| rng.sample(StandardNormal)).collect();
        let mixing: Vec<f64> = (0..m * m).map(|_| rng.sample(StandardNormal)).collect();
        let raw = DataMatrix::new(n, m, latent)?.matmul(&DataMatrix::new(m, m, mixing)?)?;
        let pca = PcaModel::fit(&raw)?;
        let s = pca.singular_values().to_vec();
        if s.iter().any(|&v| v <= 0.0) {
            continue;
        }
        let xt = pca.transform(&raw)?;
        let w: Vec<f64> = (0..m).map(|_| cfg.sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        if w.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut y = xt.mul_vec(&w)?;
        if cfg.noise > 0.0 {
            for v in &mut y {
                *v += cfg.noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        return Ok(TrialData { xt, y, s, w });
    }
    Err(QiError::DegenerateData(format!("no usable draw after {MAX_REDRAWS} attempts")))
}

fn run_trial(cfg: &TheoryConfig, seed: u64, index: usize) -> Result<TrialMoments> {
    let mut rng = stream(seed, &[TAG_TRIAL, index as u64, 0]);
    let data = draw_trial(cfg, &mut rng)?;
    let m = cfg.m_dims;

    let uniform = SubspaceWeights::uniform(m)?;
    let truth = SubspaceWeights::from_masses(
        data.w.iter().zip(&data.s).map(|(w, s)| (w * s).powi(2)).collect(),
        SubsetMode::FractionTransition,
    )?;
    let amplitudes = ols_solve(&data.xt, &data.y)?;
    let fitted = fraction_transition_probabilities(&data.s, &amplitudes)?;

    // common random numbers: every scheme replays the same subset stream
    let subset_stream = || stream(seed, &[TAG_TRIAL, index as u64, 1]);
    let (k, t) = (cfg.k, cfg.t_ensemble);
    Ok(TrialMoments {
        rs: scheme_moments(&data.xt, &data.y, &uniform, k, t, &mut subset_stream())?,
        qi_true: scheme_moments(&data.xt, &data.y, &truth, k, t, &mut subset_stream())?,
        qi_fitted: scheme_moments(&data.xt, &data.y, &fitted, k, t, &mut subset_stream())?,
    })
}

/// Monte Carlo estimate of ensemble moments under random versus
/// quantum-inspired subspaces for Gaussian true weights.
///
/// Each trial draws a correlated Gaussian design, applies full-rank PCA,
/// draws `w ~ N(0, σ²)` in the principal basis and sets `y = X w` (plus
/// optional noise). Trials use independent streams derived from `seed`.
pub fn run_theory_trials(cfg: &TheoryConfig, seed: u64) -> Result<TheoryTrialResult> {
    cfg.validate()?;
    let trials = (0..cfg.trials).into_par_iter().map(|i| run_trial(cfg, seed, i)).collect::<Result<Vec<_>>>()?;

    let mut rs = SchemeMoments::default();
    let mut qi_true = SchemeMoments::default();
    let mut qi_fitted = SchemeMoments::default();
    for t in &trials {
        rs.accumulate(&t.rs);
        qi_true.accumulate(&t.qi_true);
        qi_fitted.accumulate(&t.qi_fitted);
    }
    let scale = 1.0 / trials.len() as f64;
    Ok(TheoryTrialResult {
        trial_count: trials.len(),
        rs: rs.scaled(scale),
        qi_true: qi_true.scaled(scale),
        qi_fitted: qi_fitted.scaled(scale),
        trials,
    })
}

/// Exact probability of every size-`k` subset under sequential
/// draw-remove-renormalize sampling, by enumerating all draw sequences.
pub fn subset_distribution(weights: &SubspaceWeights, k: usize) -> Result<BTreeMap<FeatureSubset, f64>> {
    let m = weights.len();
    if k == 0 || k > m {
        return invalid(format!("subset size {k} must be in [1, {m}]"));
    }
    let mut out = BTreeMap::new();
    let mut taken = vec![false; m];
    let mut picked = Vec::with_capacity(k);
    enumerate_draws(weights.probabilities(), k, 1.0, &mut taken, &mut picked, &mut out);
    Ok(out)
}

fn enumerate_draws(
    p: &[f64],
    k: usize,
    prob: f64,
    taken: &mut [bool],
    picked: &mut Vec<usize>,
    out: &mut BTreeMap<FeatureSubset, f64>,
) {
    if picked.len() == k {
        let subset = FeatureSubset::new(picked.clone(), p.len()).expect("distinct in-range draws");
        *out.entry(subset).or_insert(0.0) += prob;
        return;
    }
    let total: f64 = (0..p.len()).filter(|&j| !taken[j]).map(|j| p[j]).sum();
    let free: Vec<usize> = (0..p.len()).filter(|&j| !taken[j]).collect();
    for &j in &free {
        let step = if total > 0.0 { p[j] / total } else { 1.0 / free.len() as f64 };
        if step == 0.0 {
            continue;
        }
        taken[j] = true;
        picked.push(j);
        enumerate_draws(p, k, prob * step, taken, picked, out);
        picked.pop();
        taken[j] = false;
    }
}

/// Exact `E[var(h_i)]` and `E[covar(h_i, h_j)]` (two independent learners)
/// for linear learners on PCA-transformed `xt` with target `xt · w`,
/// obtained by enumerating every subset outcome.
pub fn enumerate_linear_moments(xt: &DataMatrix, w: &[f64], weights: &SubspaceWeights, k: usize) -> Result<(f64, f64)> {
    let y = xt.mul_vec(w)?;
    let dist = subset_distribution(weights, k)?;
    let outcomes = dist
        .iter()
        .map(|(subset, &prob)| {
            let preds = train_linear(xt, &y, subset)?.predict_matrix(xt)?;
            let mean = preds.iter().sum::<f64>() / preds.len() as f64;
            Ok((prob, preds.into_iter().map(|v| v - mean).collect::<Vec<_>>()))
        })
        .collect::<Result<Vec<(f64, Vec<f64>)>>>()?;

    let inner = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let var = outcomes.iter().map(|(p, h)| p * inner(h, h)).sum();
    let mut covar = 0.0;
    for (pa, ha) in &outcomes {
        for (pb, hb) in &outcomes {
            covar += pa * pb * inner(ha, hb);
        }
    }
    Ok((var, covar))
}

/// Closed forms for one-feature learners: `(Σ p w² s², Σ p² w² s²)`.
pub fn single_feature_closed_form(p: &[f64], w: &[f64], s: &[f64]) -> (f64, f64) {
    let mut var = 0.0;
    let mut covar = 0.0;
    for ((&pk, &wk), &sk) in p.iter().zip(w).zip(s) {
        let c = (wk * sk).powi(2);
        var += pk * c;
        covar += pk * pk * c;
    }
    (var, covar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionExpectation {
    /// Monte Carlo mean of `w_k² s_k² / Σ w_i² s_i²`.
    pub mean_p: Vec<f64>,
    /// `s_k² / Σ s_i²`.
    pub fractions: Vec<f64>,
    pub max_abs_deviation: f64,
    pub trials: usize,
}

/// Measures how far `E[w_k² s_k² / Σ w_i² s_i²]` with `w ~ N(0, I)` sits from
/// the fraction probabilities `s_k² / Σ s_i²`. The two agree only when all
/// singular values are equal, so the gap is reported rather than asserted.
pub fn verify_fraction_expectation(singular_values: &[f64], trials: usize, seed: u64) -> Result<FractionExpectation> {
    if trials < 1000 {
        return invalid(format!("need at least 1000 trials, got {trials}"));
    }
    let fractions = crate::qis::fraction_probabilities(singular_values)?.probabilities().to_vec();
    let m = singular_values.len();
    let mut rng = stream(seed, &[TAG_TRIAL]);
    let mut sums = vec![0.0; m];
    let mut masses = vec![0.0; m];
    let mut used = 0usize;
    while used < trials {
        for (mass, s) in masses.iter_mut().zip(singular_values) {
            let w: f64 = rng.sample(StandardNormal);
            *mass = (w * s).powi(2);
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            continue;
        }
        for (acc, mass) in sums.iter_mut().zip(&masses) {
            *acc += mass / total;
        }
        used += 1;
    }
    let mean_p: Vec<f64> = sums.iter().map(|v| v / trials as f64).collect();
    let max_abs_deviation = mean_p.iter().zip(&fractions).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(FractionExpectation { mean_p, fractions, max_abs_deviation, trials })
}
