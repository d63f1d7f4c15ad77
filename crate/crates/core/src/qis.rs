//! Quantum-inspired subspace selection.
//!
//! Each principal component `k` gets a selection probability built from its
//! fraction `s_k²` (variance carried by the component) and, optionally, its
//! transition amplitude `t_k` (the least-squares coefficient mapping that
//! component onto the target):
//!
//! ```text
//! fraction only:        p_k = s_k² / Σ s_i²
//! fraction transition:  p_k = s_k² t_k² / Σ s_i² t_i²
//! uniform:              p_k = 1 / m            (plain random subspace)
//! ```
//!
//! Feature subsets are then drawn by sequential weighted sampling without
//! replacement.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{degenerate, invalid, QiError, Result};
use crate::matrix::{check_targets, ols_solve, DataMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetMode {
    Uniform,
    FractionOnly,
    FractionTransition,
}

impl SubsetMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SubsetMode::Uniform => "uniform",
            SubsetMode::FractionOnly => "fraction",
            SubsetMode::FractionTransition => "qis",
        }
    }
}

impl fmt::Display for SubsetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubsetMode {
    type Err = QiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" | "random" | "rs" => Ok(SubsetMode::Uniform),
            "fraction" | "fraction_only" => Ok(SubsetMode::FractionOnly),
            "qis" | "fraction_transition" => Ok(SubsetMode::FractionTransition),
            other => invalid(format!("unknown subset mode '{other}' (expected qis, fraction or uniform)")),
        }
    }
}

/// Probability vector over transformed-feature indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceWeights {
    p: Vec<f64>,
    mode: SubsetMode,
}

impl SubspaceWeights {
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return invalid("need at least one feature");
        }
        Ok(Self { p: vec![1.0 / m as f64; m], mode: SubsetMode::Uniform })
    }

    /// Builds weights from arbitrary nonnegative masses (normalized here).
    pub fn from_masses(masses: Vec<f64>, mode: SubsetMode) -> Result<Self> {
        if masses.is_empty() {
            return invalid("need at least one feature");
        }
        if masses.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return degenerate("selection masses must be finite and nonnegative");
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return degenerate("selection masses are all zero");
        }
        Ok(Self { p: masses.into_iter().map(|v| v / total).collect(), mode })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn mode(&self) -> SubsetMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// `p_k = s_k² / Σ s_i²`.
pub fn fraction_probabilities(singular_values: &[f64]) -> Result<SubspaceWeights> {
    let masses = singular_values.iter().map(|s| s * s).collect();
    SubspaceWeights::from_masses(masses, SubsetMode::FractionOnly)
}

/// `p_k = s_k² t_k² / Σ s_i² t_i²`.
pub fn fraction_transition_probabilities(singular_values: &[f64], amplitudes: &[f64]) -> Result<SubspaceWeights> {
    if singular_values.len() != amplitudes.len() {
        return invalid(format!("{} singular values but {} amplitudes", singular_values.len(), amplitudes.len()));
    }
    let masses = singular_values
        .iter()
        .zip(amplitudes)
        .map(|(s, t)| {
            let st = s * t;
            st * st
        })
        .collect();
    SubspaceWeights::from_masses(masses, SubsetMode::FractionTransition)
}

/// Least-squares coefficients of `y` on the PCA-transformed features.
pub fn transition_amplitudes(x_r: &DataMatrix, y: &[f64]) -> Result<Vec<f64>> {
    ols_solve(x_r, y)
}

/// Weights for `mode`, stepping down `fraction_transition → fraction_only → uniform`
/// whenever the quantities a mode needs are all zero or non-finite.
pub fn weights_with_fallback(
    x_r: &DataMatrix,
    y: &[f64],
    singular_values: &[f64],
    mode: SubsetMode,
) -> Result<SubspaceWeights> {
    let m = x_r.cols();
    if singular_values.len() != m {
        return invalid(format!("{} singular values for {m} features", singular_values.len()));
    }
    if mode == SubsetMode::FractionTransition {
        let attempt =
            transition_amplitudes(x_r, y).and_then(|t| fraction_transition_probabilities(singular_values, &t));
        match attempt {
            Ok(w) => return Ok(w),
            Err(QiError::DegenerateData(msg)) => {
                log::debug!("fraction-transition weights degenerate ({msg}); using fraction only")
            }
            Err(e) => return Err(e),
        }
    }
    if mode != SubsetMode::Uniform {
        match fraction_probabilities(singular_values) {
            Ok(w) => return Ok(w),
            Err(QiError::DegenerateData(msg)) => {
                log::debug!("fraction weights degenerate ({msg}); using uniform")
            }
            Err(e) => return Err(e),
        }
    }
    SubspaceWeights::uniform(m)
}

/// Sorted set of distinct feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureSubset {
    indices: Vec<usize>,
}

impl FeatureSubset {
    pub fn new(mut indices: Vec<usize>, m: usize) -> Result<Self> {
        if indices.is_empty() {
            return invalid("feature subset must not be empty");
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return invalid("feature subset contains duplicates");
        }
        if let Some(&j) = indices.last().filter(|&&j| j >= m) {
            return invalid(format!("feature index {j} out of range for {m} features"));
        }
        Ok(Self { indices })
    }

    pub fn full(m: usize) -> Self {
        Self { indices: (0..m).collect() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }
}

/// `round(alpha · m)` clamped to `[1, m]`.
pub fn subset_size(alpha: f64, m: usize) -> usize {
    ((alpha * m as f64).round() as usize).clamp(1, m.max(1))
}

/// Draws `k` distinct indices: pick one index with probability proportional
/// to the remaining weights, remove it, renormalize, repeat. Once the
/// positive-weight indices run out, the rest are filled uniformly from the
/// zero-weight ones.
pub fn sample_subset<R: Rng + ?Sized>(weights: &SubspaceWeights, k: usize, rng: &mut R) -> Result<FeatureSubset> {
    let m = weights.len();
    if k == 0 || k > m {
        return invalid(format!("subset size {k} must be in [1, {m}]"));
    }
    let mut remaining = weights.p.clone();
    let mut taken = vec![false; m];
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = remaining.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut choice = None;
            for (j, &w) in remaining.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                choice = Some(j);
                if acc > target {
                    break;
                }
            }
            choice.expect("positive total implies a positive entry")
        } else {
            let free: Vec<usize> = (0..m).filter(|&j| !taken[j]).collect();
            free[rng.random_range(0..free.len())]
        };
        taken[idx] = true;
        remaining[idx] = 0.0;
        picked.push(idx);
    }
    FeatureSubset::new(picked, m)
}

/// Quantum-inspired subspace generation: computes weights for `mode` from
/// PCA-transformed data and draws `t_ensemble` independent subsets of size `k`.
///
/// Fractions are read as the diagonal of `XᵀX`, i.e. the squared column norms,
/// which equal the squared singular values for centered PCA output.
pub fn generate_subsets<R: Rng + ?Sized>(
    x: &DataMatrix,
    y: &[f64],
    t_ensemble: usize,
    k: usize,
    mode: SubsetMode,
    rng: &mut R,
) -> Result<Vec<FeatureSubset>> {
    check_targets(x, y)?;
    let s: Vec<f64> = (0..x.cols()).map(|j| (0..x.rows()).map(|i| x.get(i, j).powi(2)).sum::<f64>().sqrt()).collect();
    let weights = weights_with_fallback(x, y, &s, mode)?;
    (0..t_ensemble).map(|_| sample_subset(&weights, k, rng)).collect()
}
