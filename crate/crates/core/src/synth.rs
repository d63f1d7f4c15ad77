//! Synthetic regression datasets with correlated features.
//!
//! Features are `x = (z ∘ λ) Q + μ` with `z` standard normal, a decaying
//! spectrum `λ_j = exp(−decay · j / (m − 1))`, a random orthogonal `Q` and
//! random column offsets. The signal is a random linear index of the latent
//! columns, so its weight on a principal axis shrinks with that axis' spread.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::matrix::DataMatrix;
use crate::rng::{name_key, stream, Stream, TAG_SYNTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    /// `y = g`.
    Linear,
    /// `y = round(2g) / 2`, a staircase in the signal index.
    PiecewiseConstant,
    /// `y = g + 0.5 (h² − 1)` with a second index `h`.
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub response: Response,
    /// Standard deviation of additive noise relative to a unit-variance signal.
    pub noise: f64,
    pub decay: f64,
}

impl SynthSpec {
    pub fn new(name: &str, n: usize, m: usize, response: Response, noise: f64) -> Self {
        Self { name: name.to_string(), n, m, response, noise, decay: 3.0 }
    }
}

/// Linear signal plus Gaussian noise.
pub fn linear_with_noise(name: &str, n: usize, m: usize, noise: f64, seed: u64) -> Result<Dataset> {
    generate(&SynthSpec::new(name, n, m, Response::Linear, noise), seed)
}

/// Staircase response plus Gaussian noise.
pub fn piecewise_constant(name: &str, n: usize, m: usize, noise: f64, seed: u64) -> Result<Dataset> {
    generate(&SynthSpec::new(name, n, m, Response::PiecewiseConstant, noise), seed)
}

pub fn generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    let (n, m) = (spec.n, spec.m);
    if n < 2 || m == 0 {
        return invalid(format!("synthetic data needs n ≥ 2 and m ≥ 1, got {n}×{m}"));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite() && spec.decay >= 0.0 && spec.decay.is_finite()) {
        return invalid("noise and decay must be finite and non-negative");
    }
    let mut rng = stream(seed, &[TAG_SYNTH, name_key(&spec.name)]);

    let lambda: Vec<f64> =
        (0..m).map(|j| if m == 1 { 1.0 } else { (-spec.decay * j as f64 / (m - 1) as f64).exp() }).collect();
    let q = random_orthogonal(m, &mut rng);
    let offsets: Vec<f64> = (0..m).map(|_| 5.0 * gauss(&mut rng)).collect();
    let beta: Vec<f64> = (0..m).map(|_| gauss(&mut rng)).collect();
    let gamma: Vec<f64> = (0..m).map(|_| gauss(&mut rng)).collect();

    let mut latent = vec![0.0; n * m];
    latent.iter_mut().for_each(|v| *v = gauss(&mut rng));

    let index = |coef: &[f64]| -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|i| (0..m).map(|j| coef[j] * lambda[j] * latent[i * m + j]).sum()).collect();
        standardize(raw)
    };
    let g = index(&beta);
    let h = index(&gamma);

    let mut values = vec![0.0; n * m];
    for i in 0..n {
        for c in 0..m {
            values[i * m + c] = offsets[c] + (0..m).map(|j| lambda[j] * latent[i * m + j] * q[(j, c)]).sum::<f64>();
        }
    }

    let y: Vec<f64> = (0..n)
        .map(|i| {
            let signal = match spec.response {
                Response::Linear => g[i],
                Response::PiecewiseConstant => (2.0 * g[i]).round() / 2.0,
                Response::Quadratic => g[i] + 0.5 * (h[i] * h[i] - 1.0),
            };
            signal + spec.noise * gauss(&mut rng)
        })
        .collect();

    let x = DataMatrix::new(n, m, values)?;
    Dataset::new(spec.name.clone(), x, y)
}

fn gauss(rng: &mut Stream) -> f64 {
    rng.sample(StandardNormal)
}

fn standardize(v: Vec<f64>) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        v.into_iter().map(|x| (x - mean) / sd).collect()
    } else {
        vec![0.0; v.len()]
    }
}

fn random_orthogonal(m: usize, rng: &mut Stream) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| gauss(rng));
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Stand-ins sized like the ten UCI regression sets of the reference study.
pub fn reference_standins() -> Vec<SynthSpec> {
    use Response::*;
    vec![
        SynthSpec::new("Abalone", 4177, 8, Quadratic, 0.7),
        SynthSpec::new("Communities Crime", 1994, 122, Linear, 0.6),
        SynthSpec::new("Communities Crime Unnormalized 1", 2215, 140, Linear, 0.5),
        SynthSpec::new("Communities Crime Unnormalized 2", 2215, 140, Quadratic, 0.6),
        SynthSpec::new("Facebook Metrics", 500, 11, PiecewiseConstant, 0.3),
        SynthSpec::new("Forests Fire", 517, 8, Quadratic, 1.2),
        SynthSpec::new("Housing", 505, 13, Quadratic, 0.5),
        SynthSpec::new("Slump Test", 103, 9, Linear, 0.3),
        SynthSpec::new("Wine Red", 1599, 11, PiecewiseConstant, 0.8),
        SynthSpec::new("Wine White", 4898, 11, PiecewiseConstant, 0.8),
    ]
}

pub fn reference_datasets(seed: u64) -> Result<Vec<Dataset>> {
    reference_standins().iter().map(|s| generate(s, seed)).collect()
}
