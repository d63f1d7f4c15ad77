//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use qiforest::learners::{Model, Node};
use qiforest::{DataMatrix, TrainedLearner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DataMatrix {
    DataMatrix::from_rows(&gaussian_rows(rng, n, m)).unwrap()
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn to_rows(x: &DataMatrix) -> Vec<Vec<f64>> {
    (0..x.rows()).map(|i| x.row(i).to_vec()).collect()
}

/// One-sided Jacobi SVD: returns singular values in descending order.
pub fn jacobi_singular_values(x: &DataMatrix) -> Vec<f64> {
    let mut a = to_rows(x);
    let (n, m) = (x.rows(), x.cols());
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..m {
            for q in p + 1..m {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for row in a.iter() {
                    alpha += row[p] * row[p];
                    beta += row[q] * row[q];
                    gamma += row[p] * row[q];
                }
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt().max(f64::MIN_POSITIVE));
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in a.iter_mut().take(n) {
                    let (ap, aq) = (row[p], row[q]);
                    row[p] = c * ap - s * aq;
                    row[q] = s * ap + c * aq;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut s: Vec<f64> = (0..m).map(|j| a.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
pub fn jacobi_eigenvalues(sym: &[Vec<f64>]) -> Vec<f64> {
    let m = sym.len();
    let mut a = sym.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[i][j].powi(2))
            .sum();
        let diag: f64 = (0..m).map(|i| a[i][i].powi(2)).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..m).map(|i| a[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// `XᵀX` of the column-centered matrix.
pub fn centered_gram(x: &DataMatrix) -> Vec<Vec<f64>> {
    let (n, m) = (x.rows(), x.cols());
    let means: Vec<f64> = (0..m).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect();
    let mut g = vec![vec![0.0; m]; m];
    for i in 0..n {
        for a in 0..m {
            for b in 0..m {
                g[a][b] += (x.get(i, a) - means[a]) * (x.get(i, b) - means[b]);
            }
        }
    }
    g
}

/// Solves `XᵀX w = Xᵀy` by Gaussian elimination with partial pivoting.
pub fn normal_equations(x: &DataMatrix, y: &[f64]) -> Vec<f64> {
    let (n, m) = (x.rows(), x.cols());
    let mut a = vec![vec![0.0; m + 1]; m];
    for i in 0..n {
        for p in 0..m {
            for q in 0..m {
                a[p][q] += x.get(i, p) * x.get(i, q);
            }
            a[p][m] += x.get(i, p) * y[i];
        }
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            for c in col..=m {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut w = vec![0.0; m];
    for r in (0..m).rev() {
        let tail: f64 = (r + 1..m).map(|c| a[r][c] * w[c]).sum();
        w[r] = (a[r][m] - tail) / a[r][r];
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleTree {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<OracleTree>, right: Box<OracleTree> },
}

fn sse(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum()
}

/// Exhaustive CART: every feature in `features` order, every midpoint
/// between consecutive distinct values in ascending order, impurity by
/// direct two-pass SSE. The first candidate within `1e-10 · SSE(node)` of
/// the best reduction wins.
pub fn oracle_tree(rows: &[Vec<f64>], y: &[f64], features: &[usize]) -> OracleTree {
    if y.iter().all(|&v| v == y[0]) {
        return OracleTree::Leaf(y[0]);
    }
    let node_sse = sse(y);
    let mut candidates = Vec::new();
    for &f in features {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for pair in vals.windows(2) {
            let thr = 0.5 * (pair[0] + pair[1]);
            let thr = if thr < pair[1] { thr } else { pair[0] };
            let left: Vec<f64> = rows.iter().zip(y).filter(|(r, _)| r[f] <= thr).map(|(_, &v)| v).collect();
            let right: Vec<f64> = rows.iter().zip(y).filter(|(r, _)| r[f] > thr).map(|(_, &v)| v).collect();
            candidates.push((f, thr, node_sse - sse(&left) - sse(&right)));
        }
    }
    if candidates.is_empty() {
        return OracleTree::Leaf(y.iter().sum::<f64>() / y.len() as f64);
    }
    let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    let &(feature, threshold, _) = candidates.iter().find(|c| c.2 >= best - 1e-10 * node_sse).unwrap();
    let (mut lr, mut ly, mut rr, mut ry) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (r, &v) in rows.iter().zip(y) {
        if r[feature] <= threshold {
            lr.push(r.clone());
            ly.push(v);
        } else {
            rr.push(r.clone());
            ry.push(v);
        }
    }
    OracleTree::Split {
        feature,
        threshold,
        left: Box::new(oracle_tree(&lr, &ly, features)),
        right: Box::new(oracle_tree(&rr, &ry, features)),
    }
}

impl OracleTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            OracleTree::Leaf(v) => *v,
            OracleTree::Split { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

/// Converts a trained tree into the oracle's shape for structural comparison.
pub fn as_oracle(learner: &TrainedLearner) -> OracleTree {
    let Model::Tree(tree) = learner.model() else { panic!("not a tree") };
    fn build(nodes: &[Node], id: usize) -> OracleTree {
        match nodes[id] {
            Node::Leaf { value } => OracleTree::Leaf(value),
            Node::Split { feature, threshold, left, right } => OracleTree::Split {
                feature,
                threshold,
                left: Box::new(build(nodes, left)),
                right: Box::new(build(nodes, right)),
            },
        }
    }
    build(tree.nodes(), 0)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `(1/2π) ∫ a cos²θ / (a cos²θ + b sin²θ) dθ`, i.e. `E[a w₁² / (a w₁² + b w₂²)]`
/// for independent standard normal `w`, by the periodic trapezoid rule.
pub fn ratio_expectation_quadrature(a: f64, b: f64, points: usize) -> f64 {
    let h = std::f64::consts::TAU / points as f64;
    (0..points)
        .map(|i| {
            let th = (i as f64 + 0.5) * h;
            let (c2, s2) = (th.cos().powi(2), th.sin().powi(2));
            a * c2 / (a * c2 + b * s2)
        })
        .sum::<f64>()
        / points as f64
}
