//! Base regressors: a fully grown CART regression tree and an ordinary
//! least-squares linear model, each restricted to one feature subset.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, QiError, Result};
use crate::matrix::{check_targets, dot, ols_solve, DataMatrix};
use crate::qis::FeatureSubset;

/// Candidate splits whose SSE reduction is within this fraction of the node
/// SSE of the best one count as ties (resolved by feature, then threshold).
pub const SPLIT_TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Tree,
    Linear,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Tree => "tree",
            LearnerKind::Linear => "linear",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = QiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tree" => Ok(LearnerKind::Tree),
            "linear" | "lr" => Ok(LearnerKind::Linear),
            other => invalid(format!("unknown learner '{other}' (expected tree or linear)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left. `feature` is a global column index.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    id = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// One weight per subset feature, in subset order.
    pub weights: Vec<f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Tree(RegressionTree),
    Linear(LinearModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedLearner {
    model: Model,
    subset: FeatureSubset,
    dims: usize,
}

impl TrainedLearner {
    pub fn kind(&self) -> LearnerKind {
        match self.model {
            Model::Tree(_) => LearnerKind::Tree,
            Model::Linear(_) => LearnerKind::Linear,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn subset(&self) -> &FeatureSubset {
        &self.subset
    }

    /// Prediction for one full-width row.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.dims {
            return invalid(format!("row has {} features, learner expects {}", row.len(), self.dims));
        }
        Ok(self.predict_unchecked(row))
    }

    pub(crate) fn predict_unchecked(&self, row: &[f64]) -> f64 {
        match &self.model {
            Model::Tree(tree) => tree.predict_row(row),
            Model::Linear(lm) => {
                lm.intercept + self.subset.indices().iter().zip(&lm.weights).map(|(&j, w)| w * row[j]).sum::<f64>()
            }
        }
    }

    pub fn predict_matrix(&self, x: &DataMatrix) -> Result<Vec<f64>> {
        if x.cols() != self.dims {
            return invalid(format!("data has {} features, learner expects {}", x.cols(), self.dims));
        }
        Ok((0..x.rows()).map(|i| self.predict_unchecked(x.row(i))).collect())
    }
}

fn check_training(x: &DataMatrix, y: &[f64], rows: &[usize], subset: &FeatureSubset) -> Result<()> {
    check_targets(x, y)?;
    if subset.is_empty() {
        return invalid("feature subset must not be empty");
    }
    if let Some(&j) = subset.indices().last().filter(|&&j| j >= x.cols()) {
        return invalid(format!("subset feature {j} out of range for {} columns", x.cols()));
    }
    if rows.is_empty() {
        return invalid("no training rows");
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= x.rows()) {
        return invalid(format!("training row {r} out of range for {} rows", x.rows()));
    }
    Ok(())
}

pub fn train_tree(x: &DataMatrix, y: &[f64], subset: &FeatureSubset) -> Result<TrainedLearner> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    train_tree_on_rows(x, y, &rows, subset)
}

/// Grows a tree on `rows` (duplicates allowed, as in a bootstrap sample).
pub fn train_tree_on_rows(x: &DataMatrix, y: &[f64], rows: &[usize], subset: &FeatureSubset) -> Result<TrainedLearner> {
    check_training(x, y, rows, subset)?;
    let tree = TreeBuilder::new(x, y, rows, subset.indices()).grow();
    Ok(TrainedLearner { model: Model::Tree(tree), subset: subset.clone(), dims: x.cols() })
}

pub fn train_linear(x: &DataMatrix, y: &[f64], subset: &FeatureSubset) -> Result<TrainedLearner> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    train_linear_on_rows(x, y, &rows, subset)
}

/// Minimum-norm OLS on the subset columns with an intercept, fitted on
/// column- and target-centered data.
pub fn train_linear_on_rows(
    x: &DataMatrix,
    y: &[f64],
    rows: &[usize],
    subset: &FeatureSubset,
) -> Result<TrainedLearner> {
    check_training(x, y, rows, subset)?;
    let cols = subset.indices();
    let k = cols.len();
    let n = rows.len() as f64;
    let mut means = vec![0.0; k];
    for &r in rows {
        let row = x.row(r);
        for (m, &j) in means.iter_mut().zip(cols) {
            *m += row[j];
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let y_mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n;

    let mut design = Vec::with_capacity(rows.len() * k);
    for &r in rows {
        let row = x.row(r);
        design.extend(cols.iter().zip(&means).map(|(&j, m)| row[j] - m));
    }
    let design = DataMatrix::new(rows.len(), k, design)?;
    let target: Vec<f64> = rows.iter().map(|&r| y[r] - y_mean).collect();
    let weights = ols_solve(&design, &target)?;
    let intercept = y_mean - dot(&weights, &means);
    Ok(TrainedLearner {
        model: Model::Linear(LinearModel { weights, intercept }),
        subset: subset.clone(),
        dims: x.cols(),
    })
}

pub fn train_learner_on_rows(
    kind: LearnerKind,
    x: &DataMatrix,
    y: &[f64],
    rows: &[usize],
    subset: &FeatureSubset,
) -> Result<TrainedLearner> {
    match kind {
        LearnerKind::Tree => train_tree_on_rows(x, y, rows, subset),
        LearnerKind::Linear => train_linear_on_rows(x, y, rows, subset),
    }
}

/// Exhaustive CART growth over presorted feature columns.
///
/// Samples are addressed by position `0..rows.len()`. For every subset
/// feature, `order[f]` lists positions sorted by value; each node owns the
/// same `[start, end)` range in all of them, and a split stably partitions
/// that range so children keep sorted order without re-sorting.
struct TreeBuilder {
    targets: Vec<f64>,
    values: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
    features: Vec<usize>,
}

struct Candidate {
    feature: usize,
    left_count: usize,
    gain: f64,
    lo: f64,
    hi: f64,
}

impl TreeBuilder {
    fn new(x: &DataMatrix, y: &[f64], rows: &[usize], features: &[usize]) -> Self {
        let targets: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
        let values: Vec<Vec<f64>> = features.iter().map(|&f| rows.iter().map(|&r| x.get(r, f)).collect()).collect();
        let order = values
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { targets, values, order, features: features.to_vec() }
    }

    fn grow(mut self) -> RegressionTree {
        let n = self.targets.len();
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut stack = vec![(0usize, 0usize, n)];
        let mut centered = vec![0.0; n];
        let mut goes_left = vec![false; n];
        let mut buf: Vec<u32> = Vec::with_capacity(n);
        let mut candidates: Vec<Candidate> = Vec::new();

        while let Some((id, start, end)) = stack.pop() {
            let count = end - start;
            let members = &self.order[0][start..end];
            let first = self.targets[members[0] as usize];
            if members.iter().all(|&p| self.targets[p as usize] == first) {
                nodes[id] = Node::Leaf { value: first };
                continue;
            }
            let mean = members.iter().map(|&p| self.targets[p as usize]).sum::<f64>() / count as f64;
            let mut node_sse = 0.0;
            for &p in members {
                let c = self.targets[p as usize] - mean;
                centered[p as usize] = c;
                node_sse += c * c;
            }

            candidates.clear();
            let mut best = f64::NEG_INFINITY;
            for (fi, (ord, col)) in self.order.iter().zip(&self.values).enumerate() {
                let slice = &ord[start..end];
                let mut left_sum = 0.0;
                for i in 0..count - 1 {
                    let p = slice[i] as usize;
                    left_sum += centered[p];
                    let lo = col[p];
                    let hi = col[slice[i + 1] as usize];
                    if lo < hi {
                        let nl = (i + 1) as f64;
                        let nr = (count - i - 1) as f64;
                        let gain = left_sum * left_sum * count as f64 / (nl * nr);
                        best = best.max(gain);
                        candidates.push(Candidate { feature: fi, left_count: i + 1, gain, lo, hi });
                    }
                }
            }
            // every subset feature is constant on this node
            if candidates.is_empty() {
                nodes[id] = Node::Leaf { value: mean };
                continue;
            }
            let floor = best - SPLIT_TIE_TOL * node_sse;
            let chosen = candidates.iter().find(|c| c.gain >= floor).expect("the maximum itself passes");
            let (fi, nl) = (chosen.feature, chosen.left_count);
            let mut threshold = 0.5 * (chosen.lo + chosen.hi);
            if !(threshold < chosen.hi) {
                threshold = chosen.lo;
            }

            let split_slice = &self.order[fi][start..end];
            for (i, &p) in split_slice.iter().enumerate() {
                goes_left[p as usize] = i < nl;
            }
            for ord in &mut self.order {
                let slice = &mut ord[start..end];
                buf.clear();
                buf.extend(slice.iter().copied().filter(|&p| goes_left[p as usize]));
                buf.extend(slice.iter().copied().filter(|&p| !goes_left[p as usize]));
                slice.copy_from_slice(&buf);
            }

            let left = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 });
            let right = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[id] = Node::Split { feature: self.features[fi], threshold, left, right };
            stack.push((right, start + nl, end));
            stack.push((left, start, start + nl));
        }
        RegressionTree { nodes }
    }
}
