//! Bagged regression ensembles over principal-component subspaces.
//!
//! Subsets of PCA-rotated features are drawn either uniformly (Random Forest)
//! or with probability proportional to each component's share of explained
//! target signal (Quantum-Inspired Subspace). The crate also provides ensemble
//! error decompositions and a reproducible benchmark harness.

pub mod data;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod learners;
pub mod matrix;
pub mod pca;
pub mod qis;
pub mod rng;
pub mod synth;

pub use data::{load_csv, preprocess, Dataset, HeaderMode, Preprocessor, TargetColumn};
pub use diagnostics::{decompose, DecompositionReport};
pub use ensemble::{
    mse, predict_ensemble, train_ensemble, train_qi_forest, train_random_forest, EnsembleConfig, EnsembleModel,
};
pub use error::{QiError, Result};
pub use experiment::{run_experiment, ExperimentReport, ExperimentSpec, ResultRow, RunConfig, Verdict};
pub use learners::{LearnerKind, TrainedLearner};
pub use matrix::{ols_solve, svd, DataMatrix, SvdResult};
pub use pca::PcaModel;
pub use qis::{
    fraction_probabilities, fraction_transition_probabilities, generate_subsets, sample_subset, FeatureSubset,
    SubsetMode, SubspaceWeights,
};
