//! Classifiers over feature vectors and the two-stage figure cascade.

pub mod cascade;
pub mod dataset;
pub mod features;
pub mod logistic;
pub mod mlp;
pub mod model;
pub mod naive_bayes;
pub mod synthetic;

use std::path::PathBuf;

pub use cascade::{Cascade, CoarseLabel, FigureCategory};
pub use dataset::{FeatureDataset, Split};
pub use features::{cheap_features, cheap_features_from_bytes, FEATURE_DIM};
pub use logistic::LrSpec;
pub use mlp::{Mlp, MlpSpec};
pub use model::{evaluate, train, Algorithm, Evaluation, Model};

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed feature file: {0}")]
    Format(String),
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid classifier settings: {0}")]
    InvalidSpec(String),
    #[error("{0} model is not loaded")]
    ModelNotLoaded(&'static str),
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("invalid model file: {0}")]
    Model(#[from] serde_json::Error),
}
