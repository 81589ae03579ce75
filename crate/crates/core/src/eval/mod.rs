//! Transport-plan-driven cross-modal imputation and the matching /
//! imputation metric suite.

pub mod imputer;
pub mod metrics;

use thiserror::Error;

use crate::model::ModelError;
use crate::numerics::NumericsError;

pub use imputer::{impute, train_imputer, ImputerConfig, ImputerModel};
pub use metrics::{
    barycentric_foscttm, imputation_metrics, mean_and_se, mean_rank, metric_direction,
    trace_metric, wasserstein_1d, Direction, ImputationMetrics, MetricTable, KNN_K,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("transport plan column {sample} has zero mass; the sampler is undefined for it")]
    DegenerateColumn { sample: usize },
    #[error("knn metrics need more than k={k} samples, got {n}")]
    KnnInfeasible { n: usize, k: usize },
    #[error("plan must be square for this metric, got {rows}x{cols}")]
    NonSquarePlan { rows: usize, cols: usize },
    #[error("metric table is missing a value for method {method:?}, metric {metric:?}")]
    IncompleteTable { method: String, metric: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
