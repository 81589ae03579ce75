//! Dense-matrix arithmetic, seeded random streams, reverse-mode gradients,
//! and the Adam optimizer.

pub mod adam;
pub mod grvm;
pub mod matrix;
pub mod nn;
pub mod par;
pub mod rng;
pub mod tape;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },
    #[error("invalid parameter for {distribution}: {reason}")]
    InvalidParameter {
        distribution: &'static str,
        reason: String,
    },
    #[error("multinomial weights are degenerate: {0}")]
    DegenerateWeights(String),
    #[error("batch normalization requires a train-mode batch of at least 2 rows, got {0}")]
    DegenerateBatch(usize),
    #[error("backward requires a scalar loss node, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("matrix file error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NumericsError>;
