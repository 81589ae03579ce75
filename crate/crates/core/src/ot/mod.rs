//! Entropic optimal-transport aligners.
//!
//! Three solver families — Sinkhorn EOT on a shared embedding space,
//! entropic Gromov-Wasserstein on intra-space distance structures, and
//! co-optimal transport over samples and features jointly — plus a
//! label-constrained wrapper that solves one block per shared label and
//! forbids cross-label mass outright.

pub mod coot;
pub mod gw;
pub mod labeled;
pub mod sinkhorn;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::matrix::Matrix;
use crate::numerics::NumericsError;

pub use coot::coot;
pub use gw::entropic_gw;
pub use labeled::labeled;
pub use sinkhorn::{sinkhorn_cost, sinkhorn_eot};

/// Outer-iteration cap for the Gromov-Wasserstein projected-gradient loop.
pub const GW_OUTER_CAP: usize = 200;
/// Outer-iteration cap for co-optimal transport alternation.
pub const COOT_OUTER_CAP: usize = 50;
/// Inner Sinkhorn marginal tolerance used by the alternating solvers.
pub const COOT_INNER_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum OtError {
    #[error("invalid aligner input: {0}")]
    InvalidInput(String),
    #[error("degenerate geometry: all points coincide, distance structure carries no signal")]
    DegenerateGeometry,
    #[error("the two sides share no labels")]
    NoSharedLabels,
    #[error("aligner {0:?} requires labels on both sides")]
    LabelsRequired(AlignerKind),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, OtError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignerKind {
    Eot,
    Egwot,
    LabeledEot,
    LabeledEgwot,
    LabeledCoot,
}

impl AlignerKind {
    pub const ALL: [AlignerKind; 5] = [
        AlignerKind::Eot,
        AlignerKind::Egwot,
        AlignerKind::LabeledEot,
        AlignerKind::LabeledEgwot,
        AlignerKind::LabeledCoot,
    ];

    pub fn is_labeled(self) -> bool {
        matches!(
            self,
            AlignerKind::LabeledEot | AlignerKind::LabeledEgwot | AlignerKind::LabeledCoot
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            AlignerKind::Eot => "eot",
            AlignerKind::Egwot => "egwot",
            AlignerKind::LabeledEot => "labeled_eot",
            AlignerKind::LabeledEgwot => "labeled_egwot",
            AlignerKind::LabeledCoot => "labeled_coot",
        }
    }
}

impl std::str::FromStr for AlignerKind {
    type Err = OtError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "eot" => AlignerKind::Eot,
            "egwot" => AlignerKind::Egwot,
            "labeled_eot" => AlignerKind::LabeledEot,
            "labeled_egwot" => AlignerKind::LabeledEgwot,
            "labeled_coot" => AlignerKind::LabeledCoot,
            other => {
                return Err(OtError::InvalidInput(format!(
                    "unknown aligner {other:?}; expected one of eot, egwot, labeled_eot, labeled_egwot, labeled_coot"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AlignSpec {
    pub kind: AlignerKind,
    /// Entropic regularization, relative to the mean of the cost matrix
    /// being solved (cost matrices are divided by their mean first).
    pub epsilon: f64,
    /// Inner Sinkhorn iteration cap.
    pub max_iterations: usize,
    /// Marginal-violation tolerance for Sinkhorn; also the plan-change
    /// tolerance for the outer GW/COOT loops.
    pub tolerance: f64,
}

impl AlignSpec {
    pub fn new(kind: AlignerKind) -> Self {
        AlignSpec {
            kind,
            epsilon: 0.05,
            max_iterations: 10_000,
            tolerance: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 || self.epsilon.is_nan() || !self.epsilon.is_finite() {
            return Err(OtError::InvalidInput(format!(
                "epsilon {} must be positive",
                self.epsilon
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(OtError::InvalidInput(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Nonnegative coupling between two sample sets with its marginals and
/// solver metadata.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub coupling: Matrix,
    pub source_marginal: Vec<f64>,
    pub target_marginal: Vec<f64>,
    pub kind: AlignerKind,
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final marginal violation (Sinkhorn) or plan change (outer loops).
    pub residual: f64,
    /// Solver objective where one is defined (Gromov-Wasserstein
    /// distortion, co-optimal transport cost).
    pub objective: Option<f64>,
}

impl TransportPlan {
    pub fn shape(&self) -> (usize, usize) {
        self.coupling.shape()
    }

    pub fn total_mass(&self) -> f64 {
        self.coupling.sum()
    }

    /// Worst absolute deviation of row/column sums from the marginals.
    pub fn marginal_violation(&self) -> f64 {
        let rows = self.coupling.row_sums();
        let cols = self.coupling.col_sums();
        let r = rows
            .iter()
            .zip(&self.source_marginal)
            .map(|(s, m)| (s - m).abs())
            .fold(0.0_f64, f64::max);
        let c = cols
            .iter()
            .zip(&self.target_marginal)
            .map(|(s, m)| (s - m).abs())
            .fold(0.0_f64, f64::max);
        r.max(c)
    }

    /// Coupling with each row rescaled to sum to one. Rows with zero mass
    /// stay zero.
    pub fn row_normalized(&self) -> Matrix {
        let mut out = self.coupling.clone();
        for i in 0..out.rows() {
            let s: f64 = out.row(i).iter().sum();
            if s > 0.0 {
                for v in out.row_mut(i) {
                    *v /= s;
                }
            }
        }
        out
    }
}

/// Uniform probability vector.
pub(crate) fn uniform_marginal(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Dispatch an alignment by spec; labeled variants require labels.
pub fn align(
    spec: &AlignSpec,
    za: &Matrix,
    zb: &Matrix,
    labels_a: Option<&[usize]>,
    labels_b: Option<&[usize]>,
) -> Result<TransportPlan> {
    spec.validate()?;
    match spec.kind {
        AlignerKind::Eot => sinkhorn_eot(za, zb, spec),
        AlignerKind::Egwot => entropic_gw(za, zb, spec),
        AlignerKind::LabeledEot | AlignerKind::LabeledEgwot | AlignerKind::LabeledCoot => {
            match (labels_a, labels_b) {
                (Some(la), Some(lb)) => labeled(spec, za, zb, la, lb),
                _ => Err(OtError::LabelsRequired(spec.kind)),
            }
        }
    }
}
