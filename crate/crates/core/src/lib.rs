#![allow(clippy::needless_range_loop)]

//! Weakly-paired two-modality representation learning and benchmarking.
//!
//! The crate is organized around six subsystems:
//!
//! - [`numerics`]: dense matrices, seeded random streams, a reverse-mode
//!   tape for small feed-forward networks, and an Adam optimizer.
//! - [`sim`]: a generative model producing weakly-paired two-modality
//!   datasets with known ground-truth pairing.
//! - [`model`]: the GROOVE representation learner (GroupCLIP loss inside a
//!   backtranslating autoencoder) and the propensity-score baseline.
//! - [`ot`]: entropic optimal-transport aligners (Sinkhorn, entropic
//!   Gromov-Wasserstein, co-optimal transport) and label-constrained
//!   wrappers.
//! - [`eval`]: transport-plan-driven cross-modal imputation and the metric
//!   suite (trace, barycentric FOSCTTM, MSE, Wasserstein, cosine, KNN).
//! - [`bench`]: split generation and the combinatorial learner x aligner
//!   benchmark runner.
//!
//! Data-parallel inner loops run on rayon when the `parallel` feature is
//! enabled (the default) and fall back to equivalent sequential loops
//! otherwise. Both paths produce bit-identical results: parallel regions
//! only ever write disjoint output rows, and scalar reductions are always
//! accumulated in index order.

pub mod bench;
pub mod config;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod numerics;
pub mod ot;
pub mod sim;
pub mod split;

pub use numerics::matrix::Matrix;
pub use numerics::rng::RngStream;
