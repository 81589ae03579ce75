//! The GROOVE representation learner: modality encoders feeding a shared
//! linear coupling layer, modality decoders, the GroupCLIP contrastive
//! loss, reconstruction/backtranslation losses, and the two-step training
//! loop. Also houses the propensity-score classifier baseline.

pub mod io;
pub mod loss;
pub mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::matrix::Matrix;
use crate::numerics::nn::{dense_forward, Activation, BatchNorm, Dense};
use crate::numerics::rng::RngStream;
use crate::numerics::tape::{NodeId, Tape};
use crate::numerics::NumericsError;

pub use loss::{
    backtranslation_step, groupclip_loss, groupclip_loss_tape, reconstruction_loss,
    reconstruction_loss_tape, similarity,
};
pub use train::{
    plan_balanced_batches, train, train_ps_baseline, BalancedBatchPlan, IterationLoss,
    TrainConfig, TrainResult,
};

/// Variance floor added inside the reparameterized encoder draw.
pub const REPARAM_FLOOR: f64 = 1e-4;

/// Minimum embedding norm for cosine similarity to be defined.
pub const MIN_COSINE_NORM: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("anchor with label {label} has no positive samples in the other modality")]
    MissingPositives { label: usize },
    #[error("infeasible balanced batch: per-label quota {quota} exceeds minority label count {n_min}; decrease the batch size")]
    InfeasibleBatch { quota: usize, n_min: usize },
    #[error("balanced batching requires a positive per-label quota; batch size {batch} is below the label count {labels}")]
    BatchTooSmall { batch: usize, labels: usize },
    #[error("label {label} is missing from modality {modality}")]
    MissingLabel { label: usize, modality: &'static str },
    #[error("cosine similarity is undefined for a zero vector")]
    UndefinedSimilarity,
    #[error("classification baseline requires at least 2 labels, got {0}")]
    DegenerateClassification(usize),
    #[error("non-finite loss at iteration {iteration}: training diverged")]
    Divergence { iteration: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Cosine,
    TDist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    NoGroupclip,
    AutoencoderOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    X,
    Y,
}

impl Modality {
    pub fn other(self) -> Modality {
        match self {
            Modality::X => Modality::Y,
            Modality::Y => Modality::X,
        }
    }
}

/// Loss hyperparameters and latent geometry carried by the model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrooveHyper {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub eta: f64,
    pub kernel: Kernel,
    pub latent_dim: usize,
}

/// Three dense layers with batch normalization and relu after the first
/// two; the final layer is linear.
#[derive(Debug, Clone)]
pub struct MlpStack {
    pub l1: Dense,
    pub bn1: BatchNorm,
    pub l2: Dense,
    pub bn2: BatchNorm,
    pub l3: Dense,
}

#[derive(Debug, Clone, Copy)]
pub struct DenseIds {
    pub w: NodeId,
    pub b: NodeId,
}

#[derive(Debug, Clone, Copy)]
pub struct BnIds {
    pub gamma: NodeId,
    pub beta: NodeId,
}

#[derive(Debug, Clone, Copy)]
pub struct MlpIds {
    pub l1: DenseIds,
    pub bn1: BnIds,
    pub l2: DenseIds,
    pub bn2: BnIds,
    pub l3: DenseIds,
}

impl MlpStack {
    pub fn new(in_dim: usize, h1: usize, h2: usize, out_dim: usize, rng: &mut RngStream) -> Self {
        MlpStack {
            l1: Dense::he(in_dim, h1, rng),
            bn1: BatchNorm::new(h1),
            l2: Dense::he(h1, h2, rng),
            bn2: BatchNorm::new(h2),
            l3: Dense::xavier(h2, out_dim, rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.l1.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.l3.out_dim()
    }

    pub fn register(&self, tape: &mut Tape) -> MlpIds {
        MlpIds {
            l1: DenseIds {
                w: tape.param(self.l1.weight.clone()),
                b: tape.param(self.l1.bias.clone()),
            },
            bn1: BnIds {
                gamma: tape.param(self.bn1.gamma.clone()),
                beta: tape.param(self.bn1.beta.clone()),
            },
            l2: DenseIds {
                w: tape.param(self.l2.weight.clone()),
                b: tape.param(self.l2.bias.clone()),
            },
            bn2: BnIds {
                gamma: tape.param(self.bn2.gamma.clone()),
                beta: tape.param(self.bn2.beta.clone()),
            },
            l3: DenseIds {
                w: tape.param(self.l3.weight.clone()),
                b: tape.param(self.l3.bias.clone()),
            },
        }
    }

    /// Train-mode forward: batch statistics on the tape, running stats
    /// updated as a side effect.
    pub fn forward_train(&mut self, tape: &mut Tape, ids: &MlpIds, x: NodeId) -> Result<NodeId> {
        let h = dense_forward(tape, x, ids.l1.w, ids.l1.b, Activation::Identity)?;
        let h = self.bn1.forward_train(tape, h, ids.bn1.gamma, ids.bn1.beta)?;
        let h = tape.relu(h);
        let h = dense_forward(tape, h, ids.l2.w, ids.l2.b, Activation::Identity)?;
        let h = self.bn2.forward_train(tape, h, ids.bn2.gamma, ids.bn2.beta)?;
        let h = tape.relu(h);
        Ok(dense_forward(tape, h, ids.l3.w, ids.l3.b, Activation::Identity)?)
    }

    /// Pure eval-mode forward using running statistics.
    pub fn forward_eval(&self, x: &Matrix) -> Result<Matrix> {
        let h = self.l1.forward_eval(x, Activation::Identity)?;
        let mut h = self.bn1.forward_eval(&h);
        for v in h.data_mut() {
            *v = v.max(0.0);
        }
        let h = self.l2.forward_eval(&h, Activation::Identity)?;
        let mut h = self.bn2.forward_eval(&h);
        for v in h.data_mut() {
            *v = v.max(0.0);
        }
        Ok(self.l3.forward_eval(&h, Activation::Identity)?)
    }

    fn params(&self) -> Vec<&Matrix> {
        vec![
            &self.l1.weight,
            &self.l1.bias,
            &self.bn1.gamma,
            &self.bn1.beta,
            &self.l2.weight,
            &self.l2.bias,
            &self.bn2.gamma,
            &self.bn2.beta,
            &self.l3.weight,
            &self.l3.bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.l1.weight,
            &mut self.l1.bias,
            &mut self.bn1.gamma,
            &mut self.bn1.beta,
            &mut self.l2.weight,
            &mut self.l2.bias,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            &mut self.l3.weight,
            &mut self.l3.bias,
        ]
    }
}

impl MlpIds {
    fn param_ids(&self) -> Vec<NodeId> {
        vec![
            self.l1.w, self.l1.b, self.bn1.gamma, self.bn1.beta, self.l2.w, self.l2.b,
            self.bn2.gamma, self.bn2.beta, self.l3.w, self.l3.b,
        ]
    }
}

/// Parameter node ids for one registration of the full model, in the same
/// canonical order as [`GrooveModel::params`].
#[derive(Debug, Clone, Copy)]
pub struct ModelIds {
    pub enc_x: MlpIds,
    pub enc_y: MlpIds,
    pub coupling: DenseIds,
    pub dec_x: MlpIds,
    pub dec_y: MlpIds,
}

impl ModelIds {
    pub fn param_ids(&self) -> Vec<NodeId> {
        let mut ids = self.enc_x.param_ids();
        ids.extend(self.enc_y.param_ids());
        ids.push(self.coupling.w);
        ids.push(self.coupling.b);
        ids.extend(self.dec_x.param_ids());
        ids.extend(self.dec_y.param_ids());
        ids
    }
}

/// Two modality encoders terminating in one shared linear coupling layer,
/// plus two modality decoders. Encoders emit 2d values read as mean and
/// log-variance of a diagonal Gaussian; training samples via the
/// reparameterization trick while inference uses the mean only.
#[derive(Debug, Clone)]
pub struct GrooveModel {
    pub enc_x: MlpStack,
    pub enc_y: MlpStack,
    pub coupling: Dense,
    pub dec_x: MlpStack,
    pub dec_y: MlpStack,
    pub hyper: GrooveHyper,
}

impl GrooveModel {
    /// Encoder stacks k -> h1 -> h2 -> 2d, decoders d -> h2 -> h1 -> k.
    pub fn new(
        feat_x: usize,
        feat_y: usize,
        hidden: (usize, usize),
        hyper: GrooveHyper,
        rng: &mut RngStream,
    ) -> Self {
        let d = hyper.latent_dim;
        let (h1, h2) = hidden;
        let mut enc_x = MlpStack::new(feat_x, h1, h2, 2 * d, rng);
        let mut enc_y = MlpStack::new(feat_y, h1, h2, 2 * d, rng);
        // Start the log-variance head small so early reparameterized
        // draws are near-deterministic.
        for enc in [&mut enc_x, &mut enc_y] {
            for j in d..2 * d {
                enc.l3.bias.set(0, j, -4.0);
            }
        }
        GrooveModel {
            enc_x,
            enc_y,
            coupling: Dense::xavier(d, d, rng),
            dec_x: MlpStack::new(d, h2, h1, feat_x, rng),
            dec_y: MlpStack::new(d, h2, h1, feat_y, rng),
            hyper,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.hyper.latent_dim
    }

    fn encoder(&self, m: Modality) -> &MlpStack {
        match m {
            Modality::X => &self.enc_x,
            Modality::Y => &self.enc_y,
        }
    }

    fn decoder(&self, m: Modality) -> &MlpStack {
        match m {
            Modality::X => &self.dec_x,
            Modality::Y => &self.dec_y,
        }
    }

    pub fn register(&self, tape: &mut Tape) -> ModelIds {
        ModelIds {
            enc_x: self.enc_x.register(tape),
            enc_y: self.enc_y.register(tape),
            coupling: DenseIds {
                w: tape.param(self.coupling.weight.clone()),
                b: tape.param(self.coupling.bias.clone()),
            },
            dec_x: self.dec_x.register(tape),
            dec_y: self.dec_y.register(tape),
        }
    }

    /// Parameters in canonical order, matching [`ModelIds::param_ids`].
    pub fn params(&self) -> Vec<&Matrix> {
        let mut p = self.enc_x.params();
        p.extend(self.enc_y.params());
        p.push(&self.coupling.weight);
        p.push(&self.coupling.bias);
        p.extend(self.dec_x.params());
        p.extend(self.dec_y.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut p = self.enc_x.params_mut();
        p.extend(self.enc_y.params_mut());
        p.push(&mut self.coupling.weight);
        p.push(&mut self.coupling.bias);
        p.extend(self.dec_x.params_mut());
        p.extend(self.dec_y.params_mut());
        p
    }

    /// Deterministic encode: coupling applied to the posterior mean.
    pub fn encode_eval(&self, x: &Matrix, m: Modality) -> Result<Matrix> {
        let enc = self.encoder(m);
        if x.cols() != enc.in_dim() {
            return Err(NumericsError::ShapeMismatch {
                context: "encode",
                expected: format!("{} features", enc.in_dim()),
                found: format!("{} features", x.cols()),
            }
            .into());
        }
        let d = self.latent_dim();
        let out = enc.forward_eval(x)?;
        let mu = out.slice_cols(0, d);
        Ok(self.coupling.forward_eval(&mu, Activation::Identity)?)
    }

    /// Train-mode encode on the tape: reparameterized draw around the
    /// mean with a small variance floor, then the shared coupling.
    pub fn encode_train(
        &mut self,
        tape: &mut Tape,
        ids: &ModelIds,
        x: NodeId,
        m: Modality,
        rng: &mut RngStream,
    ) -> Result<NodeId> {
        let d = self.latent_dim();
        let enc_ids = match m {
            Modality::X => ids.enc_x,
            Modality::Y => ids.enc_y,
        };
        let xv = tape.value(x);
        let enc = match m {
            Modality::X => &self.enc_x,
            Modality::Y => &self.enc_y,
        };
        if xv.cols() != enc.in_dim() {
            return Err(NumericsError::ShapeMismatch {
                context: "encode",
                expected: format!("{} features", enc.in_dim()),
                found: format!("{} features", xv.cols()),
            }
            .into());
        }
        let rows = xv.rows();
        let out = match m {
            Modality::X => self.enc_x.forward_train(tape, &enc_ids, x)?,
            Modality::Y => self.enc_y.forward_train(tape, &enc_ids, x)?,
        };
        let mu = tape.slice_cols(out, 0, d)?;
        let logvar = tape.slice_cols(out, d, 2 * d)?;
        let eps = Matrix::from_fn(rows, d, |_, _| rng.normal());
        let z = tape.reparam(mu, logvar, eps, REPARAM_FLOOR)?;
        Ok(dense_forward(
            tape,
            z,
            ids.coupling.w,
            ids.coupling.b,
            Activation::Identity,
        )?)
    }

    pub fn decode_eval(&self, z: &Matrix, m: Modality) -> Result<Matrix> {
        let dec = self.decoder(m);
        if z.cols() != dec.in_dim() {
            return Err(NumericsError::ShapeMismatch {
                context: "decode",
                expected: format!("width {}", dec.in_dim()),
                found: format!("width {}", z.cols()),
            }
            .into());
        }
        dec.forward_eval(z)
    }

    pub fn decode_train(
        &mut self,
        tape: &mut Tape,
        ids: &ModelIds,
        z: NodeId,
        m: Modality,
    ) -> Result<NodeId> {
        let dec_ids = match m {
            Modality::X => ids.dec_x,
            Modality::Y => ids.dec_y,
        };
        let zv = tape.value(z);
        let dec = self.decoder(m);
        if zv.cols() != dec.in_dim() {
            return Err(NumericsError::ShapeMismatch {
                context: "decode",
                expected: format!("width {}", dec.in_dim()),
                found: format!("width {}", zv.cols()),
            }
            .into());
        }
        match m {
            Modality::X => self.dec_x.forward_train(tape, &dec_ids, z),
            Modality::Y => self.dec_y.forward_train(tape, &dec_ids, z),
        }
    }
}

/// Mode-dispatching encode. Train mode records on a throwaway tape (batch
/// normalization running statistics still update, as in any train-mode
/// pass) and returns the sampled embedding; eval mode is deterministic.
pub fn encode(
    model: &mut GrooveModel,
    x: &Matrix,
    m: Modality,
    mode: crate::numerics::nn::Mode,
    rng: &mut RngStream,
) -> Result<Matrix> {
    match mode {
        crate::numerics::nn::Mode::Eval => model.encode_eval(x, m),
        crate::numerics::nn::Mode::Train => {
            let mut tape = Tape::new();
            let ids = model.register(&mut tape);
            let xid = tape.constant(x.clone());
            let z = model.encode_train(&mut tape, &ids, xid, m, rng)?;
            Ok(tape.value(z).clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::nn::Mode;

    fn tiny_hyper(d: usize) -> GrooveHyper {
        GrooveHyper {
            alpha: 1.0,
            beta: 0.1,
            tau: 0.2,
            eta: 1.0,
            kernel: Kernel::Cosine,
            latent_dim: d,
        }
    }

    #[test]
    fn eval_encode_is_deterministic() {
        let mut rng = RngStream::new(1);
        let model = GrooveModel::new(12, 8, (16, 8), tiny_hyper(4), &mut rng);
        let x = Matrix::from_fn(5, 12, |_, _| rng.normal());
        let a = model.encode_eval(&x, Modality::X).unwrap();
        let b = model.encode_eval(&x, Modality::X).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), (5, 4));
    }

    #[test]
    fn decode_widths_match_modalities() {
        let mut rng = RngStream::new(2);
        let model = GrooveModel::new(12, 8, (16, 8), tiny_hyper(4), &mut rng);
        let z = Matrix::from_fn(3, 4, |_, _| rng.normal());
        assert_eq!(model.decode_eval(&z, Modality::X).unwrap().cols(), 12);
        assert_eq!(model.decode_eval(&z, Modality::Y).unwrap().cols(), 8);
        let bad = Matrix::zeros(3, 5);
        assert!(model.decode_eval(&bad, Modality::X).is_err());
    }

    #[test]
    fn encode_rejects_wrong_width() {
        let mut rng = RngStream::new(3);
        let model = GrooveModel::new(12, 8, (16, 8), tiny_hyper(4), &mut rng);
        let x = Matrix::zeros(4, 9);
        assert!(model.encode_eval(&x, Modality::X).is_err());
    }

    #[test]
    fn collapsed_logvar_leaves_floor_scale_noise() {
        // Force log-variance output to a large negative constant and make
        // the coupling the identity: train-mode draws then differ from the
        // eval output only by the sqrt(1e-4)-scale floor noise.
        let mut rng = RngStream::new(4);
        let d = 3;
        let mut model = GrooveModel::new(6, 6, (8, 8), tiny_hyper(d), &mut rng);
        // Zero the final encoder layer and set the logvar-half bias very
        // negative so exp(logvar) ~ 0.
        model.enc_x.l3.weight = Matrix::zeros(model.enc_x.l3.weight.rows(), 2 * d);
        let mut bias = Matrix::zeros(1, 2 * d);
        for j in d..2 * d {
            bias.set(0, j, -60.0);
        }
        model.enc_x.l3.bias = bias;
        model.coupling = Dense {
            weight: Matrix::identity(d),
            bias: Matrix::zeros(1, d),
        };

        let x = Matrix::from_fn(8, 6, |_, _| rng.normal());
        let eval_z = model.encode_eval(&x, Modality::X).unwrap();
        let draws = 400;
        let mut sq_dev = 0.0;
        for _ in 0..draws {
            let z = encode(&mut model, &x, Modality::X, Mode::Train, &mut rng).unwrap();
            for (a, b) in z.data().iter().zip(eval_z.data()) {
                sq_dev += (a - b) * (a - b);
            }
        }
        let var = sq_dev / (draws * eval_z.len()) as f64;
        assert!(
            (var - REPARAM_FLOOR).abs() < REPARAM_FLOOR * 0.2,
            "noise variance {var} vs floor {REPARAM_FLOOR}"
        );
    }

    #[test]
    fn paper_default_latent_width() {
        let mut rng = RngStream::new(5);
        let hyper = tiny_hyper(128);
        let model = GrooveModel::new(30, 20, (32, 16), hyper, &mut rng);
        let x = Matrix::from_fn(4, 30, |_, _| rng.normal());
        let z = model.encode_eval(&x, Modality::X).unwrap();
        assert_eq!(z.cols(), 128);
    }
}
