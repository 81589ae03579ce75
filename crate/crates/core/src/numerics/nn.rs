//! Dense and batch-normalization layers with tape-recorded train-mode
//! forwards and pure eval-mode forwards.

use super::matrix::Matrix;
use super::rng::RngStream;
use super::tape::{NodeId, Tape};
use super::Result;

/// Variance floor inside batchnorm's 1/sqrt(var + eps). Small enough that
/// unit-variance outputs hold to ~1e-9 even for low-variance columns.
pub const BN_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Affine map then activation, recorded on the tape.
pub fn dense_forward(
    tape: &mut Tape,
    x: NodeId,
    weights: NodeId,
    bias: NodeId,
    activation: Activation,
) -> Result<NodeId> {
    let h = tape.matmul(x, weights)?;
    let h = tape.add_row(h, bias)?;
    Ok(match activation {
        Activation::Relu => tape.relu(h),
        Activation::Identity => h,
    })
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Dense {
    /// He initialization, for layers followed by relu.
    pub fn he(in_dim: usize, out_dim: usize, rng: &mut RngStream) -> Self {
        let sd = (2.0 / in_dim as f64).sqrt();
        Dense {
            weight: Matrix::from_fn(in_dim, out_dim, |_, _| rng.normal() * sd),
            bias: Matrix::zeros(1, out_dim),
        }
    }

    /// Xavier initialization, for linear output layers.
    pub fn xavier(in_dim: usize, out_dim: usize, rng: &mut RngStream) -> Self {
        let sd = (1.0 / in_dim as f64).sqrt();
        Dense {
            weight: Matrix::from_fn(in_dim, out_dim, |_, _| rng.normal() * sd),
            bias: Matrix::zeros(1, out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward_eval(&self, x: &Matrix, activation: Activation) -> Result<Matrix> {
        let mut h = x.matmul(&self.weight)?;
        for i in 0..h.rows() {
            let row = h.row_mut(i);
            for (v, b) in row.iter_mut().zip(self.bias.row(0)) {
                *v += b;
            }
        }
        if activation == Activation::Relu {
            for v in h.data_mut() {
                *v = v.max(0.0);
            }
        }
        Ok(h)
    }
}

/// Batch normalization with running statistics (momentum 0.1). Train mode
/// normalizes with batch statistics and updates the running estimates;
/// eval mode is a pure function of the input and running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        BatchNorm {
            gamma: Matrix::filled(1, dim, 1.0),
            beta: Matrix::zeros(1, dim),
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: 0.1,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.cols()
    }

    /// Train-mode forward: batch statistics on the tape, running stats
    /// updated with the same (biased) variance used for normalization so
    /// eval mode is the fixed-batch limit of train mode.
    pub fn forward_train(
        &mut self,
        tape: &mut Tape,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
    ) -> Result<NodeId> {
        let (id, means, vars) = tape.batchnorm(x, gamma, beta, BN_EPS)?;
        for j in 0..self.running_mean.len() {
            self.running_mean[j] =
                (1.0 - self.momentum) * self.running_mean[j] + self.momentum * means[j];
            self.running_var[j] =
                (1.0 - self.momentum) * self.running_var[j] + self.momentum * vars[j];
        }
        Ok(id)
    }

    pub fn forward_eval(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                let xh = (x.get(i, j) - self.running_mean[j])
                    / (self.running_var[j] + BN_EPS).sqrt();
                out.set(i, j, self.gamma.get(0, j) * xh + self.beta.get(0, j));
            }
        }
        out
    }
}

/// Mode-dispatching batchnorm, matching the train/eval contract in one
/// entry point. Train mode requires a tape; eval mode ignores it.
pub fn batchnorm_forward(
    bn: &mut BatchNorm,
    tape: &mut Tape,
    x: NodeId,
    gamma: NodeId,
    beta: NodeId,
    mode: Mode,
) -> Result<NodeId> {
    match mode {
        Mode::Train => bn.forward_train(tape, x, gamma, beta),
        Mode::Eval => {
            let out = bn.forward_eval(tape.value(x));
            Ok(tape.constant(out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_difference_grads, max_relative_error};

    #[test]
    fn dense_identity_map_is_identity_on_nonnegative_input() {
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::row_vector(&[1.0, 0.0]));
        let w = tape.param(Matrix::identity(2));
        let b = tape.param(Matrix::zeros(1, 2));
        let y = dense_forward(&mut tape, x, w, b, Activation::Relu).unwrap();
        assert_eq!(tape.value(y).row(0), &[1.0, 0.0]);
    }

    #[test]
    fn relu_clips_negatives() {
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::row_vector(&[-1.0, 2.0]));
        let w = tape.param(Matrix::identity(2));
        let b = tape.param(Matrix::zeros(1, 2));
        let y = dense_forward(&mut tape, x, w, b, Activation::Relu).unwrap();
        assert_eq!(tape.value(y).row(0), &[0.0, 2.0]);
    }

    #[test]
    fn dense_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(5);
        let x = Matrix::from_fn(3, 4, |_, _| rng.normal());
        let w = Matrix::from_fn(4, 3, |_, _| rng.normal());
        let b = Matrix::from_fn(1, 3, |_, _| rng.normal());
        let eval = |params: &[Matrix]| {
            let mut tape = Tape::new();
            let xid = tape.constant(x.clone());
            let wid = tape.param(params[0].clone());
            let bid = tape.param(params[1].clone());
            let y = dense_forward(&mut tape, xid, wid, bid, Activation::Relu).unwrap();
            let loss = tape.mean_row_sq_norm(y);
            tape.value(loss).scalar()
        };
        let params = vec![w.clone(), b.clone()];
        let fd = finite_difference_grads(&eval, &params, 1e-5);

        let mut tape = Tape::new();
        let xid = tape.constant(x);
        let wid = tape.param(w);
        let bid = tape.param(b);
        let y = dense_forward(&mut tape, xid, wid, bid, Activation::Relu).unwrap();
        let loss = tape.mean_row_sq_norm(y);
        let grads = tape.backward(loss).unwrap();
        let analytic = vec![grads.wrt(&tape, wid), grads.wrt(&tape, bid)];
        let err = max_relative_error(&analytic, &fd);
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn train_mode_normalizes_each_column() {
        let mut bn = BatchNorm::new(3);
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_fn(8, 3, |i, j| {
            (i as f64 * 1.3 + j as f64) * (j as f64 + 0.5)
        }));
        let g = tape.param(bn.gamma.clone());
        let b = tape.param(bn.beta.clone());
        let y = bn.forward_train(&mut tape, x, g, b).unwrap();
        let yv = tape.value(y);
        let means = yv.col_means();
        let vars = yv.col_vars(&means);
        for j in 0..3 {
            assert!(means[j].abs() < 1e-9, "column {j} mean {}", means[j]);
            assert!((vars[j] - 1.0).abs() < 1e-6, "column {j} var {}", vars[j]);
        }
    }

    #[test]
    fn constant_column_maps_to_beta() {
        let mut bn = BatchNorm::new(2);
        bn.beta = Matrix::row_vector(&[0.7, -0.2]);
        bn.gamma = Matrix::row_vector(&[3.0, 4.0]);
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::filled(5, 2, 9.0));
        let g = tape.param(bn.gamma.clone());
        let b = tape.param(bn.beta.clone());
        let y = bn.forward_train(&mut tape, x, g, b).unwrap();
        let yv = tape.value(y);
        for i in 0..5 {
            assert!((yv.get(i, 0) - 0.7).abs() < 1e-12);
            assert!((yv.get(i, 1) + 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_mode_is_pure_and_uses_running_stats() {
        let mut bn = BatchNorm::new(2);
        bn.running_mean = vec![1.0, -1.0];
        bn.running_var = vec![4.0, 0.25];
        let x = Matrix::from_rows(&[vec![3.0, 0.0], vec![1.0, -1.0]]).unwrap();
        let before = (bn.running_mean.clone(), bn.running_var.clone());
        let y1 = bn.forward_eval(&x);
        let y2 = bn.forward_eval(&x);
        assert_eq!(y1, y2);
        assert_eq!(before, (bn.running_mean.clone(), bn.running_var.clone()));
        // (3 - 1) / 2 = 1, (0 + 1) / 0.5 = 2
        assert!((y1.get(0, 0) - 1.0).abs() < 1e-9);
        assert!((y1.get(0, 1) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn batchnorm_gradient_matches_finite_differences_8x3() {
        let mut rng = RngStream::new(77);
        let x = Matrix::from_fn(8, 3, |_, _| rng.normal());
        let gamma = Matrix::from_fn(1, 3, |_, _| 1.0 + 0.3 * rng.normal());
        let beta = Matrix::from_fn(1, 3, |_, _| 0.3 * rng.normal());
        let eval = |params: &[Matrix]| {
            let mut bn = BatchNorm::new(3);
            let mut tape = Tape::new();
            let xid = tape.param(params[0].clone());
            let gid = tape.param(params[1].clone());
            let bid = tape.param(params[2].clone());
            let y = bn.forward_train(&mut tape, xid, gid, bid).unwrap();
            let loss = tape.mean_row_sq_norm(y);
            tape.value(loss).scalar()
        };
        let params = vec![x, gamma, beta];
        let fd = finite_difference_grads(&eval, &params, 1e-5);

        let mut bn = BatchNorm::new(3);
        let mut tape = Tape::new();
        let xid = tape.param(params[0].clone());
        let gid = tape.param(params[1].clone());
        let bid = tape.param(params[2].clone());
        let y = bn.forward_train(&mut tape, xid, gid, bid).unwrap();
        let loss = tape.mean_row_sq_norm(y);
        let grads = tape.backward(loss).unwrap();
        let analytic = vec![
            grads.wrt(&tape, xid),
            grads.wrt(&tape, gid),
            grads.wrt(&tape, bid),
        ];
        let err = max_relative_error(&analytic, &fd);
        assert!(err < 1e-5, "max relative error {err}");
    }
}
