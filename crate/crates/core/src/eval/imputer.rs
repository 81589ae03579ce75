//! Cross-modal imputer trained through a transport plan.
//!
//! For each source sample (a plan column), a target index is drawn from
//! the normalized plan column each mini-batch, and a small MLP regresses
//! source features onto the drawn target's features under squared error.

use serde::{Deserialize, Serialize};

use crate::numerics::adam::{AdamConfig, AdamState};
use crate::numerics::matrix::Matrix;
use crate::numerics::nn::{dense_forward, Activation, Dense};
use crate::numerics::rng::RngStream;
use crate::numerics::tape::Tape;

use super::{EvalError, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImputerConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ImputerConfig {
    fn default() -> Self {
        ImputerConfig {
            hidden: 256,
            learning_rate: 1e-3,
            iterations: 1000,
            batch_size: 128,
            seed: 0,
        }
    }
}

/// Two relu layers and a final linear projection from source width to
/// target width.
#[derive(Debug, Clone)]
pub struct ImputerModel {
    pub l1: Dense,
    pub l2: Dense,
    pub head: Dense,
}

impl ImputerModel {
    fn new(src_width: usize, tgt_width: usize, hidden: usize, rng: &mut RngStream) -> Self {
        ImputerModel {
            l1: Dense::he(src_width, hidden, rng),
            l2: Dense::he(hidden, hidden, rng),
            head: Dense::xavier(hidden, tgt_width, rng),
        }
    }

    pub fn source_width(&self) -> usize {
        self.l1.in_dim()
    }

    pub fn target_width(&self) -> usize {
        self.head.out_dim()
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.l1.weight,
            &mut self.l1.bias,
            &mut self.l2.weight,
            &mut self.l2.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }

    fn params(&self) -> Vec<&Matrix> {
        vec![
            &self.l1.weight,
            &self.l1.bias,
            &self.l2.weight,
            &self.l2.bias,
            &self.head.weight,
            &self.head.bias,
        ]
    }
}

/// Normalized plan columns: distribution over target indices per source
/// sample. Errors on a zero-mass column, naming the sample.
fn column_distributions(plan: &Matrix) -> Result<Vec<Vec<f64>>> {
    let (n_tgt, n_src) = plan.shape();
    let mut cols = Vec::with_capacity(n_src);
    for j in 0..n_src {
        let mut col: Vec<f64> = (0..n_tgt).map(|i| plan.get(i, j)).collect();
        let total: f64 = col.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(EvalError::DegenerateColumn { sample: j });
        }
        col.iter_mut().for_each(|v| *v /= total);
        cols.push(col);
    }
    Ok(cols)
}

/// Train the imputer: `plan` is target-rows x source-columns; `x_src`
/// rows correspond to plan columns, `x_tgt` rows to plan rows.
pub fn train_imputer(
    plan: &Matrix,
    x_src: &Matrix,
    x_tgt: &Matrix,
    config: &ImputerConfig,
) -> Result<ImputerModel> {
    if plan.cols() != x_src.rows() {
        return Err(EvalError::Shape(format!(
            "plan has {} columns but the source has {} rows",
            plan.cols(),
            x_src.rows()
        )));
    }
    if plan.rows() != x_tgt.rows() {
        return Err(EvalError::Shape(format!(
            "plan has {} rows but the target has {} rows",
            plan.rows(),
            x_tgt.rows()
        )));
    }
    let col_dists = column_distributions(plan)?;
    let mut rng = RngStream::new(config.seed);
    let mut model = ImputerModel::new(x_src.cols(), x_tgt.cols(), config.hidden, &mut rng);
    let mut adam = AdamState::new(&model.params(), AdamConfig::with_lr(config.learning_rate));

    let n_src = x_src.rows();
    let batch = config.batch_size.min(n_src);
    let mut order: Vec<usize> = (0..n_src).collect();
    let mut cursor = n_src;
    for _ in 0..config.iterations {
        if cursor + batch > n_src {
            rng.shuffle(&mut order);
            cursor = 0;
        }
        let src_idx = &order[cursor..cursor + batch];
        cursor += batch;
        // Fresh multinomial target draws every mini-batch.
        let tgt_idx: Vec<usize> = src_idx
            .iter()
            .map(|&i| rng.multinomial(&col_dists[i]))
            .collect::<std::result::Result<_, _>>()?;
        let bx = x_src.select_rows(src_idx);
        let by = x_tgt.select_rows(&tgt_idx);

        let mut tape = Tape::new();
        let w1 = tape.param(model.l1.weight.clone());
        let b1 = tape.param(model.l1.bias.clone());
        let w2 = tape.param(model.l2.weight.clone());
        let b2 = tape.param(model.l2.bias.clone());
        let wh = tape.param(model.head.weight.clone());
        let bh = tape.param(model.head.bias.clone());
        let xid = tape.constant(bx);
        let h = dense_forward(&mut tape, xid, w1, b1, Activation::Relu)?;
        let h = dense_forward(&mut tape, h, w2, b2, Activation::Relu)?;
        let pred = dense_forward(&mut tape, h, wh, bh, Activation::Identity)?;
        let yid = tape.constant(by);
        let residual = tape.sub(pred, yid)?;
        let loss = tape.mean_row_sq_norm(residual);
        let grads = tape.backward(loss)?;
        let ordered: Vec<Matrix> = [w1, b1, w2, b2, wh, bh]
            .iter()
            .map(|&id| grads.wrt(&tape, id))
            .collect();
        adam.step(&mut model.params_mut(), &ordered)?;
    }
    Ok(model)
}

/// Deterministic forward pass.
pub fn impute(model: &ImputerModel, x_src: &Matrix) -> Result<Matrix> {
    if x_src.cols() != model.source_width() {
        return Err(EvalError::Shape(format!(
            "imputer expects {} source features, got {}",
            model.source_width(),
            x_src.cols()
        )));
    }
    let h = model.l1.forward_eval(x_src, Activation::Relu)?;
    let h = model.l2.forward_eval(&h, Activation::Relu)?;
    Ok(model.head.forward_eval(&h, Activation::Identity)?)
}
