//! Reverse-mode differentiation tape.
//!
//! Forward passes append nodes (primitive ops with cached intermediates);
//! `backward` walks the node list in reverse, visiting each node once and
//! accumulating gradients additively. Node ids are append-ordered, so the
//! reverse walk is a valid topological order.

use std::sync::Arc;

use super::matrix::{pairwise_sq_dists, Matrix};
use super::{NumericsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param,
    /// C = A @ B
    MatMul { a: NodeId, b: NodeId },
    /// C = A @ B^T
    MatMulNt { a: NodeId, b: NodeId },
    /// Row vector added to every row.
    AddRow { a: NodeId, bias: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Scale { a: NodeId, c: f64 },
    Relu { a: NodeId },
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        x_hat: Matrix,
        inv_std: Vec<f64>,
    },
    RowNormalize { a: NodeId, inv_norms: Vec<f64> },
    PairwiseSqDist { a: NodeId, b: NodeId },
    /// K = (1 + D / (tau * eta)) ^ (-(eta + 1) / 2)
    TDistKernel { d2: NodeId, tau: f64, eta: f64 },
    /// Per row i: log sum_j mask_ij * exp(s_ij), computed stably.
    LogSumExpRows { s: NodeId, mask: Option<Arc<Matrix>> },
    /// Per row i: log sum_j mask_ij * k_ij (inputs already positive).
    LogSumRows {
        k: NodeId,
        mask: Option<Arc<Matrix>>,
        row_sums: Vec<f64>,
    },
    /// (1/rows) * sum_i ||a_i||^2
    MeanRowSqNorm { a: NodeId },
    MeanAll { a: NodeId },
    SoftmaxCrossEntropy {
        logits: NodeId,
        targets: Vec<usize>,
        probs: Matrix,
    },
    /// mu + eps (x) sqrt(exp(logvar) + floor), eps a fixed draw.
    Reparam {
        mu: NodeId,
        logvar: NodeId,
        eps: Matrix,
        floor: f64,
    },
    SliceCols { a: NodeId, start: usize },
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> NodeId {
        debug_assert!(value.all_finite(), "non-finite tape value from {op:?}");
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn any_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].needs_grad)
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Constant, false)
    }

    pub fn param(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Param, true)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        let g = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul { a, b }, g))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul_nt(self.value(b))?;
        let g = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMulNt { a, b }, g))
    }

    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(NumericsError::ShapeMismatch {
                context: "add_row",
                expected: format!("1x{}", av.cols()),
                found: format!("{}x{}", bv.rows(), bv.cols()),
            });
        }
        let mut value = av.clone();
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            for (x, b) in row.iter_mut().zip(bv.row(0)) {
                *x += b;
            }
        }
        let g = self.any_grad(&[a, bias]);
        Ok(self.push(value, Op::AddRow { a, bias }, g))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).add(self.value(b))?;
        let g = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add { a, b }, g))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).sub(self.value(b))?;
        let g = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Sub { a, b }, g))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.value(a).scale(c);
        let g = self.any_grad(&[a]);
        self.push(value, Op::Scale { a, c }, g)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|v| v.max(0.0));
        let g = self.any_grad(&[a]);
        self.push(value, Op::Relu { a }, g)
    }

    /// Train-mode batch normalization using batch statistics. Returns the
    /// node plus the batch means/variances so callers can maintain running
    /// statistics. `gamma` and `beta` are 1 x cols.
    pub fn batchnorm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> Result<(NodeId, Vec<f64>, Vec<f64>)> {
        let xv = self.value(x);
        let n = xv.rows();
        if n < 2 {
            return Err(NumericsError::DegenerateBatch(n));
        }
        let cols = xv.cols();
        let gv = self.value(gamma);
        let bv = self.value(beta);
        if gv.shape() != (1, cols) || bv.shape() != (1, cols) {
            return Err(NumericsError::ShapeMismatch {
                context: "batchnorm",
                expected: format!("1x{cols} gamma/beta"),
                found: format!("{:?} / {:?}", gv.shape(), bv.shape()),
            });
        }
        let means = xv.col_means();
        let vars = xv.col_vars(&means);
        let inv_std: Vec<f64> = vars.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut x_hat = Matrix::zeros(n, cols);
        let mut value = Matrix::zeros(n, cols);
        for i in 0..n {
            for j in 0..cols {
                let xh = (xv.get(i, j) - means[j]) * inv_std[j];
                x_hat.set(i, j, xh);
                value.set(i, j, gv.get(0, j) * xh + bv.get(0, j));
            }
        }
        let g = self.any_grad(&[x, gamma, beta]);
        let id = self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                x_hat,
                inv_std,
            },
            g,
        );
        Ok((id, means, vars))
    }

    /// L2-normalize each row. Rows with norm below `min_norm` are an
    /// error: cosine similarity is undefined for them.
    pub fn row_normalize(&mut self, a: NodeId, min_norm: f64) -> Result<NodeId> {
        let av = self.value(a);
        let mut inv_norms = Vec::with_capacity(av.rows());
        for i in 0..av.rows() {
            let norm = av.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < min_norm {
                return Err(NumericsError::NonFinite("row_normalize on zero row"));
            }
            inv_norms.push(1.0 / norm);
        }
        let mut value = av.clone();
        for i in 0..value.rows() {
            let s = inv_norms[i];
            for v in value.row_mut(i) {
                *v *= s;
            }
        }
        let g = self.any_grad(&[a]);
        Ok(self.push(value, Op::RowNormalize { a, inv_norms }, g))
    }

    pub fn pairwise_sq_dist(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = pairwise_sq_dists(self.value(a), self.value(b))?;
        let g = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::PairwiseSqDist { a, b }, g))
    }

    pub fn tdist_kernel(&mut self, d2: NodeId, tau: f64, eta: f64) -> NodeId {
        let p = -(eta + 1.0) / 2.0;
        let value = self.value(d2).map(|d| (1.0 + d / (tau * eta)).powf(p));
        let g = self.any_grad(&[d2]);
        self.push(value, Op::TDistKernel { d2, tau, eta }, g)
    }

    /// Stable per-row log(sum_j mask_ij * exp(s_ij)) -> column vector.
    /// Every row must have at least one unmasked entry.
    pub fn log_sum_exp_rows(&mut self, s: NodeId, mask: Option<Arc<Matrix>>) -> Result<NodeId> {
        let sv = self.value(s);
        check_mask(sv, mask.as_deref(), "log_sum_exp_rows")?;
        let mut out = Matrix::zeros(sv.rows(), 1);
        for i in 0..sv.rows() {
            let row = sv.row(i);
            let mut max = f64::NEG_INFINITY;
            for (j, &v) in row.iter().enumerate() {
                if mask_at(mask.as_deref(), i, j) {
                    max = max.max(v);
                }
            }
            if max == f64::NEG_INFINITY {
                return Err(NumericsError::NonFinite("log_sum_exp_rows empty row"));
            }
            let mut acc = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if mask_at(mask.as_deref(), i, j) {
                    acc += (v - max).exp();
                }
            }
            out.set(i, 0, max + acc.ln());
        }
        let g = self.any_grad(&[s]);
        Ok(self.push(out, Op::LogSumExpRows { s, mask }, g))
    }

    /// Per-row log(sum_j mask_ij * k_ij) for strictly positive k.
    pub fn log_sum_rows(&mut self, k: NodeId, mask: Option<Arc<Matrix>>) -> Result<NodeId> {
        let kv = self.value(k);
        check_mask(kv, mask.as_deref(), "log_sum_rows")?;
        let mut out = Matrix::zeros(kv.rows(), 1);
        let mut row_sums = Vec::with_capacity(kv.rows());
        for i in 0..kv.rows() {
            let mut acc = 0.0;
            for (j, &v) in kv.row(i).iter().enumerate() {
                if mask_at(mask.as_deref(), i, j) {
                    acc += v;
                }
            }
            if acc <= 0.0 {
                return Err(NumericsError::NonFinite("log_sum_rows non-positive sum"));
            }
            row_sums.push(acc);
            out.set(i, 0, acc.ln());
        }
        let g = self.any_grad(&[k]);
        Ok(self.push(out, Op::LogSumRows { k, mask, row_sums }, g))
    }

    /// (1/rows) * sum_i ||a_i||^2 as a 1x1 node. This is the two-level
    /// per-sample mean-squared-error shape: squared norms summed over
    /// features, averaged over rows.
    pub fn mean_row_sq_norm(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let total: f64 = av.data().iter().map(|v| v * v).sum();
        let value = Matrix::from_vec(1, 1, vec![total / av.rows().max(1) as f64]).unwrap();
        let g = self.any_grad(&[a]);
        self.push(value, Op::MeanRowSqNorm { a }, g)
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let value = Matrix::from_vec(1, 1, vec![self.value(a).mean()]).unwrap();
        let g = self.any_grad(&[a]);
        self.push(value, Op::MeanAll { a }, g)
    }

    /// Mean negative log-softmax of the target class per row.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let lv = self.value(logits);
        if targets.len() != lv.rows() {
            return Err(NumericsError::ShapeMismatch {
                context: "softmax_cross_entropy",
                expected: format!("{} targets", lv.rows()),
                found: format!("{} targets", targets.len()),
            });
        }
        let mut probs = Matrix::zeros(lv.rows(), lv.cols());
        let mut loss = 0.0;
        for i in 0..lv.rows() {
            let row = lv.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for &v in row {
                denom += (v - max).exp();
            }
            for (j, &v) in row.iter().enumerate() {
                probs.set(i, j, (v - max).exp() / denom);
            }
            let t = targets[i];
            loss -= row[t] - max - denom.ln();
        }
        loss /= lv.rows() as f64;
        let value = Matrix::from_vec(1, 1, vec![loss]).unwrap();
        let g = self.any_grad(&[logits]);
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            g,
        ))
    }

    /// mu + eps (x) sqrt(exp(logvar) + floor) with a fixed noise draw.
    pub fn reparam(&mut self, mu: NodeId, logvar: NodeId, eps: Matrix, floor: f64) -> Result<NodeId> {
        let (mv, lv) = (self.value(mu), self.value(logvar));
        if mv.shape() != lv.shape() || mv.shape() != eps.shape() {
            return Err(NumericsError::ShapeMismatch {
                context: "reparam",
                expected: format!("{:?}", mv.shape()),
                found: format!("{:?} / {:?}", lv.shape(), eps.shape()),
            });
        }
        let mut value = mv.clone();
        for ((v, l), e) in value
            .data_mut()
            .iter_mut()
            .zip(lv.data())
            .zip(eps.data())
        {
            *v += e * (l.exp() + floor).sqrt();
        }
        let g = self.any_grad(&[mu, logvar]);
        Ok(self.push(
            value,
            Op::Reparam {
                mu,
                logvar,
                eps,
                floor,
            },
            g,
        ))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let av = self.value(a);
        if end > av.cols() || start > end {
            return Err(NumericsError::ShapeMismatch {
                context: "slice_cols",
                expected: format!("range within 0..{}", av.cols()),
                found: format!("{start}..{end}"),
            });
        }
        let value = av.slice_cols(start, end);
        let g = self.any_grad(&[a]);
        Ok(self.push(value, Op::SliceCols { a, start }, g))
    }

    /// Reverse-mode gradients of a scalar loss node. Parameters the loss
    /// does not reach get zero gradients.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(NumericsError::NonScalarLoss {
                rows: lv.rows(),
                cols: lv.cols(),
            });
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));
        for id in (0..=loss.0).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.accumulate_inputs(id, &g, &mut grads)?;
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate_inputs(
        &self,
        id: usize,
        g: &Matrix,
        grads: &mut [Option<Matrix>],
    ) -> Result<()> {
        let node = &self.nodes[id];
        match &node.op {
            Op::Constant | Op::Param => {}
            Op::MatMul { a, b } => {
                // dA = dC @ B^T ; dB = A^T @ dC
                if self.nodes[a.0].needs_grad {
                    let da = g.matmul_nt(self.value(*b))?;
                    acc(grads, *a, da, self.value(*a))?;
                }
                if self.nodes[b.0].needs_grad {
                    let db = self.value(*a).matmul_tn(g)?;
                    acc(grads, *b, db, self.value(*b))?;
                }
            }
            Op::MatMulNt { a, b } => {
                // C = A @ B^T: dA = dC @ B ; dB = dC^T @ A
                if self.nodes[a.0].needs_grad {
                    let da = g.matmul(self.value(*b))?;
                    acc(grads, *a, da, self.value(*a))?;
                }
                if self.nodes[b.0].needs_grad {
                    let db = g.matmul_tn(self.value(*a))?;
                    acc(grads, *b, db, self.value(*b))?;
                }
            }
            Op::AddRow { a, bias } => {
                if self.nodes[a.0].needs_grad {
                    acc(grads, *a, g.clone(), self.value(*a))?;
                }
                if self.nodes[bias.0].needs_grad {
                    let db = Matrix::row_vector(&g.col_sums());
                    acc(grads, *bias, db, self.value(*bias))?;
                }
            }
            Op::Add { a, b } => {
                if self.nodes[a.0].needs_grad {
                    acc(grads, *a, g.clone(), self.value(*a))?;
                }
                if self.nodes[b.0].needs_grad {
                    acc(grads, *b, g.clone(), self.value(*b))?;
                }
            }
            Op::Sub { a, b } => {
                if self.nodes[a.0].needs_grad {
                    acc(grads, *a, g.clone(), self.value(*a))?;
                }
                if self.nodes[b.0].needs_grad {
                    acc(grads, *b, g.scale(-1.0), self.value(*b))?;
                }
            }
            Op::Scale { a, c } => {
                if self.nodes[a.0].needs_grad {
                    acc(grads, *a, g.scale(*c), self.value(*a))?;
                }
            }
            Op::Relu { a } => {
                if self.nodes[a.0].needs_grad {
                    let mut da = g.clone();
                    for (d, &v) in da.data_mut().iter_mut().zip(node.value.data()) {
                        if v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    acc(grads, *a, da, self.value(*a))?;
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                x_hat,
                inv_std,
            } => {
                let n = x_hat.rows() as f64;
                let cols = x_hat.cols();
                let gv = self.value(*gamma);
                // Per-column reductions of the upstream gradient.
                let mut sum_g = vec![0.0; cols];
                let mut sum_gx = vec![0.0; cols];
                for i in 0..x_hat.rows() {
                    for j in 0..cols {
                        sum_g[j] += g.get(i, j);
                        sum_gx[j] += g.get(i, j) * x_hat.get(i, j);
                    }
                }
                if self.nodes[gamma.0].needs_grad {
                    acc(grads, *gamma, Matrix::row_vector(&sum_gx), gv)?;
                }
                if self.nodes[beta.0].needs_grad {
                    acc(grads, *beta, Matrix::row_vector(&sum_g), self.value(*beta))?;
                }
                if self.nodes[x.0].needs_grad {
                    let mut dx = Matrix::zeros(x_hat.rows(), cols);
                    for i in 0..x_hat.rows() {
                        for j in 0..cols {
                            let coef = gv.get(0, j) * inv_std[j] / n;
                            dx.set(
                                i,
                                j,
                                coef * (n * g.get(i, j)
                                    - sum_g[j]
                                    - x_hat.get(i, j) * sum_gx[j]),
                            );
                        }
                    }
                    acc(grads, *x, dx, self.value(*x))?;
                }
            }
            Op::RowNormalize { a, inv_norms } => {
                if self.nodes[a.0].needs_grad {
                    let y = &node.value;
                    let mut da = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let gi = g.row(i);
                        let yi = y.row(i);
                        let dot: f64 = gi.iter().zip(yi).map(|(a, b)| a * b).sum();
                        let inv = inv_norms[i];
                        for j in 0..y.cols() {
                            da.set(i, j, inv * (gi[j] - yi[j] * dot));
                        }
                    }
                    acc(grads, *a, da, self.value(*a))?;
                }
            }
            Op::PairwiseSqDist { a, b } => {
                let av = self.value(*a);
                let bv = self.value(*b);
                if self.nodes[a.0].needs_grad {
                    // da_i = 2 * (a_i * rowsum_i(g) - (g @ B)_i)
                    let gb = g.matmul(bv)?;
                    let row_sums = g.row_sums();
                    let mut da = Matrix::zeros(av.rows(), av.cols());
                    for i in 0..av.rows() {
                        for j in 0..av.cols() {
                            da.set(i, j, 2.0 * (av.get(i, j) * row_sums[i] - gb.get(i, j)));
                        }
                    }
                    acc(grads, *a, da, av)?;
                }
                if self.nodes[b.0].needs_grad {
                    // db_j = 2 * (b_j * colsum_j(g) - (g^T @ A)_j)
                    let ga = g.matmul_tn(av)?;
                    let col_sums = g.col_sums();
                    let mut db = Matrix::zeros(bv.rows(), bv.cols());
                    for i in 0..bv.rows() {
                        for j in 0..bv.cols() {
                            db.set(i, j, 2.0 * (bv.get(i, j) * col_sums[i] - ga.get(i, j)));
                        }
                    }
                    acc(grads, *b, db, bv)?;
                }
            }
            Op::TDistKernel { d2, tau, eta } => {
                if self.nodes[d2.0].needs_grad {
                    let dv = self.value(*d2);
                    let p = -(eta + 3.0) / 2.0;
                    let coef = -(eta + 1.0) / (2.0 * tau * eta);
                    let mut dd = g.clone();
                    for (gd, &d) in dd.data_mut().iter_mut().zip(dv.data()) {
                        *gd *= coef * (1.0 + d / (tau * eta)).powf(p);
                    }
                    acc(grads, *d2, dd, dv)?;
                }
            }
            Op::LogSumExpRows { s, mask } => {
                if self.nodes[s.0].needs_grad {
                    let sv = self.value(*s);
                    let mut ds = Matrix::zeros(sv.rows(), sv.cols());
                    for i in 0..sv.rows() {
                        let lse = node.value.get(i, 0);
                        let gi = g.get(i, 0);
                        for j in 0..sv.cols() {
                            if mask_at(mask.as_deref(), i, j) {
                                ds.set(i, j, gi * (sv.get(i, j) - lse).exp());
                            }
                        }
                    }
                    acc(grads, *s, ds, sv)?;
                }
            }
            Op::LogSumRows { k, mask, row_sums } => {
                if self.nodes[k.0].needs_grad {
                    let kv = self.value(*k);
                    let mut dk = Matrix::zeros(kv.rows(), kv.cols());
                    for i in 0..kv.rows() {
                        let gi = g.get(i, 0) / row_sums[i];
                        for j in 0..kv.cols() {
                            if mask_at(mask.as_deref(), i, j) {
                                dk.set(i, j, gi);
                            }
                        }
                    }
                    acc(grads, *k, dk, kv)?;
                }
            }
            Op::MeanRowSqNorm { a } => {
                if self.nodes[a.0].needs_grad {
                    let av = self.value(*a);
                    let coef = 2.0 * g.scalar() / av.rows().max(1) as f64;
                    acc(grads, *a, av.scale(coef), av)?;
                }
            }
            Op::MeanAll { a } => {
                if self.nodes[a.0].needs_grad {
                    let av = self.value(*a);
                    let coef = g.scalar() / av.len().max(1) as f64;
                    acc(grads, *a, Matrix::filled(av.rows(), av.cols(), coef), av)?;
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                if self.nodes[logits.0].needs_grad {
                    let coef = g.scalar() / probs.rows() as f64;
                    let mut dl = probs.scale(coef);
                    for (i, &t) in targets.iter().enumerate() {
                        let v = dl.get(i, t);
                        dl.set(i, t, v - coef);
                    }
                    acc(grads, *logits, dl, self.value(*logits))?;
                }
            }
            Op::Reparam {
                mu,
                logvar,
                eps,
                floor,
            } => {
                if self.nodes[mu.0].needs_grad {
                    acc(grads, *mu, g.clone(), self.value(*mu))?;
                }
                if self.nodes[logvar.0].needs_grad {
                    let lv = self.value(*logvar);
                    let mut dl = g.clone();
                    for ((d, &l), &e) in
                        dl.data_mut().iter_mut().zip(lv.data()).zip(eps.data())
                    {
                        let ex = l.exp();
                        *d *= e * 0.5 * ex / (ex + floor).sqrt();
                    }
                    acc(grads, *logvar, dl, lv)?;
                }
            }
            Op::SliceCols { a, start } => {
                if self.nodes[a.0].needs_grad {
                    let av = self.value(*a);
                    let mut da = Matrix::zeros(av.rows(), av.cols());
                    for i in 0..g.rows() {
                        for j in 0..g.cols() {
                            da.set(i, start + j, g.get(i, j));
                        }
                    }
                    acc(grads, *a, da, av)?;
                }
            }
        }
        Ok(())
    }
}

fn mask_at(mask: Option<&Matrix>, i: usize, j: usize) -> bool {
    mask.is_none_or(|m| m.get(i, j) != 0.0)
}

fn check_mask(value: &Matrix, mask: Option<&Matrix>, context: &'static str) -> Result<()> {
    if let Some(m) = mask {
        if m.shape() != value.shape() {
            return Err(NumericsError::ShapeMismatch {
                context,
                expected: format!("mask {:?}", value.shape()),
                found: format!("{:?}", m.shape()),
            });
        }
    }
    Ok(())
}

fn acc(
    grads: &mut [Option<Matrix>],
    id: NodeId,
    delta: Matrix,
    value: &Matrix,
) -> Result<()> {
    debug_assert_eq!(delta.shape(), value.shape());
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&delta)?,
        slot @ None => *slot = Some(delta),
    }
    Ok(())
}

pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient with respect to `id`; zero matrix when the loss never
    /// reached it.
    pub fn wrt(&self, tape: &Tape, id: NodeId) -> Matrix {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let v = tape.value(id);
                Matrix::zeros(v.rows(), v.cols())
            }
        }
    }

    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads[id.0].as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_difference_grads, max_relative_error};
    use crate::numerics::rng::RngStream;

    fn random_matrix(rng: &mut RngStream, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    #[test]
    fn sum_of_params_has_unit_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(Matrix::from_fn(3, 2, |i, j| (i + j) as f64));
        let loss = tape.mean_all(p);
        let loss = tape.scale(loss, 6.0); // mean * count = sum
        let grads = tape.backward(loss).unwrap();
        let g = grads.wrt(&tape, p);
        assert!(g.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn unreached_param_gets_zero_gradient() {
        let mut tape = Tape::new();
        let used = tape.param(Matrix::filled(2, 2, 1.0));
        let unused = tape.param(Matrix::filled(2, 2, 5.0));
        let loss = tape.mean_row_sq_norm(used);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(unused).is_none());
        let z = grads.wrt(&tape, unused);
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scaled_by_zero_gives_zero_gradient() {
        let mut tape = Tape::new();
        let p = tape.param(Matrix::filled(2, 3, 2.0));
        let z = tape.scale(p, 0.0);
        let loss = tape.mean_all(z);
        let grads = tape.backward(loss).unwrap();
        let g = grads.wrt(&tape, p);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let p = tape.param(Matrix::filled(2, 2, 1.0));
        assert!(matches!(
            tape.backward(p),
            Err(NumericsError::NonScalarLoss { .. })
        ));
    }

    /// Builds a scalar from a composite of most tape ops and checks the
    /// analytic gradient against central finite differences.
    #[test]
    fn composite_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(17);
        let x = random_matrix(&mut rng, 4, 3);
        let w = random_matrix(&mut rng, 3, 5);
        let b = random_matrix(&mut rng, 1, 5);
        let gamma = Matrix::from_fn(1, 5, |_, j| 1.0 + 0.1 * j as f64);
        let beta = Matrix::from_fn(1, 5, |_, j| 0.2 * j as f64);
        let eval = |params: &[Matrix]| -> f64 {
            let mut tape = Tape::new();
            let xid = tape.constant(params[0].clone());
            let wid = tape.param(params[1].clone());
            let bid = tape.param(params[2].clone());
            let gid = tape.param(params[3].clone());
            let beid = tape.param(params[4].clone());
            let h = tape.matmul(xid, wid).unwrap();
            let h = tape.add_row(h, bid).unwrap();
            let (h, _, _) = tape.batchnorm(h, gid, beid, 1e-10).unwrap();
            let h = tape.relu(h);
            let loss = tape.mean_row_sq_norm(h);
            tape.value(loss).scalar()
        };
        let params = vec![x.clone(), w.clone(), b.clone(), gamma.clone(), beta.clone()];

        let mut tape = Tape::new();
        let xid = tape.constant(x);
        let wid = tape.param(w);
        let bid = tape.param(b);
        let gid = tape.param(gamma);
        let beid = tape.param(beta);
        let h = tape.matmul(xid, wid).unwrap();
        let h = tape.add_row(h, bid).unwrap();
        let (h, _, _) = tape.batchnorm(h, gid, beid, 1e-10).unwrap();
        let h = tape.relu(h);
        let loss = tape.mean_row_sq_norm(h);
        let grads = tape.backward(loss).unwrap();
        let analytic = vec![
            grads.wrt(&tape, wid),
            grads.wrt(&tape, bid),
            grads.wrt(&tape, gid),
            grads.wrt(&tape, beid),
        ];

        let fd_all = finite_difference_grads(&eval, &params, 1e-5);
        let numeric = fd_all[1..].to_vec();
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn similarity_chain_gradients_match_finite_differences() {
        let mut rng = RngStream::new(23);
        let za = random_matrix(&mut rng, 5, 4);
        let zb = random_matrix(&mut rng, 6, 4);
        let mask = Arc::new(Matrix::from_fn(5, 6, |i, j| ((i + j) % 2 == 0) as u8 as f64));

        let eval = |params: &[Matrix]| -> f64 {
            let mut tape = Tape::new();
            let a = tape.param(params[0].clone());
            let b = tape.param(params[1].clone());
            let an = tape.row_normalize(a, 1e-12).unwrap();
            let bn = tape.row_normalize(b, 1e-12).unwrap();
            let s = tape.matmul_nt(an, bn).unwrap();
            let s = tape.scale(s, 1.0 / 0.2);
            let lse_all = tape.log_sum_exp_rows(s, None).unwrap();
            let lse_pos = tape.log_sum_exp_rows(s, Some(mask.clone())).unwrap();
            let diff = tape.sub(lse_all, lse_pos).unwrap();
            let cosine_term = tape.mean_all(diff);

            let d2 = tape.pairwise_sq_dist(a, b).unwrap();
            let k = tape.tdist_kernel(d2, 0.2, 1.0);
            let l_all = tape.log_sum_rows(k, None).unwrap();
            let l_pos = tape.log_sum_rows(k, Some(mask.clone())).unwrap();
            let tdiff = tape.sub(l_all, l_pos).unwrap();
            let t_term = tape.mean_all(tdiff);

            let total = tape.add(cosine_term, t_term).unwrap();
            tape.value(total).scalar()
        };

        let params = vec![za, zb];
        let fd = finite_difference_grads(&eval, &params, 1e-6);

        let mut tape = Tape::new();
        let a = tape.param(params[0].clone());
        let b = tape.param(params[1].clone());
        let an = tape.row_normalize(a, 1e-12).unwrap();
        let bn = tape.row_normalize(b, 1e-12).unwrap();
        let s = tape.matmul_nt(an, bn).unwrap();
        let s = tape.scale(s, 1.0 / 0.2);
        let lse_all = tape.log_sum_exp_rows(s, None).unwrap();
        let lse_pos = tape.log_sum_exp_rows(s, Some(mask.clone())).unwrap();
        let diff = tape.sub(lse_all, lse_pos).unwrap();
        let cosine_term = tape.mean_all(diff);
        let d2 = tape.pairwise_sq_dist(a, b).unwrap();
        let k = tape.tdist_kernel(d2, 0.2, 1.0);
        let l_all = tape.log_sum_rows(k, None).unwrap();
        let l_pos = tape.log_sum_rows(k, Some(mask)).unwrap();
        let tdiff = tape.sub(l_all, l_pos).unwrap();
        let t_term = tape.mean_all(tdiff);
        let total = tape.add(cosine_term, t_term).unwrap();
        let grads = tape.backward(total).unwrap();
        let analytic = vec![grads.wrt(&tape, a), grads.wrt(&tape, b)];

        let err = max_relative_error(&analytic, &fd);
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn reparam_softmax_slice_gradients_match_finite_differences() {
        let mut rng = RngStream::new(31);
        let x = random_matrix(&mut rng, 6, 4); // 2d with d=2
        let eps = random_matrix(&mut rng, 6, 2);
        let targets = vec![0usize, 1, 1, 0, 1, 0];

        let eval = |params: &[Matrix]| -> f64 {
            let mut tape = Tape::new();
            let xid = tape.param(params[0].clone());
            let mu = tape.slice_cols(xid, 0, 2).unwrap();
            let logvar = tape.slice_cols(xid, 2, 4).unwrap();
            let z = tape.reparam(mu, logvar, eps.clone(), 1e-4).unwrap();
            let loss = tape.softmax_cross_entropy(z, &targets).unwrap();
            tape.value(loss).scalar()
        };
        let params = vec![x];
        let fd = finite_difference_grads(&eval, &params, 1e-6);

        let mut tape = Tape::new();
        let xid = tape.param(params[0].clone());
        let mu = tape.slice_cols(xid, 0, 2).unwrap();
        let logvar = tape.slice_cols(xid, 2, 4).unwrap();
        let z = tape.reparam(mu, logvar, eps.clone(), 1e-4).unwrap();
        let loss = tape.softmax_cross_entropy(z, &targets).unwrap();
        let grads = tape.backward(loss).unwrap();
        let analytic = vec![grads.wrt(&tape, xid)];
        let err = max_relative_error(&analytic, &fd);
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn batchnorm_rejects_single_row_batches() {
        let mut tape = Tape::new();
        let x = tape.param(Matrix::filled(1, 3, 1.0));
        let g = tape.param(Matrix::filled(1, 3, 1.0));
        let b = tape.param(Matrix::filled(1, 3, 0.0));
        assert!(matches!(
            tape.batchnorm(x, g, b, 1e-10),
            Err(NumericsError::DegenerateBatch(1))
        ));
    }
}
