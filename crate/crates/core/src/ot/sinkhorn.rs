//! Log-domain Sinkhorn iterations.

use crate::numerics::matrix::{pairwise_sq_dists, Matrix};
use crate::numerics::par;

use super::{uniform_marginal, AlignSpec, AlignerKind, OtError, Result, TransportPlan};

pub struct SinkhornOutput {
    pub plan: Matrix,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    /// Marginal violation after each iteration; non-increasing.
    pub residual_history: Vec<f64>,
}

/// Entropic-regularized coupling for an explicit cost matrix and absolute
/// epsilon, iterated in the log domain until the worst marginal violation
/// drops below `tol` or `max_iter` is reached.
pub fn sinkhorn_cost(
    cost: &Matrix,
    a: &[f64],
    b: &[f64],
    eps: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornOutput> {
    let (n1, n2) = cost.shape();
    if a.len() != n1 || b.len() != n2 {
        return Err(OtError::InvalidInput(format!(
            "marginal lengths {}/{} do not match cost {n1}x{n2}",
            a.len(),
            b.len()
        )));
    }
    if !cost.all_finite() {
        return Err(OtError::InvalidInput("non-finite cost entry".into()));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(OtError::InvalidInput(format!("epsilon {eps} must be positive")));
    }
    let log_a: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|v| v.ln()).collect();
    let mut f = vec![0.0; n1];
    let mut g = vec![0.0; n2];

    let lse = |terms: &mut dyn Iterator<Item = f64>| -> f64 {
        let vals: Vec<f64> = terms.collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    };

    let mut residual_history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        // Row update makes row marginals exact.
        let new_f = par::map_indexed(n1, |i| {
            let row = cost.row(i);
            let mut terms = row.iter().zip(&g).map(|(c, gj)| (gj - c) / eps);
            eps * (log_a[i] - lse(&mut terms))
        });
        f = new_f;
        // Column update makes column marginals exact.
        let new_g = par::map_indexed(n2, |j| {
            let mut terms = (0..n1).map(|i| (f[i] - cost.get(i, j)) / eps);
            eps * (log_b[j] - lse(&mut terms))
        });
        g = new_g;
        // After the column update, rows carry the remaining violation.
        let row_sums = par::map_indexed(n1, |i| {
            cost.row(i)
                .iter()
                .zip(&g)
                .map(|(c, gj)| ((f[i] + gj - c) / eps).exp())
                .sum::<f64>()
        });
        residual = row_sums
            .iter()
            .zip(a)
            .map(|(s, ai)| (s - ai).abs())
            .fold(0.0_f64, f64::max);
        residual_history.push(residual);
        if residual < tol {
            break;
        }
    }

    let mut plan = Matrix::zeros(n1, n2);
    {
        let f_ref = &f;
        let g_ref = &g;
        par::for_each_chunk_mut(plan.data_mut(), n2, |i, row| {
            let ci = cost.row(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = ((f_ref[i] + g_ref[j] - ci[j]) / eps).exp();
            }
        });
    }
    round_to_marginals(&mut plan, a, b);
    Ok(SinkhornOutput {
        plan,
        iterations,
        converged: residual < tol,
        residual,
        residual_history,
    })
}

/// Project a near-feasible nonnegative plan onto the transport polytope:
/// cap row then column sums at their marginals, then restore the missing
/// mass with a rank-one correction. The plan moves by at most the raw
/// marginal violation; near-permutation instances where Sinkhorn's
/// contraction rate collapses still come out exactly feasible.
fn round_to_marginals(plan: &mut Matrix, a: &[f64], b: &[f64]) {
    let (n1, n2) = plan.shape();
    for i in 0..n1 {
        let sum: f64 = plan.row(i).iter().sum();
        if sum > a[i] {
            let scale = a[i] / sum;
            for v in plan.row_mut(i) {
                *v *= scale;
            }
        }
    }
    let col_sums = plan.col_sums();
    for j in 0..n2 {
        if col_sums[j] > b[j] {
            let scale = b[j] / col_sums[j];
            for i in 0..n1 {
                let v = plan.get(i, j);
                plan.set(i, j, v * scale);
            }
        }
    }
    let row_err: Vec<f64> = plan
        .row_sums()
        .iter()
        .zip(a)
        .map(|(s, m)| (m - s).max(0.0))
        .collect();
    let col_err: Vec<f64> = plan
        .col_sums()
        .iter()
        .zip(b)
        .map(|(s, m)| (m - s).max(0.0))
        .collect();
    let total: f64 = row_err.iter().sum();
    if total > 0.0 {
        for i in 0..n1 {
            if row_err[i] == 0.0 {
                continue;
            }
            for j in 0..n2 {
                let v = plan.get(i, j);
                plan.set(i, j, v + row_err[i] * col_err[j] / total);
            }
        }
    }
}

/// Entropic OT between two embeddings in a shared space: squared
/// Euclidean cost divided by its mean, uniform marginals.
pub fn sinkhorn_eot(za: &Matrix, zb: &Matrix, spec: &AlignSpec) -> Result<TransportPlan> {
    spec.validate()?;
    if za.cols() != zb.cols() {
        return Err(OtError::InvalidInput(format!(
            "embedding widths differ: {} vs {}",
            za.cols(),
            zb.cols()
        )));
    }
    if za.rows() == 0 || zb.rows() == 0 {
        return Err(OtError::InvalidInput("empty embedding".into()));
    }
    if !za.all_finite() || !zb.all_finite() {
        return Err(OtError::InvalidInput("non-finite embedding entry".into()));
    }
    let mut cost = pairwise_sq_dists(za, zb)?;
    let mean = cost.mean();
    if mean > 0.0 {
        for v in cost.data_mut() {
            *v /= mean;
        }
    }
    let a = uniform_marginal(za.rows());
    let b = uniform_marginal(zb.rows());
    let out = sinkhorn_cost(&cost, &a, &b, spec.epsilon, spec.max_iterations, spec.tolerance)?;
    Ok(TransportPlan {
        coupling: out.plan,
        source_marginal: a,
        target_marginal: b,
        kind: AlignerKind::Eot,
        epsilon: spec.epsilon,
        iterations: out.iterations,
        converged: out.converged,
        residual: out.residual,
        objective: None,
    })
}
