//! Entropic Gromov-Wasserstein alignment.
//!
//! Matches two point sets by comparing their intra-space squared-Euclidean
//! distance structures, so the sides may live in spaces of different
//! width. Projected gradient scheme: from the uniform outer-product
//! initialization, repeatedly linearize the quadratic distortion into a
//! cost matrix and solve the linearized problem with Sinkhorn, until the
//! plan stops moving.

use crate::numerics::matrix::{pairwise_sq_dists, Matrix};

use super::sinkhorn::sinkhorn_cost;
use super::{
    uniform_marginal, AlignSpec, AlignerKind, OtError, Result, TransportPlan, GW_OUTER_CAP,
};

/// Quadratic-distortion gradient for the current plan:
/// L(T) = C1^2 a 1' + 1 b' (C2^2)' - 2 C1 T C2'.
fn linearized_cost(
    c1: &Matrix,
    c2: &Matrix,
    c1_sq_a: &[f64],
    c2_sq_b: &[f64],
    plan: &Matrix,
) -> Result<Matrix> {
    let c1_plan = c1.matmul(plan)?;
    let c1_plan_c2t = c1_plan.matmul_nt(c2)?;
    let (n1, n2) = plan.shape();
    let mut cost = Matrix::zeros(n1, n2);
    for i in 0..n1 {
        for j in 0..n2 {
            cost.set(i, j, c1_sq_a[i] + c2_sq_b[j] - 2.0 * c1_plan_c2t.get(i, j));
        }
    }
    Ok(cost)
}

pub fn entropic_gw(za: &Matrix, zb: &Matrix, spec: &AlignSpec) -> Result<TransportPlan> {
    spec.validate()?;
    let (n1, n2) = (za.rows(), zb.rows());
    if n1 < 2 || n2 < 2 {
        return Err(OtError::InvalidInput(format!(
            "Gromov-Wasserstein needs at least 2 points per side, got {n1} and {n2}"
        )));
    }
    if !za.all_finite() || !zb.all_finite() {
        return Err(OtError::InvalidInput("non-finite embedding entry".into()));
    }
    let c1 = pairwise_sq_dists(za, za)?;
    let c2 = pairwise_sq_dists(zb, zb)?;
    if c1.data().iter().all(|&v| v == 0.0) || c2.data().iter().all(|&v| v == 0.0) {
        return Err(OtError::DegenerateGeometry);
    }
    let a = uniform_marginal(n1);
    let b = uniform_marginal(n2);
    // Constant terms of the gradient.
    let c1_sq = c1.map(|v| v * v);
    let c2_sq = c2.map(|v| v * v);
    let c1_sq_a: Vec<f64> = (0..n1)
        .map(|i| c1_sq.row(i).iter().zip(&a).map(|(c, w)| c * w).sum())
        .collect();
    let c2_sq_b: Vec<f64> = (0..n2)
        .map(|j| c2_sq.row(j).iter().zip(&b).map(|(c, w)| c * w).sum())
        .collect();

    let mut plan = Matrix::from_fn(n1, n2, |i, j| a[i] * b[j]);
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut outer = 0;
    let mut inner_ok = true;
    for it in 0..GW_OUTER_CAP {
        outer = it + 1;
        let mut cost = linearized_cost(&c1, &c2, &c1_sq_a, &c2_sq_b, &plan)?;
        // Relative epsilon: rescale the linearized cost by its mean.
        let mean = cost.mean();
        if mean.abs() > 0.0 {
            for v in cost.data_mut() {
                *v /= mean.abs();
            }
        }
        let inner = sinkhorn_cost(&cost, &a, &b, spec.epsilon, spec.max_iterations, spec.tolerance)?;
        inner_ok = inner.converged;
        change = inner.plan.sub(&plan)?.frobenius_norm();
        plan = inner.plan;
        if change < spec.tolerance.max(1e-12) {
            converged = true;
            break;
        }
    }
    let gradient = linearized_cost(&c1, &c2, &c1_sq_a, &c2_sq_b, &plan)?;
    let objective: f64 = gradient
        .data()
        .iter()
        .zip(plan.data())
        .map(|(g, p)| g * p)
        .sum();
    if converged {
        log::debug!("entropic_gw converged after {outer} outer iterations");
    } else {
        log::warn!("entropic_gw hit the outer cap ({GW_OUTER_CAP}); plan change {change:.3e}");
    }
    Ok(TransportPlan {
        coupling: plan,
        source_marginal: a,
        target_marginal: b,
        kind: AlignerKind::Egwot,
        epsilon: spec.epsilon,
        iterations: outer,
        converged: converged && inner_ok,
        residual: change,
        objective: Some(objective),
    })
}
