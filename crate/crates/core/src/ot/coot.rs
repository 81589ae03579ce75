//! Co-optimal transport: joint entropic couplings over samples and
//! features, solved by alternating Sinkhorn steps. Fixing the feature
//! coupling yields a linear sample-coupling problem and vice versa; the
//! alternation runs until neither plan moves or the outer cap is hit.

use crate::numerics::matrix::Matrix;

use super::sinkhorn::sinkhorn_cost;
use super::{
    uniform_marginal, AlignSpec, AlignerKind, OtError, Result, TransportPlan, COOT_INNER_TOL,
    COOT_OUTER_CAP,
};

/// Linearized cost for one coupling given the other:
/// M[i][j] = sum_kl (Xa[i,k] - Xb[j,l])^2 P[k,l]
///         = (Xa^2 P 1)_i + (Xb^2 P' 1)_j - 2 (Xa P Xb')_ij.
fn linearized_cost(xa: &Matrix, xb: &Matrix, other_plan: &Matrix) -> Result<Matrix> {
    let xa_sq = xa.map(|v| v * v);
    let xb_sq = xb.map(|v| v * v);
    let w: Vec<f64> = other_plan.row_sums();
    let v: Vec<f64> = other_plan.col_sums();
    let left: Vec<f64> = (0..xa.rows())
        .map(|i| xa_sq.row(i).iter().zip(&w).map(|(x, wk)| x * wk).sum())
        .collect();
    let right: Vec<f64> = (0..xb.rows())
        .map(|j| xb_sq.row(j).iter().zip(&v).map(|(x, vl)| x * vl).sum())
        .collect();
    let cross = xa.matmul(other_plan)?.matmul_nt(xb)?;
    let mut cost = Matrix::zeros(xa.rows(), xb.rows());
    for i in 0..xa.rows() {
        for j in 0..xb.rows() {
            cost.set(i, j, left[i] + right[j] - 2.0 * cross.get(i, j));
        }
    }
    Ok(cost)
}

fn solve_linearized(
    cost: &Matrix,
    a: &[f64],
    b: &[f64],
    spec: &AlignSpec,
) -> Result<(Matrix, bool)> {
    let mut scaled = cost.clone();
    let mean = scaled.mean();
    if mean.abs() > 0.0 {
        for v in scaled.data_mut() {
            *v /= mean.abs();
        }
    }
    let out = sinkhorn_cost(&scaled, a, b, spec.epsilon, spec.max_iterations, COOT_INNER_TOL)?;
    Ok((out.plan, out.converged))
}

/// Alternating sample/feature coupling optimization. Returns the sample
/// plan and the feature plan.
pub fn coot(xa: &Matrix, xb: &Matrix, spec: &AlignSpec) -> Result<(TransportPlan, TransportPlan)> {
    spec.validate()?;
    let (n1, p1) = xa.shape();
    let (n2, p2) = xb.shape();
    if n1 < 2 || n2 < 2 || p1 < 2 || p2 < 2 {
        return Err(OtError::InvalidInput(format!(
            "co-optimal transport needs at least 2 samples and 2 features per side, got {n1}x{p1} and {n2}x{p2}"
        )));
    }
    if !xa.all_finite() || !xb.all_finite() {
        return Err(OtError::InvalidInput("non-finite input entry".into()));
    }
    let sample_a = uniform_marginal(n1);
    let sample_b = uniform_marginal(n2);
    let feat_a = uniform_marginal(p1);
    let feat_b = uniform_marginal(p2);

    let mut sample_plan = Matrix::from_fn(n1, n2, |i, j| sample_a[i] * sample_b[j]);
    let mut feature_plan = Matrix::from_fn(p1, p2, |k, l| feat_a[k] * feat_b[l]);
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut outer = 0;
    let mut inner_ok = true;
    for it in 0..COOT_OUTER_CAP {
        outer = it + 1;
        let sample_cost = linearized_cost(xa, xb, &feature_plan)?;
        let (new_sample, ok_s) = solve_linearized(&sample_cost, &sample_a, &sample_b, spec)?;
        let feature_cost = linearized_cost(&xa.transpose(), &xb.transpose(), &new_sample)?;
        let (new_feature, ok_f) = solve_linearized(&feature_cost, &feat_a, &feat_b, spec)?;
        inner_ok = ok_s && ok_f;
        let sample_change = new_sample.sub(&sample_plan)?.frobenius_norm();
        let feature_change = new_feature.sub(&feature_plan)?.frobenius_norm();
        change = sample_change.max(feature_change);
        sample_plan = new_sample;
        feature_plan = new_feature;
        if change < spec.tolerance.max(1e-12) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("coot hit the outer cap ({COOT_OUTER_CAP}); plan change {change:.3e}");
    }
    // Objective: distortion of the sample cost under the final plans.
    let sample_cost = linearized_cost(xa, xb, &feature_plan)?;
    let objective: f64 = sample_cost
        .data()
        .iter()
        .zip(sample_plan.data())
        .map(|(c, p)| c * p)
        .sum();

    let make_plan = |coupling: Matrix, src: Vec<f64>, tgt: Vec<f64>| TransportPlan {
        coupling,
        source_marginal: src,
        target_marginal: tgt,
        kind: AlignerKind::LabeledCoot,
        epsilon: spec.epsilon,
        iterations: outer,
        converged: converged && inner_ok,
        residual: change,
        objective: Some(objective),
    };
    Ok((
        make_plan(sample_plan, sample_a, sample_b),
        make_plan(feature_plan, feat_a, feat_b),
    ))
}
