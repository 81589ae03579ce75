//! Central finite-difference gradient checking.
//!
//! The checker evaluates a scalar-valued closure at perturbed parameter
//! values only; it never inspects tape internals, so it is an independent
//! oracle for every analytic gradient in the crate.

use crate::numerics::matrix::Matrix;

/// Central finite-difference gradients of `f` with respect to each entry
/// of each matrix in `params`, using step `h`.
pub fn finite_difference_grads(
    f: &dyn Fn(&[Matrix]) -> f64,
    params: &[Matrix],
    h: f64,
) -> Vec<Matrix> {
    let mut grads = Vec::with_capacity(params.len());
    for (p_idx, p) in params.iter().enumerate() {
        let mut g = Matrix::zeros(p.rows(), p.cols());
        for k in 0..p.len() {
            let mut plus = params.to_vec();
            plus[p_idx].data_mut()[k] += h;
            let mut minus = params.to_vec();
            minus[p_idx].data_mut()[k] -= h;
            g.data_mut()[k] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        grads.push(g);
    }
    grads
}

/// Maximum relative error between analytic and finite-difference
/// gradients, with an absolute floor so near-zero entries do not blow up
/// the ratio.
pub fn max_relative_error(analytic: &[Matrix], numeric: &[Matrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        assert_eq!(a.shape(), n.shape(), "gradient shape mismatch");
        for (&x, &y) in a.data().iter().zip(n.data()) {
            let denom = x.abs().max(y.abs()).max(1e-4);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}
