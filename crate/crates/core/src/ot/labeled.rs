//! Label-constrained alignment: one independent solve per shared label,
//! assembled block-diagonally so cross-label coupling entries are exactly
//! zero. Block mass is proportional to the min-normalized label frequency
//! min(freq_a, freq_b). Samples whose label has no counterpart on the
//! other side receive uniform coupling to all opposite-side samples with
//! their own marginal share, and the assembled plan is renormalized to
//! total mass one.

use std::collections::BTreeMap;

use crate::numerics::matrix::Matrix;
use crate::numerics::par;

use super::{coot, entropic_gw, sinkhorn_eot, AlignSpec, AlignerKind, OtError, Result, TransportPlan};

struct BlockResult {
    label: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    weight: f64,
    plan: Matrix,
    iterations: usize,
    converged: bool,
    residual: f64,
}

fn solve_block(
    spec: &AlignSpec,
    za: &Matrix,
    zb: &Matrix,
) -> Result<(Matrix, usize, bool, f64)> {
    // Blocks too small for the structural solvers get the only coupling
    // that needs no geometry: the uniform outer product.
    let structural_min = match spec.kind {
        AlignerKind::LabeledEgwot | AlignerKind::LabeledCoot => 2,
        _ => 1,
    };
    if za.rows() < structural_min || zb.rows() < structural_min {
        log::warn!(
            "label block of size {}x{} is too small for {}; using the uniform coupling",
            za.rows(),
            zb.rows(),
            spec.kind.name()
        );
        let (n1, n2) = (za.rows(), zb.rows());
        let plan = Matrix::filled(n1, n2, 1.0 / (n1 * n2) as f64);
        return Ok((plan, 0, true, 0.0));
    }
    let plan = match spec.kind {
        AlignerKind::LabeledEot => sinkhorn_eot(za, zb, spec)?,
        AlignerKind::LabeledEgwot => entropic_gw(za, zb, spec)?,
        AlignerKind::LabeledCoot => coot(za, zb, spec)?.0,
        _ => unreachable!("labeled() is only called for labeled kinds"),
    };
    Ok((plan.coupling, plan.iterations, plan.converged, plan.residual))
}

fn indices_by_label(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        map.entry(l).or_default().push(i);
    }
    map
}

/// Block-diagonal label-constrained alignment.
pub fn labeled(
    spec: &AlignSpec,
    za: &Matrix,
    zb: &Matrix,
    labels_a: &[usize],
    labels_b: &[usize],
) -> Result<TransportPlan> {
    spec.validate()?;
    if labels_a.len() != za.rows() || labels_b.len() != zb.rows() {
        return Err(OtError::InvalidInput(format!(
            "label counts {}/{} do not match embeddings {}x{}",
            labels_a.len(),
            labels_b.len(),
            za.rows(),
            zb.rows()
        )));
    }
    let by_label_a = indices_by_label(labels_a);
    let by_label_b = indices_by_label(labels_b);
    let shared: Vec<usize> = by_label_a
        .keys()
        .filter(|l| by_label_b.contains_key(l))
        .copied()
        .collect();
    if shared.is_empty() {
        return Err(OtError::NoSharedLabels);
    }
    let (n_a, n_b) = (labels_a.len() as f64, labels_b.len() as f64);

    // Independent block solves, deterministic reassembly order.
    let blocks: Vec<Result<BlockResult>> = par::map_indexed(shared.len(), |k| {
        let label = shared[k];
        let rows = by_label_a[&label].clone();
        let cols = by_label_b[&label].clone();
        let sub_a = za.select_rows(&rows);
        let sub_b = zb.select_rows(&cols);
        let weight = (rows.len() as f64 / n_a).min(cols.len() as f64 / n_b);
        let (plan, iterations, converged, residual) = solve_block(spec, &sub_a, &sub_b)?;
        Ok(BlockResult {
            label,
            rows,
            cols,
            weight,
            plan,
            iterations,
            converged,
            residual,
        })
    });

    let mut coupling = Matrix::zeros(za.rows(), zb.rows());
    let mut source_marginal = vec![0.0; za.rows()];
    let mut target_marginal = vec![0.0; zb.rows()];
    let mut total = 0.0;
    let mut iterations = 0;
    let mut converged = true;
    let mut residual: f64 = 0.0;
    for block in blocks {
        let block = block?;
        // Block plans have unit mass; scale to the block weight.
        for (bi, &i) in block.rows.iter().enumerate() {
            for (bj, &j) in block.cols.iter().enumerate() {
                coupling.set(i, j, block.plan.get(bi, bj) * block.weight);
            }
        }
        for &i in &block.rows {
            source_marginal[i] = block.weight / block.rows.len() as f64;
        }
        for &j in &block.cols {
            target_marginal[j] = block.weight / block.cols.len() as f64;
        }
        total += block.weight;
        iterations = iterations.max(block.iterations);
        converged &= block.converged;
        residual = residual.max(block.residual * block.weight);
        log::debug!(
            "label {} block {}x{}: weight {:.4}, converged {}",
            block.label,
            block.rows.len(),
            block.cols.len(),
            block.weight,
            block.converged
        );
    }

    // Unseen labels: uniform coupling rows/columns carrying that side's
    // own marginal share.
    for (label, rows) in &by_label_a {
        if by_label_b.contains_key(label) {
            continue;
        }
        log::warn!("label {label} only present on the source side; coupling its samples uniformly");
        let share = 1.0 / n_a;
        for &i in rows {
            for j in 0..zb.rows() {
                coupling.set(i, j, share / n_b);
            }
            source_marginal[i] = share;
            total += share;
        }
    }
    for (label, cols) in &by_label_b {
        if by_label_a.contains_key(label) {
            continue;
        }
        log::warn!("label {label} only present on the target side; coupling its samples uniformly");
        let share = 1.0 / n_b;
        for &j in cols {
            for i in 0..za.rows() {
                let v = coupling.get(i, j);
                coupling.set(i, j, v + share / n_a);
            }
            target_marginal[j] += share;
            total += share;
        }
    }
    // Unseen columns also add mass to every source row's sum; fold that
    // into the source marginal before normalization (and vice versa is
    // already handled by construction above for rows).
    for (label, cols) in &by_label_b {
        if by_label_a.contains_key(label) {
            continue;
        }
        let extra = cols.len() as f64 / n_b / n_a;
        for m in source_marginal.iter_mut() {
            *m += extra;
        }
    }
    for (label, rows) in &by_label_a {
        if by_label_b.contains_key(label) {
            continue;
        }
        let extra = rows.len() as f64 / n_a / n_b;
        for m in target_marginal.iter_mut() {
            *m += extra;
        }
    }

    if total > 0.0 {
        for v in coupling.data_mut() {
            *v /= total;
        }
        for m in source_marginal.iter_mut() {
            *m /= total;
        }
        for m in target_marginal.iter_mut() {
            *m /= total;
        }
        residual /= total;
    }

    Ok(TransportPlan {
        coupling,
        source_marginal,
        target_marginal,
        kind: spec.kind,
        epsilon: spec.epsilon,
        iterations,
        converged,
        residual,
        objective: None,
    })
}
