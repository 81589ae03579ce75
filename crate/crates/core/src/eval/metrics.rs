//! Matching and imputation metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::numerics::matrix::Matrix;
use crate::numerics::par;

use super::{EvalError, Result};

/// Neighborhood size for the KNN metrics.
pub const KNN_K: usize = 10;

/// Normalized trace of a row-normalized square plan: the average weight
/// assigned to true pairs (evaluation data is ordered so pair i sits on
/// the diagonal).
pub fn trace_metric(plan: &Matrix) -> Result<f64> {
    let (rows, cols) = plan.shape();
    if rows != cols {
        return Err(EvalError::NonSquarePlan { rows, cols });
    }
    if rows == 0 {
        return Err(EvalError::Shape("empty plan".into()));
    }
    let mut total = 0.0;
    for i in 0..rows {
        let row_sum: f64 = plan.row(i).iter().sum();
        if row_sum > 0.0 {
            total += plan.get(i, i) / row_sum;
        }
    }
    Ok(total / rows as f64)
}

/// One direction of the barycentric fraction-of-samples-closer-than-the-
/// true-match: project with the row-normalized plan, then for each sample
/// count the non-matches that sit strictly closer than the true match.
fn foscttm_direction(plan: &Matrix, x: &Matrix) -> Result<f64> {
    let (rows, cols) = plan.shape();
    if rows != cols {
        return Err(EvalError::NonSquarePlan { rows, cols });
    }
    if cols != x.rows() {
        return Err(EvalError::Shape(format!(
            "plan is {rows}x{cols} but the data has {} rows",
            x.rows()
        )));
    }
    let n = rows;
    if n < 2 {
        return Err(EvalError::Shape("foscttm needs at least 2 samples".into()));
    }
    let mut normalized = plan.clone();
    for i in 0..n {
        let s: f64 = normalized.row(i).iter().sum();
        if s > 0.0 {
            for v in normalized.row_mut(i) {
                *v /= s;
            }
        }
    }
    let projected = normalized.matmul(x)?;
    let fractions = par::map_indexed(n, |i| {
        let pi = projected.row(i);
        let d_true: f64 = pi
            .iter()
            .zip(x.row(i))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let mut closer = 0usize;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d: f64 = pi
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < d_true {
                closer += 1;
            }
        }
        closer as f64 / (n - 1) as f64
    });
    Ok(fractions.iter().sum::<f64>() / n as f64)
}

/// Symmetric barycentric FOSCTTM: the average of projecting into modality
/// 1 with the plan and into modality 2 with its transpose. 0 is perfect
/// matching; uniform random assignment sits at 0.5.
pub fn barycentric_foscttm(plan: &Matrix, x1: &Matrix, x2: &Matrix) -> Result<f64> {
    let d1 = foscttm_direction(plan, x1)?;
    let d2 = foscttm_direction(&plan.transpose(), x2)?;
    Ok(0.5 * (d1 + d2))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImputationMetrics {
    pub mse: f64,
    pub wd: f64,
    pub cos_sim: f64,
    pub knn_recall: f64,
    pub knn_pr: f64,
    pub knn_roc: f64,
}

impl ImputationMetrics {
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("mse", self.mse),
            ("wd", self.wd),
            ("cos_sim", self.cos_sim),
            ("knn_recall", self.knn_recall),
            ("knn_pr", self.knn_pr),
            ("knn_roc", self.knn_roc),
        ]
    }
}

/// Univariate 1-Wasserstein distance between empirical distributions.
/// Equal sizes reduce to the mean absolute difference of order
/// statistics; unequal sizes use the general quantile coupling.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    if sa.len() == sb.len() {
        return sa
            .iter()
            .zip(&sb)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / sa.len().max(1) as f64;
    }
    // Walk the merged quantile breakpoints i/n and j/m.
    let (n, m) = (sa.len(), sb.len());
    let mut i = 0usize;
    let mut j = 0usize;
    let mut q = 0.0;
    let mut total = 0.0;
    while i < n && j < m {
        let qa = (i + 1) as f64 / n as f64;
        let qb = (j + 1) as f64 / m as f64;
        let next = qa.min(qb);
        total += (next - q) * (sa[i] - sb[j]).abs();
        q = next;
        if qa <= qb + 1e-15 {
            i += 1;
        }
        if qb <= qa + 1e-15 {
            j += 1;
        }
    }
    total
}

/// Cosine similarity between two equal-length vectors; zero-norm inputs
/// return None.
fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some(dot / (na * nb))
}

/// Row-cosine similarity matrix with zero-norm rows scored 0.
fn row_cosine_matrix(x: &Matrix) -> Matrix {
    let n = x.rows();
    let norms: Vec<f64> = x.row_sq_norms().iter().map(|v| v.sqrt()).collect();
    let mut out = x.matmul_nt(x).unwrap();
    for i in 0..n {
        for j in 0..n {
            let denom = norms[i] * norms[j];
            let v = if denom < 1e-24 { 0.0 } else { out.get(i, j) / denom };
            out.set(i, j, v);
        }
    }
    out
}

/// k nearest neighbors per row under cosine similarity, self excluded,
/// ties broken by lower index.
fn knn_sets(sim: &Matrix, k: usize) -> Vec<Vec<usize>> {
    let n = sim.rows();
    (0..n)
        .map(|i| {
            let mut candidates: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            candidates.sort_by(|&a, &b| {
                sim.get(i, b)
                    .total_cmp(&sim.get(i, a))
                    .then(a.cmp(&b))
            });
            candidates.truncate(k);
            candidates
        })
        .collect()
}

/// Average precision of a ranked binary list (ranked by score descending,
/// ties by lower index).
fn average_precision(scores: &[f64], positives: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let n_pos = positives.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        if positives[idx] {
            hits += 1;
            ap += hits as f64 / (rank + 1) as f64;
        }
    }
    ap / n_pos as f64
}

/// ROC AUC via the rank statistic, ties handled with average ranks.
fn roc_auc(scores: &[f64], positives: &[bool]) -> f64 {
    let n = scores.len();
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        i = j + 1;
    }
    let pos_rank_sum: f64 = (0..n).filter(|&i| positives[i]).map(|i| ranks[i]).sum();
    (pos_rank_sum - n_pos as f64 * (n_pos as f64 + 1.0) / 2.0) / (n_pos as f64 * n_neg as f64)
}

/// The six imputation metrics between a true matrix and a prediction of
/// the same shape.
pub fn imputation_metrics(x_true: &Matrix, x_hat: &Matrix, k: usize) -> Result<ImputationMetrics> {
    if x_true.shape() != x_hat.shape() {
        return Err(EvalError::Shape(format!(
            "true {:?} vs predicted {:?}",
            x_true.shape(),
            x_hat.shape()
        )));
    }
    let (n, p) = x_true.shape();
    if n <= k {
        return Err(EvalError::KnnInfeasible { n, k });
    }

    let mse = x_true
        .sub(x_hat)?
        .data()
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        / (n * p) as f64;

    let mut wd = 0.0;
    let mut cos_total = 0.0;
    for j in 0..p {
        let col_true: Vec<f64> = x_true.col_iter(j).collect();
        let col_hat: Vec<f64> = x_hat.col_iter(j).collect();
        wd += wasserstein_1d(&col_true, &col_hat);
        match cosine(&col_true, &col_hat) {
            Some(c) => cos_total += c,
            None => {
                log::warn!("feature column {j} has zero norm; cosine scored 0");
            }
        }
    }
    wd /= p as f64;
    let cos_sim = cos_total / p as f64;

    let sim_true = row_cosine_matrix(x_true);
    let sim_pred = row_cosine_matrix(x_hat);
    let true_sets = knn_sets(&sim_true, k);
    let pred_sets = knn_sets(&sim_pred, k);

    let per_row: Vec<(f64, f64, f64)> = par::map_indexed(n, |i| {
        let truth = &true_sets[i];
        let pred = &pred_sets[i];
        let hit = pred.iter().filter(|j| truth.contains(j)).count();
        let recall = hit as f64 / k as f64;
        // Scores against every candidate j != i: predicted-space cosine;
        // ground truth: membership in the true-space neighbor set.
        let candidates: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let scores: Vec<f64> = candidates.iter().map(|&j| sim_pred.get(i, j)).collect();
        let positives: Vec<bool> = candidates.iter().map(|j| truth.contains(j)).collect();
        let ap = average_precision(&scores, &positives);
        let auc = roc_auc(&scores, &positives);
        (recall, ap, auc)
    });
    let knn_recall = per_row.iter().map(|t| t.0).sum::<f64>() / n as f64;
    let knn_pr = per_row.iter().map(|t| t.1).sum::<f64>() / n as f64;
    let knn_roc = per_row.iter().map(|t| t.2).sum::<f64>() / n as f64;

    Ok(ImputationMetrics {
        mse,
        wd,
        cos_sim,
        knn_recall,
        knn_pr,
        knn_roc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// Rank direction for the standard metric names.
pub fn metric_direction(metric: &str) -> Direction {
    match metric {
        "trace" | "cos_sim" | "knn_recall" | "knn_pr" | "knn_roc" => Direction::HigherBetter,
        _ => Direction::LowerBetter,
    }
}

/// Per-(method, metric) value table for rank aggregation.
#[derive(Debug, Clone, Default)]
pub struct MetricTable {
    pub methods: Vec<String>,
    pub metrics: Vec<(String, Direction)>,
    pub values: BTreeMap<(String, String), f64>,
}

impl MetricTable {
    pub fn insert(&mut self, method: &str, metric: &str, direction: Direction, value: f64) {
        if !self.methods.iter().any(|m| m == method) {
            self.methods.push(method.to_string());
        }
        if !self.metrics.iter().any(|(m, _)| m == metric) {
            self.metrics.push((metric.to_string(), direction));
        }
        self.values
            .insert((method.to_string(), metric.to_string()), value);
    }

    pub fn get(&self, method: &str, metric: &str) -> Option<f64> {
        self.values
            .get(&(method.to_string(), metric.to_string()))
            .copied()
    }
}

/// Direction-aware mean rank per method (1 = best), ties sharing the
/// average of tied ranks; sorted ascending, method name breaking ties.
pub fn mean_rank(table: &MetricTable) -> Result<Vec<(String, f64)>> {
    let mut rank_sums: BTreeMap<&str, f64> = BTreeMap::new();
    for (metric, direction) in &table.metrics {
        let mut values = Vec::with_capacity(table.methods.len());
        for method in &table.methods {
            let v = table.get(method, metric).ok_or_else(|| {
                EvalError::IncompleteTable {
                    method: method.clone(),
                    metric: metric.clone(),
                }
            })?;
            values.push((method.as_str(), v));
        }
        values.sort_by(|a, b| match direction {
            Direction::HigherBetter => b.1.total_cmp(&a.1),
            Direction::LowerBetter => a.1.total_cmp(&b.1),
        });
        let mut i = 0;
        while i < values.len() {
            let mut j = i;
            while j + 1 < values.len() && values[j + 1].1 == values[i].1 {
                j += 1;
            }
            let shared = (i + j) as f64 / 2.0 + 1.0;
            for &(method, _) in &values[i..=j] {
                *rank_sums.entry(method).or_insert(0.0) += shared;
            }
            i = j + 1;
        }
    }
    let n_metrics = table.metrics.len() as f64;
    let mut out: Vec<(String, f64)> = table
        .methods
        .iter()
        .map(|m| (m.clone(), rank_sums[m.as_str()] / n_metrics))
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

/// Sample mean and standard error (0 for a single value).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngStream;

    #[test]
    fn trace_of_identity_and_uniform() {
        let n = 16;
        assert_eq!(trace_metric(&Matrix::identity(n)).unwrap(), 1.0);
        let uniform = Matrix::filled(n, n, 1.0 / (n * n) as f64);
        assert_eq!(trace_metric(&uniform).unwrap(), 1.0 / n as f64);
    }

    #[test]
    fn trace_hand_computed() {
        let plan = Matrix::from_rows(&[
            vec![0.5, 0.5, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let t = trace_metric(&plan).unwrap();
        assert!((t - (0.5 + 1.0 + 1.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn trace_rejects_non_square() {
        assert!(matches!(
            trace_metric(&Matrix::zeros(2, 3)),
            Err(EvalError::NonSquarePlan { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn foscttm_identity_plan_is_zero() {
        let mut rng = RngStream::new(3);
        let x1 = Matrix::from_fn(12, 4, |_, _| rng.normal());
        let x2 = Matrix::from_fn(12, 3, |_, _| rng.normal());
        let plan = Matrix::identity(12);
        assert_eq!(barycentric_foscttm(&plan, &x1, &x2).unwrap(), 0.0);
    }

    #[test]
    fn foscttm_uniform_plan_is_near_half() {
        let mut rng = RngStream::new(5);
        let n = 200;
        let x1 = Matrix::from_fn(n, 6, |_, _| rng.normal());
        let x2 = Matrix::from_fn(n, 6, |_, _| rng.normal());
        let plan = Matrix::filled(n, n, 1.0 / (n * n) as f64);
        let v = barycentric_foscttm(&plan, &x1, &x2).unwrap();
        assert!((v - 0.5).abs() < 0.05, "uniform foscttm {v}");
    }

    #[test]
    fn foscttm_two_point_counterexample_is_one() {
        // Anti-diagonal plan projects each sample onto the other one, so
        // the wrong sample is strictly closer in both directions.
        let plan = Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let x1 = Matrix::from_rows(&[vec![0.0, 0.0], vec![5.0, 5.0]]).unwrap();
        let x2 = Matrix::from_rows(&[vec![-3.0], vec![3.0]]).unwrap();
        assert_eq!(barycentric_foscttm(&plan, &x1, &x2).unwrap(), 1.0);
    }

    #[test]
    fn foscttm_is_rigid_transform_invariant() {
        let mut rng = RngStream::new(7);
        let n = 30;
        let x1 = Matrix::from_fn(n, 2, |_, _| rng.normal());
        let x2 = Matrix::from_fn(n, 2, |_, _| rng.normal());
        let plan = Matrix::from_fn(n, n, |_, _| rng.uniform() + 0.01);
        let base = barycentric_foscttm(&plan, &x1, &x2).unwrap();
        // Rotate by theta and translate.
        let theta: f64 = 0.83;
        let rot = |m: &Matrix| {
            Matrix::from_fn(m.rows(), 2, |i, j| {
                let (a, b) = (m.get(i, 0), m.get(i, 1));
                match j {
                    0 => theta.cos() * a - theta.sin() * b + 4.0,
                    _ => theta.sin() * a + theta.cos() * b - 2.5,
                }
            })
        };
        let moved = barycentric_foscttm(&plan, &rot(&x1), &rot(&x2)).unwrap();
        assert!((base - moved).abs() < 1e-9, "{base} vs {moved}");
    }

    #[test]
    fn perfect_prediction_scores_perfectly() {
        let mut rng = RngStream::new(9);
        let x = Matrix::from_fn(40, 8, |_, _| rng.normal());
        let m = imputation_metrics(&x, &x.clone(), KNN_K).unwrap();
        assert_eq!(m.mse, 0.0);
        assert_eq!(m.wd, 0.0);
        assert!((m.cos_sim - 1.0).abs() < 1e-12);
        assert_eq!(m.knn_recall, 1.0);
        assert!((m.knn_roc - 1.0).abs() < 1e-12);
        assert!((m.knn_pr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn row_permutation_zeroes_wd_but_not_mse() {
        let mut rng = RngStream::new(11);
        let n = 20;
        let x = Matrix::from_fn(n, 3, |_, _| rng.normal());
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let permuted = x.select_rows(&perm);
        let m = imputation_metrics(&x, &permuted, KNN_K).unwrap();
        assert_eq!(m.wd, 0.0);
        assert!(m.mse > 0.0);
    }

    #[test]
    fn order_statistics_hand_example() {
        // true [0,1,2,3] vs pred [1,2,3,4]: mse 1, wd 1.
        let x = Matrix::column(&[0.0, 1.0, 2.0, 3.0]);
        let y = Matrix::column(&[1.0, 2.0, 3.0, 4.0]);
        let m = imputation_metrics(&x, &y, 2).unwrap();
        assert!((m.mse - 1.0).abs() < 1e-12);
        assert!((m.wd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unequal_size_wasserstein_matches_quantile_coupling() {
        // a = {0, 1}, b = {0.5}: W1 = 0.5*|0-0.5| + 0.5*|1-0.5| = 0.5.
        assert!((wasserstein_1d(&[0.0, 1.0], &[0.5]) - 0.5).abs() < 1e-12);
        // Same distribution, different sample sizes.
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.5, 3.5, 5.5];
        let w = wasserstein_1d(&a, &b);
        assert!(w < 0.51, "wd {w}");
    }

    #[test]
    fn knn_metrics_are_row_scale_invariant() {
        let mut rng = RngStream::new(13);
        let n = 25;
        let x = Matrix::from_fn(n, 5, |_, _| rng.normal());
        let mut y = Matrix::from_fn(n, 5, |_, _| rng.normal());
        let base = imputation_metrics(&x, &y, KNN_K).unwrap();
        for i in 0..n {
            let s = 1.0 + (i % 7) as f64;
            for v in y.row_mut(i) {
                *v *= s;
            }
        }
        let scaled = imputation_metrics(&x, &y, KNN_K).unwrap();
        assert_eq!(base.knn_recall, scaled.knn_recall);
        assert_eq!(base.knn_pr, scaled.knn_pr);
        assert_eq!(base.knn_roc, scaled.knn_roc);
    }

    #[test]
    fn knn_needs_enough_samples() {
        let x = Matrix::zeros(5, 2);
        assert!(matches!(
            imputation_metrics(&x, &x.clone(), 10),
            Err(EvalError::KnnInfeasible { n: 5, k: 10 })
        ));
    }

    #[test]
    fn mean_rank_single_method() {
        let mut table = MetricTable::default();
        table.insert("only", "trace", Direction::HigherBetter, 0.5);
        table.insert("only", "mse", Direction::LowerBetter, 1.0);
        let ranks = mean_rank(&table).unwrap();
        assert_eq!(ranks, vec![("only".to_string(), 1.0)]);
    }

    #[test]
    fn mean_rank_dominating_method() {
        let mut table = MetricTable::default();
        for (metric, dir, a, b) in [
            ("trace", Direction::HigherBetter, 0.9, 0.5),
            ("mse", Direction::LowerBetter, 0.1, 0.4),
            ("wd", Direction::LowerBetter, 0.2, 0.3),
        ] {
            table.insert("a", metric, dir, a);
            table.insert("b", metric, dir, b);
        }
        let ranks = mean_rank(&table).unwrap();
        assert_eq!(ranks[0], ("a".to_string(), 1.0));
        assert_eq!(ranks[1], ("b".to_string(), 2.0));
    }

    #[test]
    fn mean_rank_hand_example() {
        // Metrics m1, m2 (both higher-better):
        // A: 1st on m1, 3rd on m2 -> mean 2.0
        // B: 2nd on m1, 1st on m2 -> mean 1.5
        // C: 3rd on m1, 2nd on m2 -> mean 2.5
        let mut table = MetricTable::default();
        for (method, v1, v2) in [("A", 3.0, 1.0), ("B", 2.0, 9.0), ("C", 1.0, 5.0)] {
            table.insert(method, "m1", Direction::HigherBetter, v1);
            table.insert(method, "m2", Direction::HigherBetter, v2);
        }
        let ranks = mean_rank(&table).unwrap();
        assert_eq!(ranks[0], ("B".to_string(), 1.5));
        assert_eq!(ranks[1], ("A".to_string(), 2.0));
        assert_eq!(ranks[2], ("C".to_string(), 2.5));
    }

    #[test]
    fn mean_rank_is_monotone_transform_invariant() {
        let mut rng = RngStream::new(17);
        let methods = ["m1", "m2", "m3", "m4"];
        let mut base = MetricTable::default();
        let mut squashed = MetricTable::default();
        for metric in ["a", "b", "c"] {
            for m in methods {
                let v = rng.uniform();
                base.insert(m, metric, Direction::HigherBetter, v);
                // exp is strictly monotone.
                squashed.insert(m, metric, Direction::HigherBetter, v.exp());
            }
        }
        assert_eq!(mean_rank(&base).unwrap(), mean_rank(&squashed).unwrap());
    }

    #[test]
    fn missing_cell_is_an_error() {
        let mut table = MetricTable::default();
        table.insert("a", "trace", Direction::HigherBetter, 0.9);
        table.insert("b", "trace", Direction::HigherBetter, 0.5);
        table.insert("a", "mse", Direction::LowerBetter, 0.1);
        assert!(matches!(
            mean_rank(&table),
            Err(EvalError::IncompleteTable { .. })
        ));
    }

    #[test]
    fn ties_share_average_rank() {
        let mut table = MetricTable::default();
        table.insert("a", "trace", Direction::HigherBetter, 0.5);
        table.insert("b", "trace", Direction::HigherBetter, 0.5);
        table.insert("c", "trace", Direction::HigherBetter, 0.1);
        let ranks = mean_rank(&table).unwrap();
        assert_eq!(ranks[0], ("a".to_string(), 1.5));
        assert_eq!(ranks[1], ("b".to_string(), 1.5));
        assert_eq!(ranks[2], ("c".to_string(), 3.0));
    }

    #[test]
    fn standard_error_conventions() {
        let (mean, se) = mean_and_se(&[2.0]);
        assert_eq!((mean, se), (2.0, 0.0));
        let (mean, se) = mean_and_se(&[1.0, 3.0]);
        assert_eq!(mean, 2.0);
        assert!((se - 1.0).abs() < 1e-12);
    }
}
