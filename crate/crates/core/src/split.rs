//! Split generation: balanced holdout, balanced k-fold, and
//! leave-one-perturbation-out.
//!
//! Splits are computed over one index set (the X-side rows of a dataset);
//! the benchmark maps them onto the second modality through the true-pair
//! map. Balanced modes stratify by label so per-label proportions hold
//! within one sample per fold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::rng::RngStream;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("label {label} has only {count} samples, not enough for {need}")]
    InfeasibleStratification {
        label: usize,
        count: usize,
        need: String,
    },
    #[error("leave-one-perturbation-out needs at least 2 labels, got {0}")]
    TooFewLabels(usize),
    #[error("empty label list")]
    Empty,
}

pub type Result<T> = std::result::Result<T, SplitError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "k")]
pub enum SplitMode {
    Holdout8020,
    KFold(usize),
    Lopo,
}

impl SplitMode {
    pub fn name(&self) -> String {
        match self {
            SplitMode::Holdout8020 => "holdout_80_20".into(),
            SplitMode::KFold(k) => format!("kfold{k}"),
            SplitMode::Lopo => "lopo".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Label withheld by this fold (leave-one-perturbation-out only).
    pub held_out_label: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

fn indices_by_label(labels: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    distinct
        .into_iter()
        .map(|l| {
            (
                l,
                labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v == l)
                    .map(|(i, _)| i)
                    .collect(),
            )
        })
        .collect()
}

/// Deterministic per-seed split plan over `labels`.
pub fn make_splits(labels: &[usize], mode: SplitMode, seed: u64) -> Result<SplitPlan> {
    if labels.is_empty() {
        return Err(SplitError::Empty);
    }
    let mut rng = RngStream::new(seed);
    let by_label = indices_by_label(labels);
    let folds = match mode {
        SplitMode::Holdout8020 => {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for (label, mut idx) in by_label {
                if idx.len() < 5 {
                    return Err(SplitError::InfeasibleStratification {
                        label,
                        count: idx.len(),
                        need: "an 80-20 split (at least 5 samples)".into(),
                    });
                }
                rng.shuffle(&mut idx);
                // Test share rounded to the nearest integer, at least 1.
                let n_test = ((idx.len() as f64 * 0.2).round() as usize).max(1);
                test.extend_from_slice(&idx[..n_test]);
                train.extend_from_slice(&idx[n_test..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            vec![Fold {
                train,
                test,
                held_out_label: None,
            }]
        }
        SplitMode::KFold(k) => {
            if k < 2 {
                return Err(SplitError::TooFewLabels(k));
            }
            let mut fold_tests: Vec<Vec<usize>> = vec![Vec::new(); k];
            for (li, (label, mut idx)) in by_label.into_iter().enumerate() {
                if idx.len() < k {
                    return Err(SplitError::InfeasibleStratification {
                        label,
                        count: idx.len(),
                        need: format!("{k}-fold splitting"),
                    });
                }
                rng.shuffle(&mut idx);
                // Rotate the starting fold per label so remainders spread
                // evenly and fold sizes stay balanced overall.
                for (pos, &i) in idx.iter().enumerate() {
                    fold_tests[(pos + li) % k].push(i);
                }
            }
            let all: Vec<usize> = (0..labels.len()).collect();
            fold_tests
                .into_iter()
                .map(|mut test| {
                    test.sort_unstable();
                    let train: Vec<usize> = all
                        .iter()
                        .copied()
                        .filter(|i| test.binary_search(i).is_err())
                        .collect();
                    Fold {
                        train,
                        test,
                        held_out_label: None,
                    }
                })
                .collect()
        }
        SplitMode::Lopo => {
            if by_label.len() < 2 {
                return Err(SplitError::TooFewLabels(by_label.len()));
            }
            by_label
                .iter()
                .map(|(label, idx)| {
                    let test = idx.clone();
                    let train: Vec<usize> = (0..labels.len())
                        .filter(|i| labels[*i] != *label)
                        .collect();
                    Fold {
                        train,
                        test,
                        held_out_label: Some(*label),
                    }
                })
                .collect()
        }
    };
    Ok(SplitPlan { mode, seed, folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n_labels: usize, per_label: usize) -> Vec<usize> {
        // Interleaved so sorted index order does not equal label blocks.
        (0..n_labels * per_label).map(|i| i % n_labels).collect()
    }

    fn assert_partition(plan: &SplitPlan, n: usize) {
        let mut seen = vec![false; n];
        for fold in &plan.folds {
            for &i in &fold.test {
                assert!(!seen[i], "index {i} in two test folds");
                seen[i] = true;
            }
            let mut all: Vec<usize> = fold.train.iter().chain(fold.test.iter()).copied().collect();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), n, "train/test overlap or gap");
        }
        assert!(seen.iter().all(|&s| s), "union of test folds misses indices");
    }

    #[test]
    fn holdout_keeps_per_label_proportions() {
        let labels = labels(10, 100);
        let plan = make_splits(&labels, SplitMode::Holdout8020, 3).unwrap();
        assert_eq!(plan.folds.len(), 1);
        let fold = &plan.folds[0];
        assert_eq!(fold.test.len(), 200);
        assert_eq!(fold.train.len(), 800);
        for l in 0..10 {
            let test_count = fold.test.iter().filter(|&&i| labels[i] == l).count();
            assert_eq!(test_count, 20, "label {l}");
        }
    }

    #[test]
    fn kfold_partitions_and_balances() {
        // 20 labels x 128 cells, 5 folds: 512 test samples per fold with
        // 25-26 per label.
        let labels = labels(20, 128);
        let plan = make_splits(&labels, SplitMode::KFold(5), 1).unwrap();
        assert_eq!(plan.folds.len(), 5);
        assert_partition(&plan, labels.len());
        for fold in &plan.folds {
            assert_eq!(fold.test.len(), 2560 / 5);
            for l in 0..20 {
                let count = fold.test.iter().filter(|&&i| labels[i] == l).count();
                assert!((25..=26).contains(&count), "label {l}: {count}");
            }
        }
    }

    #[test]
    fn lopo_withholds_whole_conditions() {
        let labels = labels(10, 30);
        let plan = make_splits(&labels, SplitMode::Lopo, 2).unwrap();
        assert_eq!(plan.folds.len(), 10);
        assert_partition(&plan, labels.len());
        for fold in &plan.folds {
            let held = fold.held_out_label.unwrap();
            assert_eq!(fold.test.len(), 30);
            assert!(fold.test.iter().all(|&i| labels[i] == held));
            assert!(fold.train.iter().all(|&i| labels[i] != held));
        }
    }

    #[test]
    fn splits_are_seed_deterministic() {
        let labels = labels(4, 25);
        let a = make_splits(&labels, SplitMode::KFold(5), 9).unwrap();
        let b = make_splits(&labels, SplitMode::KFold(5), 9).unwrap();
        for (fa, fb) in a.folds.iter().zip(&b.folds) {
            assert_eq!(fa.test, fb.test);
            assert_eq!(fa.train, fb.train);
        }
        let c = make_splits(&labels, SplitMode::KFold(5), 10).unwrap();
        assert!(a.folds.iter().zip(&c.folds).any(|(x, y)| x.test != y.test));
    }

    #[test]
    fn infeasible_stratification_names_the_label() {
        let mut labels = vec![0usize; 20];
        labels.extend([7usize; 3]); // label 7 has 3 < 5 samples
        match make_splits(&labels, SplitMode::KFold(5), 0) {
            Err(SplitError::InfeasibleStratification { label: 7, count: 3, .. }) => {}
            other => panic!("expected infeasible stratification, got {other:?}"),
        }
    }

    #[test]
    fn lopo_needs_two_labels() {
        let labels = vec![0usize; 10];
        assert!(matches!(
            make_splits(&labels, SplitMode::Lopo, 0),
            Err(SplitError::TooFewLabels(1))
        ));
    }
}
