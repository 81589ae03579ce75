//! Report emission: a long-form CSV (method, metric, fold, value) and a
//! fixed-width summary table with mean +/- standard error at three
//! decimals, mean ranks, and top-2 markers per metric column.

use std::fs;
use std::path::{Path, PathBuf};

use crate::eval::{mean_and_se, mean_rank, metric_direction, Direction, MetricTable};

use super::runner::{CellFailure, CellRecord};
use super::{BenchError, Result};

/// Display order of the metric columns.
pub const METRIC_ORDER: [&str; 8] = [
    "trace",
    "foscttm",
    "mse",
    "wd",
    "cos_sim",
    "knn_recall",
    "knn_pr",
    "knn_roc",
];

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Long-form CSV: one row per (method, metric, fold).
fn render_csv(cells: &[CellRecord]) -> String {
    let mut out = String::from("method,metric,fold,value\n");
    for cell in cells {
        for (metric, value) in cell.metric_values() {
            out.push_str(&format!("{},{},{},{}\n", cell.method(), metric, cell.fold_id(), value));
        }
    }
    out
}

struct MethodStats {
    method: String,
    cell_count: usize,
    /// metric -> (mean, se)
    stats: Vec<(String, f64, f64)>,
}

/// Aggregate per-method means and standard errors across folds and
/// replicate seeds.
fn aggregate(cells: &[CellRecord]) -> Vec<MethodStats> {
    let mut methods: Vec<String> = cells.iter().map(CellRecord::method).collect();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|method| {
            let rows: Vec<&CellRecord> = cells.iter().filter(|c| c.method() == method).collect();
            let stats = METRIC_ORDER
                .iter()
                .map(|&metric| {
                    let values: Vec<f64> = rows
                        .iter()
                        .map(|c| {
                            c.metric_values()
                                .iter()
                                .find(|(m, _)| *m == metric)
                                .map(|(_, v)| *v)
                                .unwrap()
                        })
                        .collect();
                    let (mean, se) = mean_and_se(&values);
                    (metric.to_string(), mean, se)
                })
                .collect();
            MethodStats {
                method,
                cell_count: rows.len(),
                stats,
            }
        })
        .collect()
}

/// Fixed-width summary. Best value per metric column is marked `*`,
/// second best `~` (direction-aware). Values print as mean+/-SE with
/// three decimals; an SE below 0.0005 renders as 0.000.
fn render_summary(cells: &[CellRecord], failures: &[CellFailure]) -> Result<String> {
    if cells.is_empty() {
        return Err(BenchError::EmptyResults);
    }
    let stats = aggregate(cells);
    // Mean ranks over the aggregated means.
    let mut table = MetricTable::default();
    for s in &stats {
        for (metric, mean, _) in &s.stats {
            table.insert(&s.method, metric, metric_direction(metric), *mean);
        }
    }
    let ranks = mean_rank(&table)?;
    let rank_of = |method: &str| ranks.iter().find(|(m, _)| m == method).map(|(_, r)| *r);

    // Top-2 markers per metric.
    let mut markers: Vec<Vec<&'static str>> = vec![vec![""; METRIC_ORDER.len()]; stats.len()];
    for (mi, &metric) in METRIC_ORDER.iter().enumerate() {
        let mut vals: Vec<(usize, f64)> = stats
            .iter()
            .enumerate()
            .map(|(si, s)| (si, s.stats[mi].1))
            .collect();
        vals.sort_by(|a, b| match metric_direction(metric) {
            Direction::HigherBetter => b.1.total_cmp(&a.1),
            Direction::LowerBetter => a.1.total_cmp(&b.1),
        });
        if let Some(&(si, _)) = vals.first() {
            markers[si][mi] = "*";
        }
        if let Some(&(si, _)) = vals.get(1) {
            markers[si][mi] = "~";
        }
    }

    // Sort rows by mean rank (methods first appear in rank order).
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = rank_of(&stats[a].method).unwrap_or(f64::INFINITY);
        let rb = rank_of(&stats[b].method).unwrap_or(f64::INFINITY);
        ra.total_cmp(&rb).then(stats[a].method.cmp(&stats[b].method))
    });

    let method_width = stats
        .iter()
        .map(|s| s.method.len())
        .max()
        .unwrap_or(6)
        .max("method".len());
    let col_width = 15;
    let mut out = String::new();
    out.push_str(&format!("{:<method_width$}  {:>9}  {:>5}", "method", "mean_rank", "cells"));
    for metric in METRIC_ORDER {
        out.push_str(&format!("  {metric:>col_width$}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(method_width + 18 + (col_width + 2) * METRIC_ORDER.len()));
    out.push('\n');
    for &si in &order {
        let s = &stats[si];
        let rank = rank_of(&s.method)
            .map(|r| format!("{r:.2}"))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<method_width$}  {:>9}  {:>5}",
            s.method, rank, s.cell_count
        ));
        for (mi, (_, mean, se)) in s.stats.iter().enumerate() {
            let txt = format!("{}{mean:.3}\u{00b1}{se:.3}", markers[si][mi]);
            out.push_str(&format!("  {txt:>col_width$}"));
        }
        out.push('\n');
    }
    out.push_str("\nmarkers: * best per column, ~ second best\n");
    if !failures.is_empty() {
        out.push_str("\nfailed cells (absent from the table):\n");
        for f in failures {
            out.push_str(&format!("  {}: {}\n", f.key, f.error));
        }
    }
    Ok(out)
}

/// Write `report.csv` and `summary.txt` under `out_dir`.
pub fn write_reports(
    out_dir: &Path,
    cells: &[CellRecord],
    failures: &[CellFailure],
) -> Result<ReportFiles> {
    if cells.is_empty() {
        return Err(BenchError::EmptyResults);
    }
    let csv_path = out_dir.join("report.csv");
    write_file(&csv_path, &render_csv(cells))?;
    let summary_path = out_dir.join("summary.txt");
    write_file(&summary_path, &render_summary(cells, failures)?)?;
    Ok(ReportFiles {
        csv: csv_path,
        summary: summary_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(learner: &str, aligner: &str, seed: u64, trace: f64, mse: f64) -> CellRecord {
        CellRecord {
            learner: learner.into(),
            aligner: aligner.into(),
            seed,
            fold: 0,
            held_out_label: None,
            plan_converged: true,
            trace,
            foscttm: 0.5 - trace / 2.0,
            mse,
            wd: mse / 2.0,
            cos_sim: 1.0 - mse,
            knn_recall: trace,
            knn_pr: trace / 2.0,
            knn_roc: 0.5 + trace / 4.0,
        }
    }

    #[test]
    fn csv_has_one_row_per_metric_per_cell() {
        let cells = vec![cell("groove_cosine", "eot", 0, 0.8, 0.1)];
        let csv = render_csv(&cells);
        let lines: Vec<&str> = csv.trim().lines().collect();
        assert_eq!(lines[0], "method,metric,fold,value");
        assert_eq!(lines.len(), 1 + 8);
        assert!(lines[1].starts_with("groove_cosine+eot,trace,s0_f0,"));
    }

    #[test]
    fn summary_marks_top_two_and_rounds_se() {
        let cells = vec![
            cell("a", "eot", 0, 0.9, 0.1),
            cell("a", "eot", 1, 0.9004, 0.1),
            cell("b", "eot", 0, 0.5, 0.3),
            cell("b", "eot", 1, 0.5, 0.3),
            cell("c", "eot", 0, 0.7, 0.2),
            cell("c", "eot", 1, 0.7, 0.2),
        ];
        let summary = render_summary(&cells, &[]).unwrap();
        // a dominates: first row, starred trace; SE 0.0002 renders 0.000.
        let first_data_line = summary.lines().nth(2).unwrap();
        assert!(first_data_line.starts_with("a+eot"), "{first_data_line}");
        assert!(first_data_line.contains("*0.900\u{00b1}0.000"), "{first_data_line}");
        // c is second-best on trace.
        let c_line = summary.lines().find(|l| l.starts_with("c+eot")).unwrap();
        assert!(c_line.contains("~0.700"), "{c_line}");
    }

    #[test]
    fn empty_results_error() {
        assert!(matches!(
            render_summary(&[], &[]),
            Err(BenchError::EmptyResults)
        ));
    }

    #[test]
    fn single_method_summary() {
        let cells = vec![cell("solo", "eot", 0, 0.6, 0.2)];
        let summary = render_summary(&cells, &[]).unwrap();
        let lines: Vec<&str> = summary.lines().collect();
        assert!(lines[2].starts_with("solo+eot"));
        assert!(lines[2].contains("1.00")); // mean rank of the only method
    }
}
