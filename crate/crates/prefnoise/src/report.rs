//! Summaries and plot-data files from a run CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::harness::{aggregate, AggregateRow};
use crate::records::{read_csv, ExperimentRecord};
use crate::{HarnessError, Result};

/// Per-round learning-curve point for one (kind, rate) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub round: usize,
    pub mean_return: f64,
    pub stderr: f64,
    pub seeds: usize,
}

/// Everything a `report` invocation produces.
#[derive(Debug)]
pub struct Report {
    pub summary: Vec<AggregateRow>,
    pub curves: Vec<(String, f64, Vec<CurvePoint>)>,
    pub curve_files: Vec<PathBuf>,
    /// Cells backed by a single seed, where the spread column is necessarily
    /// zero.
    pub single_seed_cells: Vec<(String, f64)>,
}

/// Reads a run CSV, prints the per-cell summary table, and writes one
/// curve file per cell into `out_dir` with columns `round,mean,stderr`.
pub fn report(csv_path: &Path, out_dir: &Path) -> Result<Report> {
    let records = read_csv(csv_path)?;
    if records.is_empty() {
        return Err(HarnessError::Csv {
            line: 2,
            message: "no data rows".into(),
        });
    }
    let summary = aggregate(&records);
    let curves = learning_curves(&records);

    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut curve_files = Vec::new();
    for (kind, rate, points) in &curves {
        let path = out_dir.join(format!("curve_{kind}_{rate:.2}.csv"));
        let mut file = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        writeln!(file, "round,mean_return,stderr").map_err(|e| HarnessError::io(&path, e))?;
        for p in points {
            writeln!(file, "{},{:.6},{:.6}", p.round, p.mean_return, p.stderr)
                .map_err(|e| HarnessError::io(&path, e))?;
        }
        curve_files.push(path);
    }

    let single_seed_cells: Vec<(String, f64)> = summary
        .iter()
        .filter(|row| row.seeds == 1)
        .map(|row| (row.noise_kind.clone(), row.target_rate))
        .collect();

    Ok(Report {
        summary,
        curves,
        curve_files,
        single_seed_cells,
    })
}

/// Per-round mean and standard error over seeds, per (kind, rate) cell.
pub fn learning_curves(
    records: &[ExperimentRecord],
) -> Vec<(String, f64, Vec<CurvePoint>)> {
    let mut keys: Vec<(String, String)> = records
        .iter()
        .map(|r| (r.noise_kind.clone(), format!("{:.6}", r.target_rate)))
        .collect();
    keys.sort();
    keys.dedup();

    let mut out = Vec::new();
    for (kind, rate_key) in keys {
        let cell: Vec<&ExperimentRecord> = records
            .iter()
            .filter(|r| r.noise_kind == kind && format!("{:.6}", r.target_rate) == rate_key)
            .collect();
        let mut rounds: Vec<usize> = cell.iter().map(|r| r.round).collect();
        rounds.sort_unstable();
        rounds.dedup();
        let mut points = Vec::with_capacity(rounds.len());
        for round in rounds {
            let vals: Vec<f64> = cell
                .iter()
                .filter(|r| r.round == round)
                .map(|r| r.mean_return)
                .collect();
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let std = if n < 2 {
                0.0
            } else {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
            };
            points.push(CurvePoint {
                round,
                mean_return: mean,
                stderr: std / (n as f64).sqrt(),
                seeds: n,
            });
        }
        out.push((kind, cell[0].target_rate, points));
    }
    out
}

/// Renders the summary as an aligned text table.
pub fn format_summary(summary: &[AggregateRow]) -> String {
    let mut out = String::from(
        "noise_kind            rate   seeds  realized  label_acc  final_return (mean +/- std)\n",
    );
    for row in summary {
        out.push_str(&format!(
            "{:<20} {:>6.2} {:>6}  {:>8.4} {:>10.4}  {:>10.2} +/- {:.2}\n",
            row.noise_kind,
            row.target_rate,
            row.seeds,
            row.realized_rate_mean,
            row.reward_label_accuracy_mean,
            row.final_return_mean,
            row.final_return_std,
        ));
    }
    out
}
