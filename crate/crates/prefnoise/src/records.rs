//! Experiment CSV rows: the single output format of the harness.
//!
//! The header and the 6-decimal float formatting are fixed so that reruns of
//! the same config and seed reproduce their files byte for byte.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::{HarnessError, Result};

/// Fixed column order of run CSVs.
pub const CSV_HEADER: &str = "seed,round,noise_kind,target_rate,realized_rate,denoiser_precision,denoiser_recall,reward_label_accuracy,mean_return,std_return";

/// One (seed, round) of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub round: usize,
    pub noise_kind: String,
    pub target_rate: f64,
    pub realized_rate: f64,
    pub denoiser_precision: f64,
    pub denoiser_recall: f64,
    pub reward_label_accuracy: f64,
    pub mean_return: f64,
    pub std_return: f64,
}

impl ExperimentRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.seed,
            self.round,
            self.noise_kind,
            self.target_rate,
            self.realized_rate,
            self.denoiser_precision,
            self.denoiser_recall,
            self.reward_label_accuracy,
            self.mean_return,
            self.std_return,
        )
    }

    /// Parses one data row; `line` is the 1-based file line for messages.
    pub fn from_csv_row(row: &str, line: usize) -> Result<Self> {
        let columns: Vec<&str> = CSV_HEADER.split(',').collect();
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != columns.len() {
            return Err(HarnessError::Csv {
                line,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let field = |name: &str| -> &str {
            fields[columns.iter().position(|c| *c == name).unwrap()]
        };
        let parse_f64 = |name: &str| -> Result<f64> {
            field(name).parse().map_err(|_| HarnessError::Csv {
                line,
                message: format!("column {name}: cannot parse '{}' as a number", field(name)),
            })
        };
        Ok(ExperimentRecord {
            seed: field("seed").parse().map_err(|_| HarnessError::Csv {
                line,
                message: format!("column seed: cannot parse '{}'", field("seed")),
            })?,
            round: field("round").parse().map_err(|_| HarnessError::Csv {
                line,
                message: format!("column round: cannot parse '{}'", field("round")),
            })?,
            noise_kind: field("noise_kind").to_string(),
            target_rate: parse_f64("target_rate")?,
            realized_rate: parse_f64("realized_rate")?,
            denoiser_precision: parse_f64("denoiser_precision")?,
            denoiser_recall: parse_f64("denoiser_recall")?,
            reward_label_accuracy: parse_f64("reward_label_accuracy")?,
            mean_return: parse_f64("mean_return")?,
            std_return: parse_f64("std_return")?,
        })
    }
}

/// Incremental CSV writer: header on creation, one flushed line per record,
/// so partial results survive an interrupted run.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            }
        }
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{CSV_HEADER}").map_err(|e| HarnessError::io(path, e))?;
        out.flush().map_err(|e| HarnessError::io(path, e))?;
        Ok(CsvWriter {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn append(&mut self, record: &ExperimentRecord) -> Result<()> {
        writeln!(self.out, "{}", record.to_csv_row())
            .and_then(|_| self.out.flush())
            .map_err(|e| HarnessError::io(&self.path, e))
    }
}

/// Writes a complete record list in one go.
pub fn write_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let mut writer = CsvWriter::create(path)?;
    for r in records {
        writer.append(r)?;
    }
    Ok(())
}

/// Reads a run CSV, validating the header and every row.
pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        Some((_, Err(e))) => return Err(HarnessError::io(path, e)),
        None => {
            return Err(HarnessError::Csv {
                line: 1,
                message: "file is empty, expected a header".into(),
            })
        }
    };
    if header.trim_end() != CSV_HEADER {
        let expected: Vec<&str> = CSV_HEADER.split(',').collect();
        let got: Vec<&str> = header.trim_end().split(',').collect();
        let missing: Vec<&str> = expected
            .iter()
            .filter(|c| !got.contains(c))
            .copied()
            .collect();
        let message = if missing.is_empty() {
            format!("unexpected header '{header}'")
        } else {
            format!("missing column(s): {}", missing.join(", "))
        };
        return Err(HarnessError::Csv { line: 1, message });
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(ExperimentRecord::from_csv_row(&line, idx + 1)?);
    }
    Ok(records)
}
