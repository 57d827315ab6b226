//! Aggregated experiment results and their JSON/CSV forms.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::losses::LossSpec;
use crate::metrics::MetricReport;

/// Metric names in report order.
pub const METRICS: [&str; 4] = ["mse", "mae", "gm", "pearson"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when n = 1.
    pub std: f64,
    pub n: usize,
}

impl MetricSummary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        Some(MetricSummary { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mse: MetricSummary,
    pub mae: MetricSummary,
    pub gm: MetricSummary,
    /// Absent when no run had a defined correlation.
    pub pearson: Option<MetricSummary>,
}

impl CellSummary {
    pub fn of(runs: &[RunRecord]) -> Option<Self> {
        let pick = |f: fn(&MetricReport) -> f64| -> Vec<f64> { runs.iter().map(|r| f(&r.metrics)).collect() };
        let pearson: Vec<f64> = runs.iter().filter_map(|r| r.metrics.pearson).collect();
        Some(CellSummary {
            mse: MetricSummary::of(&pick(|m| m.mse))?,
            mae: MetricSummary::of(&pick(|m| m.mae))?,
            gm: MetricSummary::of(&pick(|m| m.gm))?,
            pearson: MetricSummary::of(&pearson),
        })
    }

    pub fn get(&self, metric: &str) -> Option<MetricSummary> {
        match metric {
            "mse" => Some(self.mse),
            "mae" => Some(self.mae),
            "gm" => Some(self.gm),
            "pearson" => self.pearson,
            _ => None,
        }
    }
}

/// One repeat of one (method, q) cell after learning-rate selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Selection score of the chosen candidate.
    pub val_score: f64,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultCell {
    pub method: String,
    pub loss: LossSpec,
    pub q: f64,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub summary: Option<CellSummary>,
    pub runs: Vec<RunRecord>,
}

impl ResultCell {
    /// Builds a cell from the repeats that succeeded and the first failure,
    /// if any.
    pub fn new(loss: LossSpec, q: f64, runs: Vec<RunRecord>, failure: Option<String>) -> Self {
        ResultCell {
            method: loss.label(),
            loss,
            q,
            status: if failure.is_none() { CellStatus::Ok } else { CellStatus::Failed },
            reason: failure,
            summary: CellSummary::of(&runs),
            runs,
        }
    }

    pub fn mse_per_repeat(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.metrics.mse).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub repeats: usize,
    pub cells: Vec<ResultCell>,
}

impl ResultTable {
    pub fn cell(&self, method: &str, q: f64) -> Option<&ResultCell> {
        self.cells.iter().find(|c| c.method == method && c.q == q)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read_report(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Rows `method,q,metric,mean,std`; a metric without a summary leaves
    /// mean and std empty.
    pub fn write_csv_to(&self, sink: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["method", "q", "metric", "mean", "std"])?;
        for cell in &self.cells {
            for metric in METRICS {
                let s = cell.summary.as_ref().and_then(|s| s.get(metric));
                let (mean, std) = match s {
                    Some(s) => (s.mean.to_string(), s.std.to_string()),
                    None => (String::new(), String::new()),
                };
                w.write_record([cell.method.as_str(), &cell.q.to_string(), metric, &mean, &std])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes the full table as pretty JSON.
pub fn write_report(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    let mut text = table.to_json()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_report_csv(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    table.write_csv_to(fs::File::create(path)?)
}

/// Mean test MSE of the sweep method at one (q, fraction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q: f64,
    pub fraction: f64,
    pub train_size: usize,
    pub mean_mse: f64,
    pub std_mse: f64,
    pub per_repeat: Vec<f64>,
}

/// Rows `q,fraction,mean_mse,std_mse`.
pub fn write_plot_data_to(sweep: &[SweepPoint], sink: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["q", "fraction", "mean_mse", "std_mse"])?;
    for p in sweep {
        w.write_record([
            p.q.to_string(),
            p.fraction.to_string(),
            p.mean_mse.to_string(),
            p.std_mse.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_plot_data(sweep: &[SweepPoint], path: impl AsRef<Path>) -> Result<()> {
    write_plot_data_to(sweep, fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let s = MetricSummary::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(MetricSummary::of(&[7.0]).unwrap().std, 0.0);
        assert!(MetricSummary::of(&[]).is_none());
    }

    fn run(repeat: usize, mse: f64, pearson: Option<f64>) -> RunRecord {
        RunRecord {
            repeat,
            seed: repeat as u64,
            learning_rate: 0.01,
            val_score: 0.0,
            metrics: MetricReport {
                mse,
                mae: mse.sqrt(),
                gm: mse.sqrt() / 2.0,
                pearson,
            },
        }
    }

    fn table() -> ResultTable {
        ResultTable {
            name: "t".into(),
            repeats: 2,
            cells: vec![
                ResultCell::new(
                    LossSpec::SurrogateLm,
                    4.0,
                    vec![run(0, 1.0, Some(0.9)), run(1, 4.0, None)],
                    None,
                ),
                ResultCell::new(LossSpec::SurrogateLm, 0.5, vec![], Some("divergence".into())),
            ],
        }
    }

    #[test]
    fn json_round_trip() {
        let t = table();
        assert_eq!(ResultTable::from_json(&t.to_json().unwrap()).unwrap(), t);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_report(&t, &path).unwrap();
        assert_eq!(ResultTable::read_report(&path).unwrap(), t);
    }

    #[test]
    fn csv_has_one_row_per_metric() {
        let t = table();
        let mut buf = Vec::new();
        t.write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + t.cells.len() * METRICS.len());
        assert_eq!(lines[1], "surrogate_lm,4,mse,2.5,2.1213203435596424");
        assert_eq!(lines[4], "surrogate_lm,4,pearson,0.9,0");
        assert_eq!(lines[5], "surrogate_lm,0.5,mse,,");
    }

    #[test]
    fn plot_rows() {
        let pts: Vec<SweepPoint> = [0.25, 0.5, 1.0]
            .iter()
            .map(|&f| SweepPoint {
                q: 4.0,
                fraction: f,
                train_size: 10,
                mean_mse: 1.0 / f,
                std_mse: 0.0,
                per_repeat: vec![1.0 / f],
            })
            .collect();
        let mut buf = Vec::new();
        write_plot_data_to(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(1).unwrap(), "4,0.25,4,0");
    }
}
