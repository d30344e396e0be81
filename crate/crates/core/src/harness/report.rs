use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::aggregate::{CellResult, RunLog};
use super::context::write_json;
use crate::error::{Error, Result};

pub const RESULTS_FORMAT: &str = "v2xbench-results";
pub const RESULTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Plot,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "plot" => Ok(ReportFormat::Plot),
            _ => Err(Error::Config(format!("unknown report format `{s}` (expected csv, json or plot)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub format: String,
    pub version: u32,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub task: String,
    pub algorithm: String,
    pub seed: u64,
    pub eval_index: usize,
    pub normalized_return: f64,
}

pub fn plot_rows(runs: &[RunLog]) -> Vec<PlotRow> {
    runs.iter()
        .flat_map(|r| {
            r.normalized.iter().enumerate().map(move |(k, &v)| PlotRow {
                task: r.task.clone(),
                algorithm: r.algorithm.clone(),
                seed: r.seed,
                eval_index: k,
                normalized_return: v,
            })
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `results.json` and `plot_data.csv` into `dir` as
/// selected by `formats`, returning the written paths.
pub fn write_report(cells: &[CellResult], runs: &[RunLog], dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for f in formats {
        let path = match f {
            ReportFormat::Csv => {
                let p = dir.join("results.csv");
                write_csv(&p, cells)?;
                p
            }
            ReportFormat::Json => {
                let p = dir.join("results.json");
                let doc = ResultsDocument { format: RESULTS_FORMAT.into(), version: RESULTS_VERSION, cells: cells.to_vec() };
                write_json(&p, &doc)?;
                p
            }
            ReportFormat::Plot => {
                let p = dir.join("plot_data.csv");
                write_csv(&p, &plot_rows(runs))?;
                p
            }
        };
        written.push(path);
    }
    Ok(written)
}
