use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{LogRow, Manifest, RunStatus};
use crate::error::{Error, Result};

/// Normalized evaluation curve of one finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub task: String,
    pub algorithm: String,
    pub seed: u64,
    pub normalized: Vec<f64>,
}

/// Result of one (task, algorithm) cell: the best seed-averaged
/// evaluation and its 95% interval across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub task: String,
    pub algorithm: String,
    pub seeds: usize,
    pub best_eval_index: usize,
    pub max_mean: f64,
    pub std: f64,
    pub ci95: f64,
    pub final_mean: f64,
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    reader.deserialize().map(|r| r.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))).collect()
}

/// Finds `<task>/<algo>/<seed>/log.csv` under `root`, skipping runs whose
/// manifest marks them failed.
pub fn collect_runs(root: &Path) -> Result<Vec<RunLog>> {
    let mut runs = Vec::new();
    for task in subdirs(root)? {
        for algo in subdirs(&task)? {
            for seed_dir in subdirs(&algo)? {
                let Some(seed) = name_of(&seed_dir).parse::<u64>().ok() else { continue };
                let log = seed_dir.join("log.csv");
                if !log.exists() {
                    continue;
                }
                let manifest = seed_dir.join("manifest.json");
                if manifest.exists() && Manifest::load(&manifest)?.status != RunStatus::Completed {
                    continue;
                }
                runs.push(RunLog {
                    task: name_of(&task),
                    algorithm: name_of(&algo),
                    seed,
                    normalized: read_log(&log)?.iter().map(|r| r.normalized_return).collect(),
                });
            }
        }
    }
    Ok(runs)
}

fn name_of(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

/// Per cell: mean over seeds at every evaluation index, the maximum over
/// indices, and `1.96 * std / sqrt(n)` with the sample standard deviation
/// across seeds at that index.
pub fn aggregate(runs: &[RunLog]) -> Result<Vec<CellResult>> {
    let mut cells: BTreeMap<(&str, &str), Vec<&RunLog>> = BTreeMap::new();
    for r in runs {
        cells.entry((&r.task, &r.algorithm)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((task, algorithm), runs)| {
            let len = runs[0].normalized.len();
            if len == 0 || runs.iter().any(|r| r.normalized.len() != len) {
                return Err(Error::Aggregate(format!("{task}/{algorithm}: runs have unequal or empty evaluation logs")));
            }
            let n = runs.len() as f64;
            let mean_at = |k: usize| runs.iter().map(|r| r.normalized[k]).sum::<f64>() / n;
            let best = (0..len).fold(0, |b, k| if mean_at(k) > mean_at(b) { k } else { b });
            let max_mean = mean_at(best);
            let std = if runs.len() > 1 {
                (runs.iter().map(|r| (r.normalized[best] - max_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            Ok(CellResult {
                task: task.to_string(),
                algorithm: algorithm.to_string(),
                seeds: runs.len(),
                best_eval_index: best,
                max_mean,
                std,
                ci95: 1.96 * std / n.sqrt(),
                final_mean: mean_at(len - 1),
            })
        })
        .collect()
}
