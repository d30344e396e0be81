use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::context::{prepare_task, write_json, TaskContext, TopologyRef, TrainingSet};
use crate::error::{Error, Result};
use crate::game::{EnvConfig, GameParams, Policy, Task};
use crate::marl::{train_with, Algorithm, EvalRecord, Hyperparameters, InputLayout, TrainSetup};
use crate::net::save_checkpoint;
use crate::oracle::{play_episodes, NormalizationBounds};
use crate::topology::TopologySnapshot;

pub const MANIFEST_FORMAT: &str = "v2xbench-run";
pub const MANIFEST_VERSION: u32 = 1;

/// One row of `log.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub episode: usize,
    pub eval_index: usize,
    pub env_steps: usize,
    pub mean_return: f64,
    pub normalized_return: f64,
    pub train_loss: Option<f64>,
    pub epsilon: Option<f64>,
    /// Per-episode evaluation returns joined by `;`.
    pub returns: String,
}

impl From<&EvalRecord> for LogRow {
    fn from(r: &EvalRecord) -> Self {
        LogRow {
            episode: r.episode,
            eval_index: r.eval_index,
            env_steps: r.env_steps,
            mean_return: r.mean_return,
            normalized_return: r.normalized_return,
            train_loss: r.train_loss,
            epsilon: r.epsilon,
            returns: r.returns.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"),
        }
    }
}

impl LogRow {
    pub fn episode_returns(&self) -> Result<Vec<f64>> {
        self.returns.split(';').map(|s| s.parse::<f64>().map_err(|e| Error::Csv(format!("return `{s}`: {e}")))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Resolved experiment configuration restricted to this run.
    pub config: ExperimentConfig,
    pub hyperparameters: Hyperparameters,
    pub game: GameParams,
    pub training: TrainingSet,
    pub eval_topologies: Vec<TopologyRef>,
    pub bounds: NormalizationBounds,
    pub status: RunStatus,
    pub error: Option<String>,
    pub error_kind: Option<String>,
    pub env_steps: usize,
    pub evaluations: usize,
    pub elapsed_s: f64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task: Task,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub dir: PathBuf,
    pub status: RunStatus,
    pub error: Option<String>,
    pub best_normalized: Option<f64>,
}

pub fn run_dir(out: &Path, task: Task, algorithm: Algorithm, seed: u64) -> PathBuf {
    out.join(task.name()).join(algorithm.name()).join(seed.to_string())
}

/// Checkpoint metadata needed to rebuild a greedy policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub task: Task,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub layout: InputLayout,
    pub episodes: usize,
}

pub const CHECKPOINT_FILE: &str = "final.ckpt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub returns: Vec<f64>,
    pub mean_return: f64,
    pub normalized_return: f64,
}

/// One noise-free episode per topology, normalized with `bounds`.
pub fn evaluate_policy(
    policy: &mut dyn Policy,
    env: &EnvConfig,
    topologies: &[TopologySnapshot],
    bounds: &NormalizationBounds,
    seed: u64,
) -> Result<PolicyEvaluation> {
    let returns = play_episodes(env, topologies, policy, seed)?;
    let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
    Ok(PolicyEvaluation { normalized_return: bounds.normalize(mean_return)?, mean_return, returns })
}

fn run_config(cfg: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.experiment.algorithms = vec![algorithm];
    c.experiment.seeds = vec![seed];
    c
}

/// Trains one (algorithm, seed) pair into its run directory. The manifest
/// is written whether or not training succeeds.
pub fn run_one(cfg: &ExperimentConfig, ctx: &TaskContext, algorithm: Algorithm, seed: u64) -> Result<RunSummary> {
    let task = cfg.experiment.task;
    let dir = run_dir(&cfg.experiment.out, task, algorithm, seed);
    fs::create_dir_all(dir.join("checkpoints")).map_err(|e| Error::io(&dir, e))?;
    let hyper = cfg.hyperparameters(algorithm)?;
    let start = Instant::now();
    let mut manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        task,
        algorithm,
        seed,
        config: run_config(cfg, algorithm, seed),
        hyperparameters: hyper.clone(),
        game: ctx.env.game.clone(),
        training: ctx.training.clone(),
        eval_topologies: ctx.eval_topologies.iter().map(TopologyRef::from).collect(),
        bounds: ctx.bounds,
        status: RunStatus::Failed,
        error: None,
        error_kind: None,
        env_steps: 0,
        evaluations: 0,
        elapsed_s: 0.0,
    };
    let result = train_run(cfg, ctx, algorithm, seed, hyper, &dir);
    manifest.elapsed_s = start.elapsed().as_secs_f64();
    let summary =
        RunSummary { task, algorithm, seed, dir: dir.clone(), status: RunStatus::Failed, error: None, best_normalized: None };
    let summary = match result {
        Ok((records, env_steps)) => {
            manifest.status = RunStatus::Completed;
            manifest.env_steps = env_steps;
            manifest.evaluations = records.len();
            let best = records.iter().map(|r| r.normalized_return).fold(f64::NEG_INFINITY, f64::max);
            RunSummary { status: RunStatus::Completed, best_normalized: Some(best), ..summary }
        }
        Err(e) => {
            log::warn!("run {task}/{algorithm}/{seed} failed: {e}");
            manifest.error = Some(e.to_string());
            manifest.error_kind = Some(e.kind().into());
            RunSummary { error: Some(e.to_string()), ..summary }
        }
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(summary)
}

fn train_run(
    cfg: &ExperimentConfig,
    ctx: &TaskContext,
    algorithm: Algorithm,
    seed: u64,
    hyper: Hyperparameters,
    dir: &Path,
) -> Result<(Vec<EvalRecord>, usize)> {
    let log_path = dir.join("log.csv");
    let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    let mut write_err = None;
    let setup = TrainSetup {
        algorithm,
        hyper,
        env: ctx.env.clone(),
        source: ctx.source.clone(),
        eval_topologies: ctx.eval_topologies.clone(),
        bounds: ctx.bounds,
        seed,
        evaluations: cfg.experiment.evaluations,
    };
    let outcome = train_with(&setup, &mut |r| {
        if write_err.is_none() {
            write_err = writer.serialize(LogRow::from(r)).and_then(|_| Ok(writer.flush()?)).err();
        }
    });
    if let Some(e) = write_err {
        return Err(Error::Csv(format!("{}: {e}", log_path.display())));
    }
    writer.flush().map_err(|e| Error::io(&log_path, e))?;
    let outcome = outcome?;
    let meta = CheckpointMeta {
        task: cfg.experiment.task,
        algorithm,
        seed,
        layout: *outcome.learner.layout(),
        episodes: setup.hyper.episodes,
    };
    let nets = outcome.learner.networks();
    let named: Vec<(&str, _)> = nets.iter().map(|(n, net)| (n.as_str(), *net)).collect();
    save_checkpoint(&dir.join("checkpoints").join(CHECKPOINT_FILE), &named, serde_json::to_value(&meta)?)?;
    Ok((outcome.records, outcome.env_steps))
}

/// Runs every (algorithm, seed) pair on a pool of `workers` threads. A
/// failing run is recorded in its manifest and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let ctx = prepare_task(cfg)?;
    let jobs: Vec<(Algorithm, u64)> =
        cfg.experiment.algorithms.iter().flat_map(|&a| cfg.experiment.seeds.iter().map(move |&s| (a, s))).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunSummary>>>> = Mutex::new(jobs.iter().map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..cfg.experiment.workers.min(jobs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(algorithm, seed)) = jobs.get(k) else { break };
                let r = run_one(cfg, &ctx, algorithm, seed);
                results.lock().expect("worker panicked")[k] = Some(r);
            });
        }
    });
    results.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every job ran")).collect()
}

/// Re-executes the run described by a manifest into `out`.
pub fn rerun_manifest(manifest: &Manifest, out: &Path) -> Result<RunSummary> {
    let mut cfg = manifest.config.clone();
    cfg.experiment.out = out.to_path_buf();
    let ctx = prepare_task(&cfg)?;
    run_one(&cfg, &ctx, manifest.algorithm, manifest.seed)
}
