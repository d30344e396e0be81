use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use v2xbench::game::{Env, Task, TopologySource};
use v2xbench::harness::{
    aggregate, collect_runs, env_config, load_or_generate_dataset, prepare_task, rerun_manifest, run_experiment, test_set,
    write_report, BoundsCache, CheckpointMeta, ExperimentConfig, Manifest, ReportFormat, RunStatus,
};
use v2xbench::marl::{Algorithm, GreedyPolicy};
use v2xbench::net::load_checkpoint;
use v2xbench::oracle::{
    cds_report, enumerate_pure_nash, JointEvaluator, NormalizationBounds, Objective, PayoffTensor, ENUMERATION_GUARD,
};
use v2xbench::topology::{save_dataset, Dataset};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] v2xbench::Error),
    #[error("{0}")]
    RunsFailed(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
            CliError::RunsFailed(_) => "run_failed",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fraction of the full episode budgets.
    #[arg(long, global = true)]
    scale: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TopologyArgs {
    #[arg(long)]
    task: Option<Task>,
    /// Number of V2V links (agents).
    #[arg(short = 'L', long = "num-v2v")]
    num_v2v: Option<usize>,
    /// Number of V2I links (subchannels).
    #[arg(short = 'M', long = "num-v2i")]
    num_v2i: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the training dataset and the nine test topologies.
    GenData {
        #[command(flatten)]
        topo: TopologyArgs,
        /// Training samples; defaults to the configured count times the scale.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Train algorithms over seeds into <out>/<task>/<algo>/<seed>/.
    Train {
        #[command(flatten)]
        topo: TopologyArgs,
        /// Algorithm names, comma separated.
        #[arg(long, value_delimiter = ',')]
        algo: Vec<Algorithm>,
        /// Training topology of single-location tasks, e.g. 123_far.
        #[arg(long)]
        topology: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        /// Re-execute the run recorded in this manifest.
        #[arg(long, conflicts_with_all = ["algo", "topology"])]
        manifest: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with the noise-free greedy policy.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        topology: Option<String>,
    },
    /// Normalization bounds of a task on the nine test topologies.
    Oracle {
        #[command(flatten)]
        topo: TopologyArgs,
    },
    /// Coordination difficulty scores of the one-shot game.
    Cds {
        #[command(flatten)]
        topo: TopologyArgs,
        #[arg(long, default_value = "test")]
        topology_set: String,
    },
    /// Seed-averaged maximum normalized return per task and algorithm.
    Aggregate {
        /// Root of the run directories; defaults to --out.
        #[arg(long)]
        runs: Option<PathBuf>,
    },
    /// Write result tables and plot data.
    Report {
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values = ["csv", "json", "plot"])]
        format: Vec<ReportFormat>,
    },
}

#[derive(Debug, Parser)]
#[command(name = "v2xbench", version, about = "Multi-agent radio resource allocation benchmark for C-V2X")]
pub struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn base_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let e = &mut cfg.experiment;
    if let Some(s) = common.seed {
        e.seeds = vec![s];
    }
    if let Some(s) = common.scale {
        e.scale = s;
    }
    if let Some(o) = &common.out {
        e.out = o.clone();
    }
    Ok(cfg)
}

fn apply_topology(cfg: &mut ExperimentConfig, t: &TopologyArgs) {
    let e = &mut cfg.experiment;
    if let Some(task) = t.task {
        e.task = task;
    }
    if let Some(l) = t.num_v2v {
        e.num_v2v = l;
    }
    if let Some(m) = t.num_v2i {
        e.num_v2i = m;
    }
}

/// Stdout may be a closed pipe; results are also written to files.
fn print_line(s: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{s}");
}

fn emit<T: Serialize>(value: &T, path: &Path) -> CliResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| v2xbench::Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(v2xbench::Error::from)?;
    fs::write(path, format!("{text}\n")).map_err(|e| v2xbench::Error::io(path, e))?;
    print_line(&serde_json::to_string(value).map_err(v2xbench::Error::from)?);
    Ok(())
}

pub fn run(root: Cli) -> CliResult {
    let common = &root.common;
    let mut cfg = base_config(common)?;
    match root.command {
        Command::GenData { topo, samples } => {
            apply_topology(&mut cfg, &topo);
            cfg.dataset.n_samples =
                samples.unwrap_or_else(|| ((cfg.dataset.n_samples as f64 * cfg.experiment.scale).ceil() as usize).max(1));
            cfg.dataset.seed = common.seed.unwrap_or(cfg.dataset.seed);
            cfg.validate()?;
            let (path, ds) = load_or_generate_dataset(&cfg)?;
            let tests = test_set(&cfg)?;
            let test_path = cfg.experiment.out.join("data").join("test_topologies.csv");
            let test_ds = Dataset { num_v2v: ds.num_v2v, num_v2i: ds.num_v2i, bs_position: ds.bs_position, samples: tests };
            save_dataset(&test_ds, &test_path)?;
            let summary = json!({
                "train": path, "train_samples": ds.len(),
                "test": test_path, "test_topologies": test_ds.samples.iter().map(|t| t.label()).collect::<Vec<_>>(),
            });
            emit(&summary, &cfg.experiment.out.join("data").join("gen_data.json"))
        }
        Command::Train { topo, algo, topology, workers, manifest } => {
            if let Some(path) = manifest {
                let m = Manifest::load(&path)?;
                let out = common.out.clone().unwrap_or_else(|| m.config.experiment.out.clone());
                let summary = rerun_manifest(&m, &out)?;
                return finish_runs(vec![summary]);
            }
            apply_topology(&mut cfg, &topo);
            if !algo.is_empty() {
                cfg.experiment.algorithms = algo;
            }
            if let Some(t) = topology {
                cfg.experiment.topology = t;
            }
            if let Some(w) = workers {
                cfg.experiment.workers = w;
            }
            cfg.validate()?;
            finish_runs(run_experiment(&cfg)?)
        }
        Command::Evaluate { checkpoint, topology } => {
            let ckpt = load_checkpoint::<f32>(&checkpoint)?;
            let meta: CheckpointMeta = serde_json::from_value(ckpt.meta.clone()).map_err(v2xbench::Error::from)?;
            cfg.experiment.task = meta.task;
            cfg.experiment.num_v2v = meta.layout.num_agents;
            if let Some(t) = topology {
                cfg.experiment.topology = t;
            }
            cfg.validate()?;
            let ctx = prepare_task(&cfg)?;
            let mut policy = GreedyPolicy::from_checkpoint(&ckpt, meta.layout)?;
            let seed = v2xbench::rng::mix(common.seed.unwrap_or(meta.seed), v2xbench::rng::stream::EVAL);
            let eval = v2xbench::harness::evaluate_policy(&mut policy, &ctx.env, &ctx.eval_topologies, &ctx.bounds, seed)?;
            let report = json!({
                "checkpoint": checkpoint, "task": meta.task, "algorithm": meta.algorithm,
                "topologies": ctx.eval_topologies.iter().map(|t| t.label()).collect::<Vec<_>>(),
                "bounds": ctx.bounds, "evaluation": eval,
            });
            emit(&report, &cfg.experiment.out.join("evaluation.json"))
        }
        Command::Oracle { topo } => {
            apply_topology(&mut cfg, &topo);
            cfg.bounds.seed = common.seed.unwrap_or(cfg.bounds.seed);
            cfg.validate()?;
            let env = env_config(&cfg)?;
            let cache = BoundsCache::new(cfg.experiment.out.join("bounds"));
            let rows = test_set(&cfg)?
                .iter()
                .map(|t| {
                    let b: NormalizationBounds = cache.get_or_compute(&env, t, &cfg.bounds)?;
                    Ok(json!({ "topology": t.label(), "sample_id": t.sample_id, "g_min": b.g_min, "g_max": b.g_max, "g_min_stderr": b.g_min_stderr }))
                })
                .collect::<Result<Vec<_>, v2xbench::Error>>()?;
            let task = cfg.experiment.task;
            emit(&json!({ "task": task, "bounds": rows }), &cfg.experiment.out.join(format!("oracle_{}.json", task.name())))
        }
        Command::Cds { topo, topology_set } => {
            apply_topology(&mut cfg, &topo);
            if topology_set != "test" {
                return Err(CliError::Usage(format!("unknown topology set `{topology_set}` (expected test)")));
            }
            cfg.experiment.task = Task::Nfig;
            if let Some(s) = common.seed {
                cfg.experiment.topology_seed = s;
            }
            cfg.validate()?;
            let env_cfg = env_config(&cfg)?;
            let reports = test_set(&cfg)?
                .iter()
                .map(|t| {
                    let env = Env::new(env_cfg.clone(), TopologySource::Fixed(t.clone()), 0)?;
                    let objective = Objective::Nfig(env_cfg.game.weights);
                    let mut eval = JointEvaluator::new(env.realization(), env.powers(), objective, env_cfg.game.rate_scale);
                    let tensor = PayoffTensor::from_evaluator(&mut eval, ENUMERATION_GUARD)?;
                    let bounds = NormalizationBounds::new(tensor.mean(), tensor.argmax().1);
                    let set = enumerate_pure_nash(&tensor, &bounds)?;
                    cds_report(&set, t.label(), t.sample_id)
                })
                .collect::<Result<Vec<_>, v2xbench::Error>>()?;
            emit(&reports, &cfg.experiment.out.join("cds.json"))
        }
        Command::Aggregate { runs } => {
            let root = runs.unwrap_or_else(|| cfg.experiment.out.clone());
            let cells = aggregate(&collect_runs(&root)?)?;
            emit(&cells, &cfg.experiment.out.join("aggregate.json"))
        }
        Command::Report { runs, format } => {
            let root = runs.unwrap_or_else(|| cfg.experiment.out.clone());
            let logs = collect_runs(&root)?;
            let cells = aggregate(&logs)?;
            let written = write_report(&cells, &logs, &cfg.experiment.out.join("report"), &format)?;
            print_line(&json!({ "written": written, "cells": cells.len(), "runs": logs.len() }).to_string());
            Ok(())
        }
    }
}

fn finish_runs(summaries: Vec<v2xbench::harness::RunSummary>) -> CliResult {
    for s in &summaries {
        print_line(&serde_json::to_string(s).map_err(v2xbench::Error::from)?);
    }
    let failed: Vec<String> = summaries
        .iter()
        .filter(|s| s.status == RunStatus::Failed)
        .map(|s| format!("{}/{}/{}: {}", s.task.name(), s.algorithm, s.seed, s.error.as_deref().unwrap_or("unknown")))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::RunsFailed(format!("{} of {} runs failed: {}", failed.len(), summaries.len(), failed.join("; "))))
    }
}
