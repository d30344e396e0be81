use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::game::{EnvConfig, GameParams, Task, TopologySource};
use crate::oracle::{topology_bounds, BoundsSettings, NormalizationBounds};
use crate::topology::{
    generate_dataset, load_dataset, save_dataset, test_topologies, Dataset, TopologySampler, TopologySnapshot,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyRef {
    pub label: String,
    pub sample_id: u64,
}

impl From<&TopologySnapshot> for TopologyRef {
    fn from(t: &TopologySnapshot) -> Self {
        TopologyRef { label: t.label(), sample_id: t.sample_id }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainingSet {
    Fixed { topology: TopologyRef },
    Dataset { path: PathBuf, n_samples: usize },
}

/// Everything shared by the runs of one task: environment, training
/// source, evaluation topologies and their normalization bounds.
#[derive(Debug, Clone)]
pub struct TaskContext {
    pub env: EnvConfig,
    pub source: TopologySource,
    pub training: TrainingSet,
    pub eval_topologies: Vec<TopologySnapshot>,
    pub topology_bounds: Vec<NormalizationBounds>,
    pub bounds: NormalizationBounds,
}

pub fn env_config(cfg: &ExperimentConfig) -> Result<EnvConfig> {
    Ok(EnvConfig {
        task: cfg.experiment.task,
        channel: cfg.channel.clone(),
        game: cfg.game_params()?,
        channel_seed: cfg.experiment.channel_seed,
    })
}

pub fn test_set(cfg: &ExperimentConfig) -> Result<Vec<TopologySnapshot>> {
    let e = &cfg.experiment;
    test_topologies(&cfg.highway, e.num_v2v, e.num_v2i, e.topology_seed)
}

/// Picks a test topology by label, e.g. `123_far`.
pub fn find_topology<'a>(set: &'a [TopologySnapshot], label: &str) -> Result<&'a TopologySnapshot> {
    set.iter().find(|t| t.label() == label).ok_or_else(|| {
        let valid: Vec<String> = set.iter().map(TopologySnapshot::label).collect();
        Error::Config(format!("unknown topology `{label}`; valid: {}", valid.join(", ")))
    })
}

pub fn default_dataset_path(cfg: &ExperimentConfig) -> PathBuf {
    let (e, d) = (&cfg.experiment, &cfg.dataset);
    cfg.experiment
        .out
        .join("data")
        .join(format!("train_l{}_m{}_n{}_s{}_r{}.csv", e.num_v2v, e.num_v2i, d.n_samples, d.seed, d.rollout_len))
}

/// Loads the training dataset, generating and saving it first when the
/// file does not exist.
pub fn load_or_generate_dataset(cfg: &ExperimentConfig) -> Result<(PathBuf, Dataset)> {
    let path = cfg.dataset.path.clone().unwrap_or_else(|| default_dataset_path(cfg));
    let e = &cfg.experiment;
    if path.exists() {
        let ds = load_dataset(&path)?;
        if ds.num_v2v != e.num_v2v || ds.num_v2i != e.num_v2i {
            return Err(Error::Config(format!(
                "dataset {} has {}x{} links, experiment needs {}x{}",
                path.display(),
                ds.num_v2v,
                ds.num_v2i,
                e.num_v2v,
                e.num_v2i
            )));
        }
        return Ok((path, ds));
    }
    log::info!("dataset {} not found, generating {} samples", path.display(), cfg.dataset.n_samples);
    let ds = generate_dataset(&cfg.highway, e.num_v2v, e.num_v2i, &cfg.dataset.spec())?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_dataset(&ds, &path)?;
    Ok((path, ds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BoundsEntry {
    task: Task,
    topology: TopologyRef,
    settings: BoundsSettings,
    channel_seed: u64,
    channel: ChannelParams,
    game: GameParams,
    bounds: NormalizationBounds,
}

/// Normalization bounds memoized on disk per task and topology.
#[derive(Debug, Clone)]
pub struct BoundsCache {
    dir: PathBuf,
}

impl BoundsCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        BoundsCache { dir: dir.into() }
    }

    pub fn path(&self, task: Task, topology: &TopologySnapshot) -> PathBuf {
        self.dir.join(task.name()).join(format!("{}_{}.json", topology.label(), topology.sample_id))
    }

    pub fn get_or_compute(
        &self,
        env: &EnvConfig,
        topology: &TopologySnapshot,
        settings: &BoundsSettings,
    ) -> Result<NormalizationBounds> {
        let path = self.path(env.task, topology);
        let mut entry = BoundsEntry {
            task: env.task,
            topology: topology.into(),
            settings: *settings,
            channel_seed: env.channel_seed,
            channel: env.channel.clone(),
            game: env.game.clone(),
            bounds: NormalizationBounds::new(0.0, 0.0),
        };
        if let Some(cached) = read_entry(&path) {
            if (BoundsEntry { bounds: cached.bounds, ..entry.clone() }) == cached {
                return Ok(cached.bounds);
            }
        }
        entry.bounds = topology_bounds(env, topology, settings)?;
        if entry.bounds.is_degenerate() {
            return Err(Error::DegenerateBounds(entry.bounds.g_max));
        }
        write_json(&path, &entry)?;
        Ok(entry.bounds)
    }
}

fn read_entry(path: &Path) -> Option<BoundsEntry> {
    serde_json::from_slice(&fs::read(path).ok()?).ok()
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Single-location tasks train and evaluate on one test topology;
/// multi-location tasks train on the dataset and evaluate on all nine test
/// topologies.
pub fn prepare_task(cfg: &ExperimentConfig) -> Result<TaskContext> {
    let env = env_config(cfg)?;
    let tests = test_set(cfg)?;
    let cache = BoundsCache::new(cfg.experiment.out.join("bounds"));
    let (source, training, eval_topologies) = if env.task.multi_location() {
        let (path, ds) = load_or_generate_dataset(cfg)?;
        let training = TrainingSet::Dataset { path, n_samples: ds.len() };
        let source = TopologySource::Dataset { dataset: Arc::new(ds), sampler: TopologySampler::new(cfg.dataset.sampling_mode) };
        (source, training, tests)
    } else {
        let t = find_topology(&tests, &cfg.experiment.topology)?.clone();
        let training = TrainingSet::Fixed { topology: (&t).into() };
        (TopologySource::Fixed(t.clone()), training, vec![t; 9])
    };
    let mut topology_bounds = Vec::new();
    for (k, t) in eval_topologies.iter().enumerate() {
        let b = match eval_topologies[..k].iter().position(|p| p == t) {
            Some(j) => topology_bounds[j],
            None => cache.get_or_compute(&env, t, &cfg.bounds)?,
        };
        topology_bounds.push(b);
    }
    let bounds = NormalizationBounds::mean_of(&topology_bounds);
    Ok(TaskContext { env, source, training, eval_topologies, topology_bounds, bounds })
}
