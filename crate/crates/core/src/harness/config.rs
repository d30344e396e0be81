use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::game::{GameParams, Task};
use crate::marl::{Algorithm, Hyperparameters};
use crate::oracle::BoundsSettings;
use crate::topology::{DatasetSpec, HighwayConfig, SamplingMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub task: Task,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Multiplies every episode budget and exploration schedule.
    pub scale: f64,
    pub out: PathBuf,
    pub workers: usize,
    pub evaluations: usize,
    pub num_v2v: usize,
    pub num_v2i: usize,
    /// Training topology of single-location tasks, as a test-set label.
    pub topology: String,
    pub topology_seed: u64,
    pub channel_seed: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            task: Task::Nfig,
            algorithms: vec![Algorithm::Idqn],
            seeds: (0..5).collect(),
            scale: 0.02,
            out: PathBuf::from("out"),
            workers: 1,
            evaluations: 100,
            num_v2v: 4,
            num_v2i: 4,
            topology: "123_far".into(),
            topology_seed: 0,
            channel_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// CSV of training topologies; generated and written here when absent.
    pub path: Option<PathBuf>,
    pub n_samples: usize,
    pub sampling_mode: SamplingMode,
    pub seed: u64,
    pub rollout_len: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetSpec::default();
        DatasetSection {
            path: None,
            n_samples: d.n_samples,
            sampling_mode: d.sampling_mode,
            seed: d.seed,
            rollout_len: d.rollout_len,
        }
    }
}

impl DatasetSection {
    pub fn spec(&self) -> DatasetSpec {
        DatasetSpec {
            n_samples: self.n_samples,
            sampling_mode: self.sampling_mode,
            seed: self.seed,
            rollout_len: self.rollout_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub highway: HighwayConfig,
    pub channel: ChannelParams,
    /// Overrides on top of the task's game defaults.
    pub game: toml::Table,
    pub dataset: DatasetSection,
    pub bounds: BoundsSettings,
    /// Hyperparameter overrides for every algorithm; sub-tables named after
    /// an algorithm apply to that algorithm only.
    pub hyper: toml::Table,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if !(e.scale > 0.0) {
            return Err(Error::Config("scale must be positive".into()));
        }
        if e.algorithms.is_empty() || e.seeds.is_empty() {
            return Err(Error::Config("algorithms and seeds must be non-empty".into()));
        }
        if e.workers == 0 || e.evaluations == 0 {
            return Err(Error::Config("workers and evaluations must be positive".into()));
        }
        if e.num_v2v == 0 || e.num_v2i == 0 {
            return Err(Error::Config("num_v2v and num_v2i must be positive".into()));
        }
        self.dataset.spec().validate()?;
        self.game_params()?.validate()?;
        for &a in &e.algorithms {
            self.hyperparameters(a)?;
        }
        for key in self.hyper.keys() {
            if let Some(toml::Value::Table(_)) = self.hyper.get(key) {
                key.parse::<Algorithm>()?;
            }
        }
        Ok(())
    }

    pub fn game_params(&self) -> Result<GameParams> {
        merge_overrides(&self.experiment.task.default_params(), &self.game, "game")
    }

    /// Defaults for the configured task, then the shared and the
    /// per-algorithm overrides, then the budget scale.
    pub fn hyperparameters(&self, algorithm: Algorithm) -> Result<Hyperparameters> {
        let base = Hyperparameters::defaults(algorithm, self.experiment.task);
        let shared: toml::Table = self.hyper.iter().filter(|(_, v)| !v.is_table()).map(|(k, v)| (k.clone(), v.clone())).collect();
        let mut h = merge_overrides(&base, &shared, "hyper")?;
        if let Some(toml::Value::Table(t)) = self.hyper.get(algorithm.name()) {
            h = merge_overrides(&h, t, &format!("hyper.{algorithm}"))?;
        }
        let h = h.scaled(self.experiment.scale);
        h.validate()?;
        Ok(h)
    }
}

/// Applies `overrides` key by key to the serialized form of `base`,
/// rejecting keys `base` does not have.
pub fn merge_overrides<T: Serialize + DeserializeOwned>(base: &T, overrides: &toml::Table, section: &str) -> Result<T> {
    let mut table = toml::Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    for (k, v) in overrides {
        if !table.contains_key(k) {
            let valid: Vec<&str> = table.keys().map(String::as_str).collect();
            return Err(Error::Config(format!("unknown key `{k}` in [{section}]; valid keys: {}", valid.join(", "))));
        }
        table.insert(k.clone(), v.clone());
    }
    T::deserialize(toml::Value::Table(table)).map_err(|e| Error::Config(format!("[{section}]: {}", e.message())))
}
