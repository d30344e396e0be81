use std::collections::HashMap;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::nash::PayoffTensor;
use super::search::{exhaustive_search, greedy_search, JointEvaluator, Objective, ENUMERATION_GUARD};
use crate::error::{Error, Result};
use crate::game::{run_episode, Action, Env, EnvConfig, Policy, RandomPolicy, Task, TopologySource};
use crate::rng;
use crate::topology::{Dataset, TopologySnapshot};

/// Returns of the uniform random policy (`g_min`) and of the oracle
/// (`g_max`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBounds {
    pub g_min: f64,
    pub g_max: f64,
    /// Standard error of the `g_min` estimate; zero when exact.
    pub g_min_stderr: f64,
}

impl NormalizationBounds {
    pub fn new(g_min: f64, g_max: f64) -> Self {
        NormalizationBounds { g_min, g_max, g_min_stderr: 0.0 }
    }

    pub fn is_degenerate(&self) -> bool {
        self.g_max <= self.g_min
    }

    /// `(g - g_min) / (g_max - g_min)`; may leave `[0, 1]`.
    pub fn normalize(&self, g: f64) -> Result<f64> {
        normalize_return(g, self)
    }

    /// Component-wise mean, used for multi-topology evaluation sets.
    pub fn mean_of(bounds: &[NormalizationBounds]) -> Self {
        let n = bounds.len() as f64;
        let se2: f64 = bounds.iter().map(|b| b.g_min_stderr * b.g_min_stderr).sum();
        NormalizationBounds {
            g_min: bounds.iter().map(|b| b.g_min).sum::<f64>() / n,
            g_max: bounds.iter().map(|b| b.g_max).sum::<f64>() / n,
            g_min_stderr: se2.sqrt() / n,
        }
    }
}

pub fn normalize_return(g: f64, bounds: &NormalizationBounds) -> Result<f64> {
    if bounds.g_max == bounds.g_min {
        return Err(Error::DegenerateBounds(bounds.g_max));
    }
    Ok((g - bounds.g_min) / (bounds.g_max - bounds.g_min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        MeanEstimate { mean, stderr, n }
    }
}

/// Mean return of uniformly random joint actions over `n_episodes`
/// episodes, each started with `env.reset()`.
pub fn random_policy_return(env: &mut Env, n_episodes: usize, seed: u64) -> Result<MeanEstimate> {
    let mut policy = RandomPolicy::new(seed);
    let mut returns = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        env.reset()?;
        returns.push(run_episode(env, &mut policy)?);
    }
    Ok(MeanEstimate::of(&returns))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    Exhaustive,
    Greedy,
}

impl OracleMode {
    /// Exhaustive up to the enumeration guard, greedy beyond.
    pub fn for_agents(num_agents: usize) -> Self {
        if num_agents <= ENUMERATION_GUARD {
            OracleMode::Exhaustive
        } else {
            OracleMode::Greedy
        }
    }
}

/// Per-step maximizer of the common step reward. Without fast fading the
/// choice depends only on the topology and on which queues are empty, so
/// it is memoized on that key.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    mode: OracleMode,
    cache: HashMap<(u64, u64), Vec<Action>>,
}

impl OraclePolicy {
    pub fn new(mode: OracleMode, num_agents: usize) -> Result<Self> {
        if mode == OracleMode::Exhaustive && num_agents > ENUMERATION_GUARD {
            return Err(Error::EnumerationGuard { agents: num_agents, guard: ENUMERATION_GUARD });
        }
        Ok(OraclePolicy { mode, cache: HashMap::new() })
    }

    fn solve(&self, env: &Env) -> Vec<Action> {
        let game = &env.config().game;
        let objective = if env.task() == Task::Nfig {
            Objective::Nfig(game.weights)
        } else {
            Objective::Sig { weights: game.weights, queue: env.queue().q.clone() }
        };
        let mut eval = JointEvaluator::new(env.realization(), env.powers(), objective, game.rate_scale);
        let joint = match self.mode {
            OracleMode::Exhaustive => exhaustive_search(&mut eval, ENUMERATION_GUARD).expect("guard checked").0,
            OracleMode::Greedy => greedy_search(&mut eval).joint,
        };
        let n = env.powers().num_levels();
        joint.into_iter().map(|a| Action::from_index(a, n)).collect()
    }
}

impl Policy for OraclePolicy {
    fn act(&mut self, env: &Env, actions: &mut Vec<Action>) {
        let memo = env.task().fading() == crate::channel::FadingMode::None;
        let key =
            (env.topology().sample_id, env.queue().q.iter().enumerate().fold(0u64, |m, (i, &q)| m | (u64::from(q <= 0.0) << i)));
        if memo {
            if let Some(a) = self.cache.get(&key) {
                actions.clone_from(a);
                return;
            }
        }
        let a = self.solve(env);
        actions.clone_from(&a);
        if memo {
            self.cache.insert(key, a);
        }
    }
}

/// Return of one oracle episode on the environment's current topology.
pub fn sig_sl_oracle_return(env: &mut Env, mode: OracleMode) -> Result<f64> {
    let mut policy = OraclePolicy::new(mode, env.num_agents())?;
    let topology = env.topology().clone();
    env.reset_to(&topology);
    run_episode(env, &mut policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSettings {
    /// Random-policy episodes per topology.
    pub random_episodes: usize,
    /// Oracle episodes per topology when fast fading makes them differ.
    pub oracle_episodes: usize,
    pub seed: u64,
}

impl Default for BoundsSettings {
    fn default() -> Self {
        BoundsSettings { random_episodes: 200, oracle_episodes: 20, seed: 0 }
    }
}

/// Normalization bounds of one task on one topology. The one-shot game
/// uses the exact optimum and the exact mean payoff; multi-location tasks
/// take `g_max` from the oracle without fast fading.
pub fn topology_bounds(cfg: &EnvConfig, topology: &TopologySnapshot, settings: &BoundsSettings) -> Result<NormalizationBounds> {
    let seed = rng::mix(settings.seed, topology.sample_id);
    let mut env = Env::new(cfg.clone(), TopologySource::Fixed(topology.clone()), seed)?;
    let mode = OracleMode::for_agents(env.num_agents());
    let bounds = match cfg.task {
        Task::Nfig => {
            let mut eval =
                JointEvaluator::new(env.realization(), env.powers(), Objective::Nfig(cfg.game.weights), cfg.game.rate_scale);
            let tensor = PayoffTensor::from_evaluator(&mut eval, ENUMERATION_GUARD)?;
            NormalizationBounds::new(tensor.mean(), tensor.argmax().1)
        }
        Task::SigSlNff | Task::SigSlFf => {
            let episodes = if cfg.task == Task::SigSlNff { 1 } else { settings.oracle_episodes.max(1) };
            let g_max = (0..episodes).map(|_| sig_sl_oracle_return(&mut env, mode)).sum::<Result<f64>>()? / episodes as f64;
            let g_min = random_policy_return(&mut env, settings.random_episodes, seed)?;
            NormalizationBounds { g_min: g_min.mean, g_max, g_min_stderr: g_min.stderr }
        }
        Task::SigMl | Task::Posig => {
            let nff = EnvConfig { task: Task::SigSlNff, ..cfg.clone() };
            let mut oracle_env = Env::new(nff, TopologySource::Fixed(topology.clone()), seed)?;
            let g_max = sig_sl_oracle_return(&mut oracle_env, mode)?;
            let g_min = random_policy_return(&mut env, settings.random_episodes, seed)?;
            NormalizationBounds { g_min: g_min.mean, g_max, g_min_stderr: g_min.stderr }
        }
    };
    Ok(bounds)
}

/// One episode per topology on a fresh environment, in order.
pub fn play_episodes(cfg: &EnvConfig, topologies: &[TopologySnapshot], policy: &mut dyn Policy, seed: u64) -> Result<Vec<f64>> {
    let first = topologies.first().ok_or(Error::EmptyDataset)?;
    let mut env = Env::new(cfg.clone(), TopologySource::Fixed(first.clone()), seed)?;
    topologies
        .iter()
        .map(|t| {
            env.reset_to(t);
            run_episode(&mut env, policy)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub train_sample_ids: Vec<u64>,
    pub train_returns: Vec<f64>,
    pub test_returns: Vec<f64>,
    /// Normalized mean over the in-training samples.
    pub train: f64,
    /// Normalized mean over the held-out topologies.
    pub test: f64,
}

/// Evaluates one policy on nine samples drawn from its training set and on
/// the held-out topologies, separating robustness from generalization.
pub fn robustness_ablation(
    policy: &mut dyn Policy,
    cfg: &EnvConfig,
    train: &Dataset,
    test: &[TopologySnapshot],
    settings: &BoundsSettings,
) -> Result<AblationReport> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut r = rng::seeded(settings.seed, rng::stream::ABLATION);
    let picked: Vec<TopologySnapshot> =
        sample(&mut r, train.len(), train.len().min(9)).into_iter().map(|i| train.samples[i].clone()).collect();
    let score = |set: &[TopologySnapshot], policy: &mut dyn Policy| -> Result<(Vec<f64>, f64)> {
        let returns = play_episodes(cfg, set, policy, settings.seed)?;
        let bounds = set.iter().map(|t| topology_bounds(cfg, t, settings)).collect::<Result<Vec<_>>>()?;
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        Ok((returns, NormalizationBounds::mean_of(&bounds).normalize(mean)?))
    };
    let (train_returns, train_norm) = score(&picked, policy)?;
    let (test_returns, test_norm) = score(test, policy)?;
    Ok(AblationReport {
        train_sample_ids: picked.iter().map(|t| t.sample_id).collect(),
        train_returns,
        test_returns,
        train: train_norm,
        test: test_norm,
    })
}
