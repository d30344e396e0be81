//! The eight benchmarked learners: independent and hysteretic DQN, VDN,
//! QMIX, and the independent and centralized-critic variants of A2C and
//! PPO.

mod actor_critic;
mod buffer;
mod explore;
mod inputs;
mod mixer;
mod train;
mod value;

pub use actor_critic::{ppo_surrogate_grad, ActorCriticLearner};
pub use buffer::{ReplayBuffer, RolloutBuffer};
pub use explore::{epsilon_greedy, ExplorationSchedule};
pub use inputs::{InputLayout, Observation};
pub use mixer::{Mixer, QmixMixer, VdnMixer};
pub use train::{eval_points, evaluate_learner, train, train_with, EvalRecord, GreedyPolicy, Learner, TrainOutcome, TrainSetup};
pub use value::ValueLearner;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Idqn,
    HysIdqn,
    Vdn,
    Qmix,
    Ia2c,
    Maa2c,
    Ippo,
    Mappo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Idqn,
        Algorithm::HysIdqn,
        Algorithm::Vdn,
        Algorithm::Qmix,
        Algorithm::Ia2c,
        Algorithm::Maa2c,
        Algorithm::Ippo,
        Algorithm::Mappo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Idqn => "idqn",
            Algorithm::HysIdqn => "hys_idqn",
            Algorithm::Vdn => "vdn",
            Algorithm::Qmix => "qmix",
            Algorithm::Ia2c => "ia2c",
            Algorithm::Maa2c => "maa2c",
            Algorithm::Ippo => "ippo",
            Algorithm::Mappo => "mappo",
        }
    }

    pub fn is_value_based(self) -> bool {
        matches!(self, Algorithm::Idqn | Algorithm::HysIdqn | Algorithm::Vdn | Algorithm::Qmix)
    }

    pub fn is_ppo(self) -> bool {
        matches!(self, Algorithm::Ippo | Algorithm::Mappo)
    }

    /// Uses global information during training (mixer or critic).
    pub fn is_centralized(self) -> bool {
        matches!(self, Algorithm::Vdn | Algorithm::Qmix | Algorithm::Maa2c | Algorithm::Mappo)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown algorithm `{s}` (expected one of idqn, hys_idqn, vdn, qmix, ia2c, maa2c, ippo, mappo)"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub hidden: usize,
    /// Q-network or actor learning rate.
    pub lr: f64,
    pub critic_lr: f64,
    pub mixer_lr: f64,
    pub gamma: f64,
    /// Replay minibatch for value methods, rollout length for actor-critic.
    pub batch_size: usize,
    /// Soft target-update rate; zero disables target networks.
    pub tau: f64,
    pub episodes: usize,
    pub anneal_episodes: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub hysteretic_alpha: f64,
    pub hysteretic_beta: f64,
    pub ppo_epochs: usize,
    pub minibatches: usize,
    pub clip_ratio: f64,
    pub entropy_coef: f64,
    pub parameter_sharing: bool,
    pub replay_capacity: usize,
    pub warmup: usize,
    pub grad_clip: f64,
    pub mixer_embed: usize,
}

impl Hyperparameters {
    pub fn defaults(algorithm: Algorithm, task: Task) -> Self {
        let mut h = Hyperparameters {
            hidden: 128,
            lr: 3e-5,
            critic_lr: 3e-5,
            mixer_lr: 1e-6,
            gamma: 0.9,
            batch_size: 64,
            tau: 5e-3,
            episodes: 50_000,
            anneal_episodes: 40_000,
            epsilon_start: 1.0,
            epsilon_end: 0.02,
            hysteretic_alpha: 1.0,
            hysteretic_beta: if algorithm == Algorithm::HysIdqn { 0.2 } else { 1.0 },
            ppo_epochs: 10,
            minibatches: 4,
            clip_ratio: 0.2,
            entropy_coef: 0.001,
            parameter_sharing: false,
            replay_capacity: 100_000,
            warmup: 1_000,
            grad_clip: 10.0,
            mixer_embed: 32,
        };
        let ml = task.multi_location();
        if algorithm.is_value_based() {
            match task {
                Task::Nfig => {}
                Task::SigSlNff | Task::SigSlFf => {
                    h.episodes = 3_000;
                    h.anneal_episodes = 2_400;
                }
                Task::SigMl | Task::Posig => {
                    h.episodes = 30_000;
                    h.anneal_episodes = 24_000;
                    h.lr = match (algorithm, task) {
                        (Algorithm::Idqn | Algorithm::HysIdqn, Task::Posig) => 1e-6,
                        _ => 1e-5,
                    };
                }
            }
            h.critic_lr = h.lr;
        } else {
            h.tau = 0.0;
            h.anneal_episodes = 0;
            h.entropy_coef = 0.0;
            h.episodes = match task {
                Task::Nfig => 50_000,
                Task::SigSlNff | Task::SigSlFf => 30_000,
                Task::SigMl | Task::Posig => 100_000,
            };
            if algorithm.is_ppo() {
                h.lr = 4e-4;
                h.critic_lr = 6e-4;
                h.gamma = 0.99;
                h.batch_size = 256;
                h.entropy_coef = 0.001;
                h.parameter_sharing = true;
            } else {
                let lr = if ml { 5e-4 } else { 2e-4 };
                h.lr = lr;
                h.critic_lr = lr;
                h.batch_size = 8;
                h.tau = 0.01;
                h.parameter_sharing = ml;
            }
        }
        h
    }

    /// Multiplies the episode budget and the exploration schedule by
    /// `scale`, keeping at least one episode.
    pub fn scaled(&self, scale: f64) -> Self {
        let s = |n: usize| ((n as f64 * scale).ceil() as usize).max(1);
        Hyperparameters {
            episodes: s(self.episodes),
            anneal_episodes: if self.anneal_episodes == 0 { 0 } else { s(self.anneal_episodes) },
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr", self.lr),
            ("critic_lr", self.critic_lr),
            ("mixer_lr", self.mixer_lr),
            ("grad_clip", self.grad_clip),
            ("clip_ratio", self.clip_ratio),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Config(format!("{k} must be positive")));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config("gamma and tau must lie in [0, 1]".into()));
        }
        if self.hidden == 0 || self.batch_size == 0 || self.episodes == 0 || self.ppo_epochs == 0 {
            return Err(Error::Config("hidden, batch_size, episodes and ppo_epochs must be positive".into()));
        }
        if self.minibatches == 0 || self.minibatches > self.batch_size {
            return Err(Error::Config("minibatches must be in 1..=batch_size".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_end) || !(self.epsilon_end..=1.0).contains(&self.epsilon_start) {
            return Err(Error::Config("epsilon must satisfy 0 <= end <= start <= 1".into()));
        }
        if self.hysteretic_alpha < 0.0 || self.hysteretic_beta < 0.0 || self.entropy_coef < 0.0 {
            return Err(Error::Config("hysteretic rates and entropy_coef must be non-negative".into()));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::Config("replay_capacity must be at least batch_size".into()));
        }
        Ok(())
    }
}
