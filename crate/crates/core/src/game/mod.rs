//! Link physics and the three interference games: the one-shot normal-form
//! game, the stochastic game with CAM queues, and its partially observable
//! variant.

mod env;
mod observe;
mod physics;

pub use env::{run_episode, Env, EnvConfig, Policy, RandomPolicy, StepOutcome, TopologySource};
pub use observe::{encode_gain, encode_global, encode_interference, encode_local, global_state_dim, local_obs_dim};
pub use physics::{
    cam_rate, interference, link_rate, link_rates, link_rates_into, reward_nfig, reward_sig, scaled_reward, sinr_v2i, sinr_v2v,
    Action, LinkRates, Powers, QueueState, RewardWeights,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::FadingMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Nfig,
    SigSlNff,
    SigSlFf,
    SigMl,
    Posig,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Nfig, Task::SigSlNff, Task::SigSlFf, Task::SigMl, Task::Posig];

    pub fn name(self) -> &'static str {
        match self {
            Task::Nfig => "nfig",
            Task::SigSlNff => "sig_sl_nff",
            Task::SigSlFf => "sig_sl_ff",
            Task::SigMl => "sig_ml",
            Task::Posig => "posig",
        }
    }

    pub fn fading(self) -> FadingMode {
        match self {
            Task::Nfig | Task::SigSlNff => FadingMode::None,
            _ => FadingMode::Fast,
        }
    }

    /// Topology redrawn from a training dataset every episode.
    pub fn multi_location(self) -> bool {
        matches!(self, Task::SigMl | Task::Posig)
    }

    pub fn partially_observable(self) -> bool {
        self == Task::Posig
    }

    pub fn default_params(self) -> GameParams {
        match self {
            Task::Nfig => GameParams { weights: RewardWeights::NFIG, horizon: 1, ..GameParams::default() },
            _ => GameParams::default(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task `{s}` (expected nfig, sig_sl_nff, sig_sl_ff, sig_ml, posig)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameParams {
    pub weights: RewardWeights,
    /// Communication intervals per episode.
    pub horizon: usize,
    /// CAM payload in bits.
    pub cam_bits: f64,
    /// Communication interval length in seconds.
    pub slot_seconds: f64,
    /// Rates enter rewards divided by this many bits/s.
    pub rate_scale: f64,
}

impl Default for GameParams {
    fn default() -> Self {
        GameParams { weights: RewardWeights::SIG, horizon: 50, cam_bits: 6.0 * 1060.0 * 8.0, slot_seconds: 1e-3, rate_scale: 1e7 }
    }
}

impl GameParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(self.cam_bits > 0.0 && self.slot_seconds > 0.0 && self.rate_scale > 0.0) {
            return Err(Error::Config("cam_bits, slot_seconds and rate_scale must be positive".into()));
        }
        Ok(())
    }
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights::SIG
    }
}
