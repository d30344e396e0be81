use std::sync::Arc;

use rand::Rng as _;

use super::observe::{encode_global, encode_local, global_state_dim, local_obs_dim};
use super::physics::{interference, link_rates_into, scaled_reward, Action, LinkRates, Powers, QueueState};
use super::{GameParams, Task};
use crate::channel::{
    large_scale_gains, realize_from_gains, ChannelParams, ChannelRealization, FadingMode, LargeScaleGains, ShadowState,
};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::topology::{Dataset, TopologySampler, TopologySnapshot};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub task: Task,
    pub channel: ChannelParams,
    pub game: GameParams,
    /// Seeds the per-topology shadowing draw together with the sample id.
    pub channel_seed: u64,
}

impl EnvConfig {
    pub fn new(task: Task) -> Self {
        EnvConfig { task, channel: ChannelParams::default(), game: task.default_params(), channel_seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub enum TopologySource {
    Fixed(TopologySnapshot),
    Dataset { dataset: Arc<Dataset>, sampler: TopologySampler },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Common reward, identical for every agent.
    pub reward: f64,
    /// Bits/s per V2I link.
    pub v2i_rates: Vec<f64>,
    /// Bits/s per V2V link.
    pub v2v_rates: Vec<f64>,
    /// `I_{i,m}` in watts, `[i * M + m]`.
    pub interference: Vec<f64>,
    pub done: bool,
}

/// One interference-game instance. Owns its fading rng and the shadowing
/// of the current topology.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    powers: Powers<f64>,
    source: TopologySource,
    rng: Rng,
    topology: TopologySnapshot,
    gains: LargeScaleGains<f64>,
    realization: ChannelRealization<f64>,
    queue: QueueState<f64>,
    prev_interference: Vec<f64>,
    rates: LinkRates<f64>,
    done: bool,
}

impl Env {
    /// Builds the environment and performs the first reset.
    pub fn new(cfg: EnvConfig, source: TopologySource, seed: u64) -> Result<Self> {
        cfg.channel.validate()?;
        cfg.game.validate()?;
        let first = match &source {
            TopologySource::Fixed(t) => t.clone(),
            TopologySource::Dataset { dataset, .. } => dataset.samples.first().ok_or(Error::EmptyDataset)?.clone(),
        };
        if first.num_v2i == 0 {
            return Err(Error::Config("at least one V2I link (subchannel) is required".into()));
        }
        let powers = Powers::from_params(&cfg.channel);
        let gains = large_scale_gains(&first, &cfg.channel, &ShadowState::zero(first.num_v2v, first.num_v2i));
        let realization = realize_from_gains(&gains, FadingMode::None, &mut rng::seeded(0, 0));
        let mut env = Env {
            queue: QueueState::new(first.num_v2v),
            prev_interference: Vec::new(),
            rates: LinkRates { v2i: Vec::new(), v2v: Vec::new() },
            done: true,
            rng: rng::seeded(seed, rng::stream::ENV),
            cfg,
            powers,
            source,
            topology: first,
            gains,
            realization,
        };
        env.reset()?;
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn task(&self) -> Task {
        self.cfg.task
    }

    pub fn num_agents(&self) -> usize {
        self.topology.num_v2v
    }

    pub fn num_subchannels(&self) -> usize {
        self.topology.num_v2i
    }

    pub fn num_actions(&self) -> usize {
        self.powers.num_actions(self.num_subchannels())
    }

    pub fn horizon(&self) -> usize {
        self.cfg.game.horizon
    }

    pub fn powers(&self) -> &Powers<f64> {
        &self.powers
    }

    pub fn topology(&self) -> &TopologySnapshot {
        &self.topology
    }

    pub fn realization(&self) -> &ChannelRealization<f64> {
        &self.realization
    }

    pub fn large_scale(&self) -> &LargeScaleGains<f64> {
        &self.gains
    }

    pub fn queue(&self) -> &QueueState<f64> {
        &self.queue
    }

    pub fn t(&self) -> usize {
        self.queue.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn rng_mut(&mut self) -> &mut Rng {
        &mut self.rng
    }

    /// Draws the next topology from the source and starts an episode.
    pub fn reset(&mut self) -> Result<()> {
        let next = match &mut self.source {
            TopologySource::Fixed(t) => t.clone(),
            TopologySource::Dataset { dataset, sampler } => {
                if dataset.is_empty() {
                    return Err(Error::EmptyDataset);
                }
                let idx = sampler.next_index(dataset.len(), &mut self.rng);
                dataset.samples[idx].clone()
            }
        };
        self.start(next);
        Ok(())
    }

    /// Starts an episode on an explicit topology, bypassing the source.
    pub fn reset_to(&mut self, topology: &TopologySnapshot) {
        self.start(topology.clone());
    }

    fn start(&mut self, topology: TopologySnapshot) {
        let (l, m) = (topology.num_v2v, topology.num_v2i);
        let mut shadow_rng = rng::seeded(rng::mix(self.cfg.channel_seed, topology.sample_id), rng::stream::SHADOWING);
        let shadow = ShadowState::draw(l, m, &self.cfg.channel, &mut shadow_rng);
        self.gains = large_scale_gains(&topology, &self.cfg.channel, &shadow);
        self.topology = topology;
        self.queue = QueueState::new(l);
        self.prev_interference = vec![self.powers.noise; l * m];
        self.realization = realize_from_gains(&self.gains, self.cfg.task.fading(), &mut self.rng);
        self.done = false;
    }

    pub fn global_state_dim(&self) -> usize {
        global_state_dim(self.num_agents(), self.num_subchannels())
    }

    pub fn obs_dim(&self) -> usize {
        if self.cfg.task.partially_observable() {
            local_obs_dim(self.num_subchannels())
        } else {
            self.global_state_dim()
        }
    }

    pub fn global_state(&self, out: &mut Vec<f64>) {
        encode_global(&self.realization, &self.queue.q, self.queue.t, self.horizon(), out);
    }

    pub fn local_obs(&self, agent: usize, out: &mut Vec<f64>) {
        encode_local(
            &self.realization,
            &self.prev_interference,
            self.powers.noise,
            &self.queue.q,
            self.queue.t,
            self.horizon(),
            agent,
            out,
        );
    }

    /// The agent's input: the global state in fully observable tasks, the
    /// local view otherwise.
    pub fn observe(&self, agent: usize, out: &mut Vec<f64>) {
        if self.cfg.task.partially_observable() {
            self.local_obs(agent, out)
        } else {
            self.global_state(out)
        }
    }

    fn check_actions(&self, actions: &[Action]) -> Result<()> {
        if actions.len() != self.num_agents() {
            return Err(Error::Shape { expected: self.num_agents(), got: actions.len() });
        }
        if let Some(a) = actions.iter().find(|a| a.subchannel >= self.num_subchannels() || a.power >= self.powers.num_levels()) {
            return Err(Error::Config(format!("action {a:?} out of range")));
        }
        Ok(())
    }

    /// Common reward of a joint action under the current channel and queue,
    /// without advancing the episode.
    pub fn peek_reward(&mut self, actions: &[Action]) -> f64 {
        link_rates_into(actions, &self.realization, &self.powers, &mut self.rates);
        self.reward_of_rates()
    }

    fn reward_of_rates(&self) -> f64 {
        let q = (self.cfg.task != Task::Nfig).then_some(self.queue.q.as_slice());
        scaled_reward(&self.rates, q, &self.cfg.game.weights, self.cfg.game.rate_scale)
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        self.check_actions(actions)?;
        link_rates_into(actions, &self.realization, &self.powers, &mut self.rates);
        let reward = self.reward_of_rates();
        let interf = interference(actions, &self.realization, &self.powers);
        let cam: Vec<f64> = self.rates.v2v.iter().map(|r| r / self.cfg.game.cam_bits).collect();
        self.queue.step(&cam, self.cfg.game.slot_seconds);
        self.prev_interference.clone_from(&interf);
        self.done = self.queue.t >= self.horizon();
        if !self.done && self.cfg.task.fading() == FadingMode::Fast {
            self.realization = realize_from_gains(&self.gains, FadingMode::Fast, &mut self.rng);
        }
        Ok(StepOutcome {
            reward,
            v2i_rates: self.rates.v2i.clone(),
            v2v_rates: self.rates.v2v.clone(),
            interference: interf,
            done: self.done,
        })
    }
}

/// Chooses a joint action from the current environment state.
pub trait Policy {
    fn act(&mut self, env: &Env, actions: &mut Vec<Action>);
}

/// Uniform i.i.d. actions for every agent.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy { rng: rng::seeded(seed, rng::stream::BOUNDS) }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, env: &Env, actions: &mut Vec<Action>) {
        let n = env.powers().num_levels();
        let k = env.num_actions();
        actions.clear();
        actions.extend((0..env.num_agents()).map(|_| Action::from_index(self.rng.random_range(0..k), n)));
    }
}

/// Plays one episode from the current state and returns the undiscounted
/// return.
pub fn run_episode(env: &mut Env, policy: &mut dyn Policy) -> Result<f64> {
    let mut actions = Vec::with_capacity(env.num_agents());
    let mut total = 0.0;
    while !env.is_done() {
        policy.act(env, &mut actions);
        total += env.step(&actions)?.reward;
    }
    Ok(total)
}
