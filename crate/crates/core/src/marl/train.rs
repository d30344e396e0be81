use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::actor_critic::ActorCriticLearner;
use super::explore::ExplorationSchedule;
use super::inputs::{InputLayout, Observation};
use super::value::ValueLearner;
use super::{Algorithm, Hyperparameters};
use crate::error::{Error, Result};
use crate::game::{Action, Env, EnvConfig, Policy, TopologySource};
use crate::net::{argmax, Checkpoint, DenseNetwork};
use crate::oracle::{play_episodes, NormalizationBounds};
use crate::rng;
use crate::topology::TopologySnapshot;

/// A trained ensemble as seen by evaluation and checkpointing.
pub trait Learner {
    fn layout(&self) -> &InputLayout;

    /// One network per agent, or a single shared one, mapping agent inputs
    /// to action scores.
    fn policy_networks(&self) -> &[DenseNetwork<f32>];

    /// Every trainable network, named for checkpoints.
    fn networks(&self) -> Vec<(String, &DenseNetwork<f32>)>;

    fn greedy(&self, obs: &Observation, actions: &mut Vec<usize>) -> Result<()>;
}

/// Noise-free joint policy over an immutable copy of the policy networks.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    layout: InputLayout,
    nets: Vec<DenseNetwork<f32>>,
    scratch: Vec<f64>,
    obs: Observation,
    input: Vec<f32>,
}

impl GreedyPolicy {
    pub fn new(layout: InputLayout, nets: Vec<DenseNetwork<f32>>) -> Result<Self> {
        if nets.len() != layout.num_networks() {
            return Err(Error::Shape { expected: layout.num_networks(), got: nets.len() });
        }
        for n in &nets {
            if n.input_dim() != layout.agent_dim() {
                return Err(Error::Shape { expected: layout.agent_dim(), got: n.input_dim() });
            }
            if n.output_dim() != layout.num_actions {
                return Err(Error::Shape { expected: layout.num_actions, got: n.output_dim() });
            }
        }
        Ok(GreedyPolicy { layout, nets, scratch: Vec::new(), obs: Observation::default(), input: Vec::new() })
    }

    pub fn from_learner(learner: &dyn Learner) -> Self {
        GreedyPolicy::new(*learner.layout(), learner.policy_networks().to_vec()).expect("learner networks match their layout")
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint<f32>, layout: InputLayout) -> Result<Self> {
        let nets = (0..layout.num_networks())
            .map(|k| {
                checkpoint
                    .get(&format!("policy_{k}"))
                    .cloned()
                    .ok_or_else(|| Error::Checkpoint(format!("missing network policy_{k}")))
            })
            .collect::<Result<Vec<_>>>()?;
        GreedyPolicy::new(layout, nets)
    }
}

impl Policy for GreedyPolicy {
    fn act(&mut self, env: &Env, actions: &mut Vec<Action>) {
        self.layout.observe(env, &mut self.scratch, &mut self.obs);
        let levels = env.powers().num_levels();
        actions.clear();
        for i in 0..self.layout.num_agents {
            self.input.clear();
            self.layout.push_agent_input(&self.obs.local, &self.obs.state, i, &mut self.input);
            let q = self.nets[self.layout.network_of(i)].forward(&self.input).expect("input width checked at construction");
            actions.push(Action::from_index(argmax(&q), levels));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub eval_index: usize,
    /// Training episodes completed before this evaluation.
    pub episode: usize,
    pub env_steps: usize,
    pub returns: Vec<f64>,
    pub mean_return: f64,
    pub normalized_return: f64,
    /// Mean training loss since the previous evaluation.
    pub train_loss: Option<f64>,
    pub epsilon: Option<f64>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub algorithm: Algorithm,
    pub hyper: Hyperparameters,
    pub env: EnvConfig,
    pub source: TopologySource,
    /// Topologies of one evaluation, one episode each.
    pub eval_topologies: Vec<TopologySnapshot>,
    pub bounds: NormalizationBounds,
    pub seed: u64,
    pub evaluations: usize,
}

pub struct TrainOutcome {
    pub records: Vec<EvalRecord>,
    pub learner: Box<dyn Learner>,
    pub env_steps: usize,
}

/// Episode counts after which evaluation `k` runs:
/// `ceil((k + 1) * budget / count)`.
pub fn eval_points(budget: usize, count: usize) -> Vec<usize> {
    (0..count).map(|k| ((k + 1) * budget).div_ceil(count)).collect()
}

pub fn evaluate_learner(learner: &dyn Learner, cfg: &EnvConfig, topologies: &[TopologySnapshot], seed: u64) -> Result<Vec<f64>> {
    play_episodes(cfg, topologies, &mut GreedyPolicy::from_learner(learner), seed)
}

enum Agent {
    Value(ValueLearner),
    ActorCritic(ActorCriticLearner),
}

impl Agent {
    fn as_learner(&self) -> &dyn Learner {
        match self {
            Agent::Value(v) => v,
            Agent::ActorCritic(a) => a,
        }
    }

    fn into_learner(self) -> Box<dyn Learner> {
        match self {
            Agent::Value(v) => Box::new(v),
            Agent::ActorCritic(a) => Box::new(a),
        }
    }
}

pub fn train(setup: &TrainSetup) -> Result<TrainOutcome> {
    train_with(setup, &mut |_| {})
}

/// Trains for the configured episode budget, evaluating the greedy policy
/// at evenly spaced points and reporting each record to `on_eval`.
pub fn train_with(setup: &TrainSetup, on_eval: &mut dyn FnMut(&EvalRecord)) -> Result<TrainOutcome> {
    let hp = &setup.hyper;
    hp.validate()?;
    if setup.eval_topologies.is_empty() {
        return Err(Error::Config("no evaluation topologies".into()));
    }
    if setup.evaluations == 0 {
        return Err(Error::Config("evaluations must be positive".into()));
    }
    let mut env = Env::new(setup.env.clone(), setup.source.clone(), setup.seed)?;
    let layout = InputLayout::from_env(&env, hp.parameter_sharing);
    let learner_seed = rng::mix(setup.seed, rng::stream::LEARNER);
    let mut agent = if setup.algorithm.is_value_based() {
        Agent::Value(ValueLearner::new(setup.algorithm, hp.clone(), layout, learner_seed)?)
    } else {
        Agent::ActorCritic(ActorCriticLearner::new(setup.algorithm, hp.clone(), layout, learner_seed)?)
    };
    let schedule = ExplorationSchedule { start: hp.epsilon_start, end: hp.epsilon_end, anneal_episodes: hp.anneal_episodes };
    let eval_seed = rng::mix(setup.seed, rng::stream::EVAL);
    let points = eval_points(hp.episodes, setup.evaluations);
    let levels = env.powers().num_levels();
    let start = Instant::now();

    let mut records = Vec::with_capacity(setup.evaluations);
    let (mut scratch, mut obs, mut next) = (Vec::new(), Observation::default(), Observation::default());
    let (mut acts, mut log_probs, mut env_actions) = (Vec::new(), Vec::new(), Vec::new());
    let (mut loss_sum, mut loss_n, mut env_steps) = (0.0f64, 0usize, 0usize);

    for episode in 0..hp.episodes {
        if episode > 0 {
            env.reset()?;
        }
        let eps = schedule.epsilon(episode);
        layout.observe(&env, &mut scratch, &mut obs);
        loop {
            match &mut agent {
                Agent::Value(v) => v.act(&obs, eps, &mut acts)?,
                Agent::ActorCritic(a) => a.act(&obs, &mut acts, &mut log_probs)?,
            }
            env_actions.clear();
            env_actions.extend(acts.iter().map(|&a| Action::from_index(a, levels)));
            let out = env.step(&env_actions)?;
            env_steps += 1;
            layout.observe(&env, &mut scratch, &mut next);
            let loss = match &mut agent {
                Agent::Value(v) => {
                    v.observe(&obs, &acts, out.reward, &next, out.done);
                    v.update()?
                }
                Agent::ActorCritic(a) => {
                    a.observe(obs.clone(), acts.clone(), log_probs.clone(), out.reward, out.done);
                    if a.ready() {
                        Some(a.update(&next)?)
                    } else {
                        None
                    }
                }
            };
            if let Some(l) = loss {
                if !l.is_finite() || !agent.as_learner().networks().iter().all(|(_, n)| n.all_finite()) {
                    return Err(Error::NonFinite { algorithm: setup.algorithm.to_string(), episode, loss: l as f64 });
                }
                loss_sum += l as f64;
                loss_n += 1;
            }
            std::mem::swap(&mut obs, &mut next);
            if out.done {
                break;
            }
        }
        while records.len() < points.len() && points[records.len()] == episode + 1 {
            let returns = evaluate_learner(agent.as_learner(), &setup.env, &setup.eval_topologies, eval_seed)?;
            let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
            let record = EvalRecord {
                eval_index: records.len(),
                episode: episode + 1,
                env_steps,
                normalized_return: setup.bounds.normalize(mean_return)?,
                mean_return,
                returns,
                train_loss: (loss_n > 0).then(|| loss_sum / loss_n as f64),
                epsilon: matches!(agent, Agent::Value(_)).then_some(eps),
                elapsed_s: start.elapsed().as_secs_f64(),
            };
            on_eval(&record);
            records.push(record);
            loss_sum = 0.0;
            loss_n = 0;
        }
    }
    Ok(TrainOutcome { records, learner: agent.into_learner(), env_steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_points_for_any_budget() {
        for budget in [1, 7, 99, 100, 101, 10_000] {
            let p = eval_points(budget, 100);
            assert_eq!(p.len(), 100);
            assert_eq!(*p.last().unwrap(), budget);
            assert!(p.windows(2).all(|w| w[0] <= w[1]));
            assert!(p[0] >= 1);
        }
        assert_eq!(eval_points(1000, 100)[..3], [10, 20, 30]);
    }
}
