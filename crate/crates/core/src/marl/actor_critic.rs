use rand::seq::SliceRandom;
use rand::Rng as _;

use super::buffer::RolloutBuffer;
use super::inputs::{InputLayout, Observation};
use super::train::Learner;
use super::{Algorithm, Hyperparameters};
use crate::error::{Error, Result};
use crate::net::{argmax, clip_grad_norm, log_softmax, soft_update, Adam, DenseNetwork, ForwardCache};
use crate::rng::{self, Rng};

/// Gradient of the clipped surrogate `min(r A, clip(r) A)` with respect to
/// the log-probability: zero once the ratio has left the trust region in
/// the direction the advantage pushes it.
pub fn ppo_surrogate_grad(ratio: f32, advantage: f32, clip: f32) -> f32 {
    let outward = (advantage > 0.0 && ratio > 1.0 + clip) || (advantage < 0.0 && ratio < 1.0 - clip);
    if outward {
        0.0
    } else {
        ratio * advantage
    }
}

/// Softmax actors with state-value critics; A2C uses n-step returns and a
/// soft-updated target critic, PPO a clipped surrogate over several epochs.
pub struct ActorCriticLearner {
    algorithm: Algorithm,
    hp: Hyperparameters,
    layout: InputLayout,
    actors: Vec<DenseNetwork<f32>>,
    critics: Vec<DenseNetwork<f32>>,
    critic_targets: Vec<DenseNetwork<f32>>,
    actor_opts: Vec<Adam<f32>>,
    critic_opts: Vec<Adam<f32>>,
    actor_grads: Vec<Vec<f32>>,
    critic_grads: Vec<Vec<f32>>,
    rollout: RolloutBuffer,
    rng: Rng,
    updates: usize,
}

/// Per-agent inputs and targets of one rollout.
struct AgentBatch {
    actor_in: Vec<f32>,
    critic_in: Vec<f32>,
    returns: Vec<f32>,
    advantages: Vec<f32>,
}

impl ActorCriticLearner {
    pub fn new(algorithm: Algorithm, hp: Hyperparameters, layout: InputLayout, seed: u64) -> Result<Self> {
        if algorithm.is_value_based() {
            return Err(Error::Config(format!("{algorithm} is not an actor-critic algorithm")));
        }
        hp.validate()?;
        let mut r = rng::seeded(seed, rng::stream::LEARNER);
        let centralized = algorithm.is_centralized();
        let n = layout.num_networks();
        let actors: Vec<_> =
            (0..n).map(|_| DenseNetwork::new(&[layout.agent_dim(), hp.hidden, hp.hidden, layout.num_actions], &mut r)).collect();
        let critics: Vec<_> =
            (0..n).map(|_| DenseNetwork::new(&[layout.critic_dim(centralized), hp.hidden, hp.hidden, 1], &mut r)).collect();
        Ok(ActorCriticLearner {
            algorithm,
            actor_opts: actors.iter().map(|a| Adam::new(a.num_params(), hp.lr as f32)).collect(),
            critic_opts: critics.iter().map(|c| Adam::new(c.num_params(), hp.critic_lr as f32)).collect(),
            actor_grads: actors.iter().map(|a| vec![0.0; a.num_params()]).collect(),
            critic_grads: critics.iter().map(|c| vec![0.0; c.num_params()]).collect(),
            critic_targets: critics.clone(),
            actors,
            critics,
            rollout: RolloutBuffer::default(),
            rng: r,
            updates: 0,
            hp,
            layout,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn rollout(&self) -> &RolloutBuffer {
        &self.rollout
    }

    fn centralized(&self) -> bool {
        self.algorithm.is_centralized()
    }

    pub fn logits(&self, obs: &Observation, agent: usize) -> Result<Vec<f32>> {
        let mut x = Vec::with_capacity(self.layout.agent_dim());
        self.layout.push_agent_input(&obs.local, &obs.state, agent, &mut x);
        self.actors[self.layout.network_of(agent)].forward(&x)
    }

    /// Samples every agent's action and records its log-probability.
    pub fn act(&mut self, obs: &Observation, actions: &mut Vec<usize>, log_probs: &mut Vec<f32>) -> Result<()> {
        actions.clear();
        log_probs.clear();
        for i in 0..self.layout.num_agents {
            let lp = log_softmax(&self.logits(obs, i)?);
            let u: f32 = self.rng.random();
            let mut acc = 0.0;
            let mut a = lp.len() - 1;
            for (k, &l) in lp.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    a = k;
                    break;
                }
            }
            actions.push(a);
            log_probs.push(lp[a]);
        }
        Ok(())
    }

    pub fn observe(&mut self, obs: Observation, actions: Vec<usize>, log_probs: Vec<f32>, reward: f64, done: bool) {
        self.rollout.push(obs, actions, log_probs, reward, done);
    }

    pub fn ready(&self) -> bool {
        self.rollout.len() >= self.hp.batch_size
    }

    /// Consumes the rollout; `next` is the observation after its last step.
    pub fn update(&mut self, next: &Observation) -> Result<f32> {
        let loss = if self.algorithm.is_ppo() { self.ppo_update(next)? } else { self.a2c_update(next)? };
        self.rollout.clear();
        self.updates += 1;
        Ok(loss)
    }

    fn agent_batch(&self, agent: usize, next: &Observation, use_target: bool) -> Result<AgentBatch> {
        let k = self.layout.network_of(agent);
        let c = self.centralized();
        let mut actor_in = Vec::new();
        let mut critic_in = Vec::new();
        for o in &self.rollout.obs {
            self.layout.push_agent_input(&o.local, &o.state, agent, &mut actor_in);
            self.layout.push_critic_input(&o.local, &o.state, agent, c, &mut critic_in);
        }
        let mut boot_in = Vec::new();
        self.layout.push_critic_input(&next.local, &next.state, agent, c, &mut boot_in);
        let boot_net = if use_target { &self.critic_targets[k] } else { &self.critics[k] };
        let boot = boot_net.forward(&boot_in)?[0];
        let returns = self.rollout.returns(self.hp.gamma as f32, boot);
        let mut cache = ForwardCache::new();
        self.critics[k].forward_batch(&critic_in, self.rollout.len(), &mut cache)?;
        let advantages = returns.iter().zip(cache.output()).map(|(r, v)| r - v).collect();
        Ok(AgentBatch { actor_in, critic_in, returns, advantages })
    }

    /// Accumulates actor and critic gradients for the rows `rows` of one
    /// agent's batch; `ppo` switches on the clipped surrogate.
    fn accumulate(&mut self, agent: usize, batch: &AgentBatch, rows: &[usize], ppo: bool, denom: f32) -> Result<f32> {
        let k = self.layout.network_of(agent);
        let (da, dc, na) = (self.layout.agent_dim(), self.layout.critic_dim(self.centralized()), self.layout.num_actions);
        let xa: Vec<f32> = rows.iter().flat_map(|&t| batch.actor_in[t * da..(t + 1) * da].iter().copied()).collect();
        let xc: Vec<f32> = rows.iter().flat_map(|&t| batch.critic_in[t * dc..(t + 1) * dc].iter().copied()).collect();
        let m = rows.len();
        let mut ca = ForwardCache::new();
        let mut cc = ForwardCache::new();
        self.actors[k].forward_batch(&xa, m, &mut ca)?;
        self.critics[k].forward_batch(&xc, m, &mut cc)?;
        let clip = self.hp.clip_ratio as f32;
        let ent = self.hp.entropy_coef as f32;
        let mut g_actor = vec![0.0f32; m * na];
        let mut g_critic = vec![0.0f32; m];
        let mut loss = 0.0;
        for (b, &t) in rows.iter().enumerate() {
            let lp = log_softmax(ca.row(b));
            let a = self.rollout.actions[t][agent];
            let adv = batch.advantages[t];
            let coef = if ppo {
                let ratio = (lp[a] - self.rollout.log_probs[t][agent]).exp();
                ppo_surrogate_grad(ratio, adv, clip)
            } else {
                adv
            };
            let entropy: f32 = -lp.iter().map(|&l| l.exp() * l).sum::<f32>();
            for (j, &l) in lp.iter().enumerate() {
                let p = l.exp();
                let onehot = if j == a { 1.0 } else { 0.0 };
                g_actor[b * na + j] = (-coef * (onehot - p) + ent * p * (l + entropy)) / denom;
            }
            let err = batch.returns[t] - cc.row(b)[0];
            g_critic[b] = -2.0 * err / denom;
            loss += err * err / denom;
        }
        self.actors[k].backward(&ca, &g_actor, &mut self.actor_grads[k], None)?;
        self.critics[k].backward(&cc, &g_critic, &mut self.critic_grads[k], None)?;
        Ok(loss)
    }

    fn step(&mut self) {
        let clip = self.hp.grad_clip as f32;
        let nets = self.actors.iter_mut().zip(&mut self.actor_opts).zip(&mut self.actor_grads);
        let critics = self.critics.iter_mut().zip(&mut self.critic_opts).zip(&mut self.critic_grads);
        for ((net, opt), g) in nets.chain(critics) {
            clip_grad_norm(g, clip);
            opt.step(net.params_mut(), g);
            g.fill(0.0);
        }
    }

    fn per_network(&self) -> f32 {
        (self.layout.num_agents / self.layout.num_networks()) as f32
    }

    fn a2c_update(&mut self, next: &Observation) -> Result<f32> {
        let n = self.layout.num_agents;
        let t_len = self.rollout.len();
        let rows: Vec<usize> = (0..t_len).collect();
        let denom = t_len as f32 * self.per_network();
        let batches = (0..n).map(|i| self.agent_batch(i, next, true)).collect::<Result<Vec<_>>>()?;
        let mut loss = 0.0;
        for (i, b) in batches.iter().enumerate() {
            loss += self.accumulate(i, b, &rows, false, denom)?;
        }
        self.step();
        let tau = self.hp.tau as f32;
        for (t, c) in self.critic_targets.iter_mut().zip(&self.critics) {
            soft_update(t, c, tau)?;
        }
        Ok(loss / self.layout.num_networks() as f32)
    }

    fn ppo_update(&mut self, next: &Observation) -> Result<f32> {
        let n = self.layout.num_agents;
        let t_len = self.rollout.len();
        let mut batches = (0..n).map(|i| self.agent_batch(i, next, false)).collect::<Result<Vec<_>>>()?;
        let all: Vec<f32> = batches.iter().flat_map(|b| b.advantages.iter().copied()).collect();
        let mean = all.iter().sum::<f32>() / all.len() as f32;
        let std = (all.iter().map(|a| (a - mean).powi(2)).sum::<f32>() / all.len() as f32).sqrt();
        for b in &mut batches {
            b.advantages.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
        }
        let mb = t_len.div_ceil(self.hp.minibatches);
        let mut order: Vec<usize> = (0..t_len).collect();
        let mut loss = 0.0;
        for _ in 0..self.hp.ppo_epochs {
            order.shuffle(&mut self.rng);
            loss = 0.0;
            for rows in order.chunks(mb) {
                let denom = rows.len() as f32 * self.per_network();
                for (i, b) in batches.iter().enumerate() {
                    loss += self.accumulate(i, b, rows, true, denom)?;
                }
                self.step();
            }
        }
        Ok(loss / (self.hp.minibatches * self.layout.num_networks()) as f32)
    }
}

impl Learner for ActorCriticLearner {
    fn layout(&self) -> &InputLayout {
        &self.layout
    }

    fn policy_networks(&self) -> &[DenseNetwork<f32>] {
        &self.actors
    }

    fn networks(&self) -> Vec<(String, &DenseNetwork<f32>)> {
        let actors = self.actors.iter().enumerate().map(|(k, n)| (format!("policy_{k}"), n));
        let critics = self.critics.iter().enumerate().map(|(k, n)| (format!("critic_{k}"), n));
        actors.chain(critics).collect()
    }

    fn greedy(&self, obs: &Observation, actions: &mut Vec<usize>) -> Result<()> {
        actions.clear();
        for i in 0..self.layout.num_agents {
            actions.push(argmax(&self.logits(obs, i)?));
        }
        Ok(())
    }
}
