use super::buffer::ReplayBuffer;
use super::explore::epsilon_greedy;
use super::inputs::{InputLayout, Observation};
use super::mixer::{Mixer, QmixMixer, VdnMixer};
use super::train::Learner;
use super::{Algorithm, Hyperparameters};
use crate::error::{Error, Result};
use crate::net::{argmax, clip_grad_norm, soft_update, Adam, DenseNetwork, ForwardCache};
use crate::rng::{self, Rng};

/// Q-networks with optional target copies and mixer, trained from a joint
/// replay buffer.
pub struct ValueLearner {
    algorithm: Algorithm,
    hp: Hyperparameters,
    layout: InputLayout,
    online: Vec<DenseNetwork<f32>>,
    target: Vec<DenseNetwork<f32>>,
    opts: Vec<Adam<f32>>,
    grads: Vec<Vec<f32>>,
    mixer: Option<Box<dyn Mixer>>,
    replay: ReplayBuffer,
    rng: Rng,
    caches: Vec<ForwardCache<f32>>,
    target_cache: ForwardCache<f32>,
    input: Vec<f32>,
    next_input: Vec<f32>,
}

impl ValueLearner {
    pub fn new(algorithm: Algorithm, hp: Hyperparameters, layout: InputLayout, seed: u64) -> Result<Self> {
        if !algorithm.is_value_based() {
            return Err(Error::Config(format!("{algorithm} is not a value-based algorithm")));
        }
        hp.validate()?;
        let mut r = rng::seeded(seed, rng::stream::LEARNER);
        let sizes = [layout.agent_dim(), hp.hidden, hp.hidden, layout.num_actions];
        let online: Vec<DenseNetwork<f32>> = (0..layout.num_networks()).map(|_| DenseNetwork::new(&sizes, &mut r)).collect();
        let mixer: Option<Box<dyn Mixer>> = match algorithm {
            Algorithm::Vdn => Some(Box::new(VdnMixer { num_agents: layout.num_agents })),
            Algorithm::Qmix => {
                Some(Box::new(QmixMixer::new(layout.num_agents, layout.state_dim, hp.mixer_embed, hp.mixer_lr as f32, &mut r)))
            }
            _ => None,
        };
        let local_dim = if layout.local { layout.num_agents * layout.obs_dim } else { 0 };
        Ok(ValueLearner {
            algorithm,
            target: online.clone(),
            opts: online.iter().map(|n| Adam::new(n.num_params(), hp.lr as f32)).collect(),
            grads: online.iter().map(|n| vec![0.0; n.num_params()]).collect(),
            online,
            mixer,
            replay: ReplayBuffer::new(hp.replay_capacity, layout.num_agents, local_dim, layout.state_dim),
            rng: r,
            caches: (0..layout.num_agents).map(|_| ForwardCache::new()).collect(),
            target_cache: ForwardCache::new(),
            input: Vec::new(),
            next_input: Vec::new(),
            hp,
            layout,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn q_values(&self, obs: &Observation, agent: usize) -> Result<Vec<f32>> {
        let mut x = Vec::with_capacity(self.layout.agent_dim());
        self.layout.push_agent_input(&obs.local, &obs.state, agent, &mut x);
        self.online[self.layout.network_of(agent)].forward(&x)
    }

    /// Per-agent epsilon-greedy actions.
    pub fn act(&mut self, obs: &Observation, eps: f64, actions: &mut Vec<usize>) -> Result<()> {
        actions.clear();
        for i in 0..self.layout.num_agents {
            let q = self.q_values(obs, i)?;
            actions.push(epsilon_greedy(&q, eps, &mut self.rng));
        }
        Ok(())
    }

    pub fn observe(&mut self, obs: &Observation, actions: &[usize], reward: f64, next: &Observation, done: bool) {
        self.replay.push(obs, actions, reward, next, done);
    }

    /// One gradient step once the warm-up is over; returns the TD loss.
    pub fn update(&mut self) -> Result<Option<f32>> {
        if self.replay.len() < self.hp.warmup.max(self.hp.batch_size) {
            return Ok(None);
        }
        let loss = self.accumulate_grads()?;
        self.apply_grads()?;
        Ok(Some(loss))
    }

    fn targets_net(&self, k: usize) -> &DenseNetwork<f32> {
        if self.hp.tau > 0.0 {
            &self.target[k]
        } else {
            &self.online[k]
        }
    }

    fn fill_inputs(&mut self, idx: &[usize], agent: usize) {
        self.input.clear();
        self.next_input.clear();
        for &j in idx {
            let r = &self.replay;
            self.layout.push_agent_input(r.local(j), r.state(j), agent, &mut self.input);
            self.layout.push_agent_input(r.next_local(j), r.next_state(j), agent, &mut self.next_input);
        }
    }

    /// Maximum target-network value for every sampled next observation.
    fn next_max(&mut self, k: usize, batch: usize) -> Result<Vec<f32>> {
        let mut cache = std::mem::take(&mut self.target_cache);
        self.targets_net(k).forward_batch(&self.next_input, batch, &mut cache)?;
        let out = (0..batch).map(|b| cache.row(b).iter().copied().fold(f32::NEG_INFINITY, f32::max)).collect();
        self.target_cache = cache;
        Ok(out)
    }

    fn accumulate_grads(&mut self) -> Result<f32> {
        match self.mixer.is_some() {
            true => self.joint_grads(),
            false => self.independent_grads(),
        }
    }

    fn independent_grads(&mut self) -> Result<f32> {
        let (b_n, a_n) = (self.hp.batch_size, self.layout.num_actions);
        let gamma = self.hp.gamma as f32;
        let (alpha, beta) = (self.hp.hysteretic_alpha as f32, self.hp.hysteretic_beta as f32);
        let mut loss = 0.0;
        for agent in 0..self.layout.num_agents {
            let idx = self.replay.sample(b_n, &mut self.rng).ok_or(Error::EmptyDataset)?;
            let k = self.layout.network_of(agent);
            self.fill_inputs(&idx, agent);
            let next = self.next_max(k, b_n)?;
            let cache = &mut self.caches[agent];
            self.online[k].forward_batch(&self.input, b_n, cache)?;
            let mut g = vec![0.0f32; b_n * a_n];
            for (b, &j) in idx.iter().enumerate() {
                let a = self.replay.action(j, agent);
                let cont = if self.replay.done(j) { 0.0 } else { 1.0 };
                let y = self.replay.reward(j) + gamma * cont * next[b];
                let td = y - cache.row(b)[a];
                let w = if td >= 0.0 { alpha } else { beta };
                g[b * a_n + a] = -2.0 * td * w / b_n as f32;
                loss += td * td / b_n as f32;
            }
            self.online[k].backward(cache, &g, &mut self.grads[k], None)?;
        }
        Ok(loss / self.layout.num_agents as f32)
    }

    fn joint_grads(&mut self) -> Result<f32> {
        let (b_n, a_n, n) = (self.hp.batch_size, self.layout.num_actions, self.layout.num_agents);
        let gamma = self.hp.gamma as f32;
        let idx = self.replay.sample(b_n, &mut self.rng).ok_or(Error::EmptyDataset)?;
        let mut qs = vec![0.0f32; b_n * n];
        let mut q_next = vec![0.0f32; b_n * n];
        for agent in 0..n {
            let k = self.layout.network_of(agent);
            self.fill_inputs(&idx, agent);
            let next = self.next_max(k, b_n)?;
            let cache = &mut self.caches[agent];
            self.online[k].forward_batch(&self.input, b_n, cache)?;
            for (b, &j) in idx.iter().enumerate() {
                qs[b * n + agent] = cache.row(b)[self.replay.action(j, agent)];
                q_next[b * n + agent] = next[b];
            }
        }
        let states: Vec<f32> = idx.iter().flat_map(|&j| self.replay.state(j).iter().copied()).collect();
        let next_states: Vec<f32> = idx.iter().flat_map(|&j| self.replay.next_state(j).iter().copied()).collect();
        let mixer = self.mixer.as_mut().expect("joint update requires a mixer");
        let q_tot = mixer.forward(&qs, &states, b_n, false)?;
        let next_tot = mixer.forward(&q_next, &next_states, b_n, self.hp.tau > 0.0)?;
        let mut loss = 0.0;
        let g_tot: Vec<f32> = idx
            .iter()
            .enumerate()
            .map(|(b, &j)| {
                let cont = if self.replay.done(j) { 0.0 } else { 1.0 };
                let td = self.replay.reward(j) + gamma * cont * next_tot[b] - q_tot[b];
                loss += td * td / b_n as f32;
                -2.0 * td / b_n as f32
            })
            .collect();
        let mut dq = vec![0.0f32; b_n * n];
        mixer.backward(&qs, &states, b_n, &g_tot, &mut dq)?;
        for agent in 0..n {
            let k = self.layout.network_of(agent);
            let mut g = vec![0.0f32; b_n * a_n];
            for (b, &j) in idx.iter().enumerate() {
                g[b * a_n + self.replay.action(j, agent)] = dq[b * n + agent];
            }
            self.online[k].backward(&self.caches[agent], &g, &mut self.grads[k], None)?;
        }
        Ok(loss)
    }

    fn apply_grads(&mut self) -> Result<()> {
        let clip = self.hp.grad_clip as f32;
        for ((net, opt), g) in self.online.iter_mut().zip(&mut self.opts).zip(&mut self.grads) {
            clip_grad_norm(g, clip);
            opt.step(net.params_mut(), g);
            g.fill(0.0);
        }
        if let Some(m) = self.mixer.as_mut() {
            m.apply_grads(clip);
        }
        if self.hp.tau > 0.0 {
            let tau = self.hp.tau as f32;
            for (t, o) in self.target.iter_mut().zip(&self.online) {
                soft_update(t, o, tau)?;
            }
            if let Some(m) = self.mixer.as_mut() {
                m.soft_update(tau)?;
            }
        }
        Ok(())
    }
}

impl Learner for ValueLearner {
    fn layout(&self) -> &InputLayout {
        &self.layout
    }

    fn policy_networks(&self) -> &[DenseNetwork<f32>] {
        &self.online
    }

    fn networks(&self) -> Vec<(String, &DenseNetwork<f32>)> {
        let mut out: Vec<(String, &DenseNetwork<f32>)> =
            self.online.iter().enumerate().map(|(k, n)| (format!("policy_{k}"), n)).collect();
        if let Some(m) = &self.mixer {
            out.extend(m.networks());
        }
        out
    }

    fn greedy(&self, obs: &Observation, actions: &mut Vec<usize>) -> Result<()> {
        actions.clear();
        for i in 0..self.layout.num_agents {
            actions.push(argmax(&self.q_values(obs, i)?));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Task;

    fn layout(n: usize) -> InputLayout {
        InputLayout { num_agents: n, num_actions: 3, obs_dim: 4, state_dim: 4, local: false, share: false }
    }

    fn hp(algorithm: Algorithm) -> Hyperparameters {
        Hyperparameters {
            hidden: 16,
            batch_size: 8,
            warmup: 8,
            replay_capacity: 64,
            lr: 1e-3,
            ..Hyperparameters::defaults(algorithm, Task::Nfig)
        }
    }

    fn obs(v: f32) -> Observation {
        Observation { local: vec![], state: vec![v, 1.0 - v, 0.5, -v] }
    }

    fn fill(l: &mut ValueLearner, reward: f64) {
        for k in 0..16 {
            let acts: Vec<usize> = (0..l.layout.num_agents).map(|i| (k + i) % 3).collect();
            l.observe(&obs(k as f32 / 16.0), &acts, reward, &obs(0.0), true);
        }
    }

    #[test]
    fn single_transition_overfits() {
        let mut l = ValueLearner::new(Algorithm::Idqn, hp(Algorithm::Idqn), layout(1), 3).unwrap();
        for _ in 0..8 {
            l.observe(&obs(0.3), &[2], 1.5, &obs(0.9), true);
        }
        let mut last = f32::INFINITY;
        for _ in 0..500 {
            last = l.update().unwrap().unwrap();
        }
        assert!(last < 1e-4, "td loss {last}");
        assert!((l.q_values(&obs(0.3), 0).unwrap()[2] - 1.5).abs() < 1e-2);
    }

    #[test]
    fn hysteretic_beta_one_is_idqn() {
        let mut h = hp(Algorithm::HysIdqn);
        h.hysteretic_beta = 1.0;
        let mut a = ValueLearner::new(Algorithm::Idqn, hp(Algorithm::Idqn), layout(2), 9).unwrap();
        let mut b = ValueLearner::new(Algorithm::HysIdqn, h, layout(2), 9).unwrap();
        fill(&mut a, 0.7);
        fill(&mut b, 0.7);
        for _ in 0..20 {
            assert_eq!(a.update().unwrap(), b.update().unwrap());
        }
        assert_eq!(a.online, b.online);
    }

    #[test]
    fn hysteretic_scales_negative_td() {
        let make = |alg| {
            let mut l = ValueLearner::new(alg, hp(alg), layout(1), 4).unwrap();
            fill(&mut l, -50.0);
            l.accumulate_grads().unwrap();
            l.grads[0].clone()
        };
        let (plain, hys) = (make(Algorithm::Idqn), make(Algorithm::HysIdqn));
        for (p, h) in plain.iter().zip(&hys) {
            assert!((h - 0.2 * p).abs() <= 1e-6 * (1.0 + p.abs()));
        }
        let make_pos = |alg| {
            let mut l = ValueLearner::new(alg, hp(alg), layout(1), 4).unwrap();
            fill(&mut l, 50.0);
            l.accumulate_grads().unwrap();
            l.grads[0].clone()
        };
        assert_eq!(make_pos(Algorithm::Idqn), make_pos(Algorithm::HysIdqn));
    }

    #[test]
    fn vdn_with_one_agent_is_idqn() {
        let mut a = ValueLearner::new(Algorithm::Idqn, hp(Algorithm::Idqn), layout(1), 5).unwrap();
        let mut b = ValueLearner::new(Algorithm::Vdn, hp(Algorithm::Vdn), layout(1), 5).unwrap();
        fill(&mut a, 0.3);
        fill(&mut b, 0.3);
        for _ in 0..10 {
            assert_eq!(a.update().unwrap(), b.update().unwrap());
        }
        assert_eq!(a.online, b.online);
    }

    #[test]
    fn qmix_trains_to_finite_values() {
        let mut l = ValueLearner::new(Algorithm::Qmix, hp(Algorithm::Qmix), layout(3), 6).unwrap();
        fill(&mut l, 1.0);
        for _ in 0..50 {
            assert!(l.update().unwrap().unwrap().is_finite());
        }
        assert_eq!(l.networks().len(), 3 + 4);
        let mut acts = Vec::new();
        l.greedy(&obs(0.2), &mut acts).unwrap();
        assert_eq!(acts.len(), 3);
    }

    #[test]
    fn rejects_actor_critic_kinds() {
        assert!(ValueLearner::new(Algorithm::Ippo, hp(Algorithm::Idqn), layout(1), 0).is_err());
    }
}
