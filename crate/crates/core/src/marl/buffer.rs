use rand::Rng as _;

use super::inputs::Observation;
use crate::rng::Rng;

/// Fixed-capacity ring of joint transitions stored in flat arrays.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    len: usize,
    head: usize,
    num_agents: usize,
    local_dim: usize,
    state_dim: usize,
    local: Vec<f32>,
    next_local: Vec<f32>,
    state: Vec<f32>,
    next_state: Vec<f32>,
    actions: Vec<u16>,
    rewards: Vec<f32>,
    dones: Vec<bool>,
}

impl ReplayBuffer {
    /// `local_dim` is the width of the concatenated local rows, zero when
    /// agents act on the global state.
    pub fn new(capacity: usize, num_agents: usize, local_dim: usize, state_dim: usize) -> Self {
        ReplayBuffer {
            capacity,
            len: 0,
            head: 0,
            num_agents,
            local_dim,
            state_dim,
            local: vec![0.0; capacity * local_dim],
            next_local: vec![0.0; capacity * local_dim],
            state: vec![0.0; capacity * state_dim],
            next_state: vec![0.0; capacity * state_dim],
            actions: vec![0; capacity * num_agents],
            rewards: vec![0.0; capacity],
            dones: vec![false; capacity],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, obs: &Observation, actions: &[usize], reward: f64, next: &Observation, done: bool) {
        let i = self.head;
        let (l, s, a) = (self.local_dim, self.state_dim, self.num_agents);
        self.local[i * l..(i + 1) * l].copy_from_slice(&obs.local);
        self.next_local[i * l..(i + 1) * l].copy_from_slice(&next.local);
        self.state[i * s..(i + 1) * s].copy_from_slice(&obs.state);
        self.next_state[i * s..(i + 1) * s].copy_from_slice(&next.state);
        for (dst, &src) in self.actions[i * a..(i + 1) * a].iter_mut().zip(actions) {
            *dst = src as u16;
        }
        self.rewards[i] = reward as f32;
        self.dones[i] = done;
        self.head = (self.head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    /// Uniform indices with replacement, or `None` until `batch`
    /// transitions are stored.
    pub fn sample(&self, batch: usize, rng: &mut Rng) -> Option<Vec<usize>> {
        (self.len >= batch && batch > 0).then(|| (0..batch).map(|_| rng.random_range(0..self.len)).collect())
    }

    pub fn local(&self, i: usize) -> &[f32] {
        &self.local[i * self.local_dim..(i + 1) * self.local_dim]
    }

    pub fn next_local(&self, i: usize) -> &[f32] {
        &self.next_local[i * self.local_dim..(i + 1) * self.local_dim]
    }

    pub fn state(&self, i: usize) -> &[f32] {
        &self.state[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn next_state(&self, i: usize) -> &[f32] {
        &self.next_state[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn action(&self, i: usize, agent: usize) -> usize {
        self.actions[i * self.num_agents + agent] as usize
    }

    pub fn reward(&self, i: usize) -> f32 {
        self.rewards[i]
    }

    pub fn done(&self, i: usize) -> bool {
        self.dones[i]
    }
}

/// On-policy trajectory segment, cleared after every update.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub obs: Vec<Observation>,
    pub actions: Vec<Vec<usize>>,
    pub log_probs: Vec<Vec<f32>>,
    pub rewards: Vec<f32>,
    pub dones: Vec<bool>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: Observation, actions: Vec<usize>, log_probs: Vec<f32>, reward: f64, done: bool) {
        self.obs.push(obs);
        self.actions.push(actions);
        self.log_probs.push(log_probs);
        self.rewards.push(reward as f32);
        self.dones.push(done);
    }

    pub fn clear(&mut self) {
        self.obs.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.dones.clear();
    }

    /// Discounted returns bootstrapped from `last_value`, cut at episode
    /// ends.
    pub fn returns(&self, gamma: f32, last_value: f32) -> Vec<f32> {
        let mut out = vec![0.0; self.len()];
        let mut acc = last_value;
        for t in (0..self.len()).rev() {
            if self.dones[t] {
                acc = 0.0;
            }
            acc = self.rewards[t] + gamma * acc;
            out[t] = acc;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn obs(v: f32) -> Observation {
        Observation { local: vec![v; 2], state: vec![v; 3] }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3, 2, 2, 3);
        for k in 0..5 {
            b.push(&obs(k as f32), &[k, k + 1], k as f64, &obs(k as f32 + 0.5), k % 2 == 0);
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f32> = (0..3).map(|i| b.reward(i)).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 2.0]);
        assert_eq!(b.action(0, 1), 4);
        assert_eq!(b.next_state(1), &[4.5; 3]);
        assert!(b.done(1) && !b.done(0));
    }

    #[test]
    fn sampling_waits_for_batch() {
        let mut b = ReplayBuffer::new(10, 1, 0, 1);
        let mut r = rng::seeded(0, 0);
        let o = Observation { local: vec![], state: vec![0.0] };
        for _ in 0..3 {
            assert!(b.sample(4, &mut r).is_none());
            b.push(&o, &[0], 0.0, &o, false);
        }
        b.push(&o, &[0], 0.0, &o, false);
        assert!(b.sample(4, &mut r).unwrap().iter().all(|&i| i < 4));
    }

    #[test]
    fn returns_cut_at_episode_end() {
        let mut b = RolloutBuffer::default();
        for (r, d) in [(1.0, false), (2.0, true), (3.0, false)] {
            b.push(Observation::default(), vec![0], vec![0.0], r, d);
        }
        let g = b.returns(0.5, 10.0);
        assert_eq!(g, vec![1.0 + 0.5 * 2.0, 2.0, 3.0 + 5.0]);
    }
}
