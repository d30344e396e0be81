use rand::Rng as _;

use crate::net::argmax;
use crate::rng::Rng;

/// Linear decay of the exploration rate over episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_episodes: usize,
}

impl ExplorationSchedule {
    pub fn epsilon(&self, episode: usize) -> f64 {
        if episode >= self.anneal_episodes {
            return self.end;
        }
        self.start + (self.end - self.start) * (episode as f64 / self.anneal_episodes as f64)
    }
}

/// Uniform action with probability `eps`, otherwise the lowest-index argmax.
pub fn epsilon_greedy(q: &[f32], eps: f64, rng: &mut Rng) -> usize {
    if eps > 0.0 && rng.random::<f64>() < eps {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}
