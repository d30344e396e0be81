use serde::{Deserialize, Serialize};

use crate::game::Env;

/// Encoded environment observation for one step: per-agent local views
/// (partially observable tasks only) and the global state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observation {
    /// `num_agents x obs_dim`, empty when agents observe the global state.
    pub local: Vec<f32>,
    pub state: Vec<f32>,
}

/// How network inputs are assembled from an [`Observation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    pub num_agents: usize,
    pub num_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    pub local: bool,
    /// One network for all agents, with a one-hot agent id appended.
    pub share: bool,
}

impl InputLayout {
    pub fn from_env(env: &Env, share: bool) -> Self {
        InputLayout {
            num_agents: env.num_agents(),
            num_actions: env.num_actions(),
            obs_dim: env.obs_dim(),
            state_dim: env.global_state_dim(),
            local: env.task().partially_observable(),
            share,
        }
    }

    fn id_dim(&self) -> usize {
        if self.share {
            self.num_agents
        } else {
            0
        }
    }

    pub fn agent_dim(&self) -> usize {
        self.obs_dim + self.id_dim()
    }

    pub fn critic_dim(&self, centralized: bool) -> usize {
        if centralized {
            self.state_dim + self.id_dim()
        } else {
            self.agent_dim()
        }
    }

    /// Number of distinct networks per role.
    pub fn num_networks(&self) -> usize {
        if self.share {
            1
        } else {
            self.num_agents
        }
    }

    pub fn network_of(&self, agent: usize) -> usize {
        if self.share {
            0
        } else {
            agent
        }
    }

    pub fn observe(&self, env: &Env, scratch: &mut Vec<f64>, out: &mut Observation) {
        env.global_state(scratch);
        out.state.clear();
        out.state.extend(scratch.iter().map(|&x| x as f32));
        out.local.clear();
        if self.local {
            for i in 0..self.num_agents {
                env.local_obs(i, scratch);
                out.local.extend(scratch.iter().map(|&x| x as f32));
            }
        }
    }

    fn push_id(&self, agent: usize, out: &mut Vec<f32>) {
        if self.share {
            out.extend((0..self.num_agents).map(|k| if k == agent { 1.0 } else { 0.0 }));
        }
    }

    /// Appends agent `agent`'s policy input given raw local rows and state.
    pub fn push_agent_input(&self, local: &[f32], state: &[f32], agent: usize, out: &mut Vec<f32>) {
        if self.local {
            out.extend_from_slice(&local[agent * self.obs_dim..(agent + 1) * self.obs_dim]);
        } else {
            out.extend_from_slice(state);
        }
        self.push_id(agent, out);
    }

    pub fn push_critic_input(&self, local: &[f32], state: &[f32], agent: usize, centralized: bool, out: &mut Vec<f32>) {
        if centralized {
            out.extend_from_slice(state);
            self.push_id(agent, out);
        } else {
            self.push_agent_input(local, state, agent, out);
        }
    }
}
