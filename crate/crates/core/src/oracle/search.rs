use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::game::{link_rates_into, scaled_reward, Action, LinkRates, Powers, RewardWeights};

/// Largest agent count for which the joint action space is enumerated.
pub const ENUMERATION_GUARD: usize = 4;

/// What a search maximizes for a fixed channel realization.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// One-shot common reward.
    Nfig(RewardWeights),
    /// Queue-aware step reward given the queue at the start of the interval.
    Sig { weights: RewardWeights, queue: Vec<f64> },
    /// Sum of V2V rates in bits/s.
    V2vThroughput,
}

/// Scores joint actions (as flat action indices) against one realization.
#[derive(Debug, Clone)]
pub struct JointEvaluator<'a> {
    g: &'a ChannelRealization<f64>,
    powers: &'a Powers<f64>,
    objective: Objective,
    rate_scale: f64,
    rates: LinkRates<f64>,
    actions: Vec<Action>,
}

impl<'a> JointEvaluator<'a> {
    pub fn new(g: &'a ChannelRealization<f64>, powers: &'a Powers<f64>, objective: Objective, rate_scale: f64) -> Self {
        JointEvaluator {
            g,
            powers,
            objective,
            rate_scale,
            rates: LinkRates { v2i: Vec::new(), v2v: Vec::new() },
            actions: Vec::with_capacity(g.num_v2v),
        }
    }

    pub fn num_agents(&self) -> usize {
        self.g.num_v2v
    }

    pub fn num_actions(&self) -> usize {
        self.powers.num_actions(self.g.num_v2i)
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn value(&mut self, joint: &[usize]) -> f64 {
        let n = self.powers.num_levels();
        self.actions.clear();
        self.actions.extend(joint.iter().map(|&a| Action::from_index(a, n)));
        link_rates_into(&self.actions, self.g, self.powers, &mut self.rates);
        match &self.objective {
            Objective::Nfig(w) => scaled_reward(&self.rates, None, w, self.rate_scale),
            Objective::Sig { weights, queue } => scaled_reward(&self.rates, Some(queue), weights, self.rate_scale),
            Objective::V2vThroughput => self.rates.v2v.iter().sum(),
        }
    }
}

/// Visits every joint action in lexicographic order, agent 0 most
/// significant.
pub fn for_each_joint(num_agents: usize, num_actions: usize, mut f: impl FnMut(&[usize])) {
    let mut joint = vec![0usize; num_agents];
    loop {
        f(&joint);
        let mut k = num_agents;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            joint[k] += 1;
            if joint[k] < num_actions {
                break;
            }
            joint[k] = 0;
        }
    }
}

pub fn check_guard(num_agents: usize, guard: usize) -> Result<()> {
    if num_agents > guard {
        return Err(Error::EnumerationGuard { agents: num_agents, guard });
    }
    Ok(())
}

/// Exact argmax over all joint actions; the first maximizer in
/// lexicographic order wins ties.
pub fn exhaustive_search(eval: &mut JointEvaluator<'_>, guard: usize) -> Result<(Vec<usize>, f64)> {
    check_guard(eval.num_agents(), guard)?;
    let mut best = (vec![0; eval.num_agents()], f64::NEG_INFINITY);
    let (l, k) = (eval.num_agents(), eval.num_actions());
    for_each_joint(l, k, |joint| {
        let v = eval.value(joint);
        if v > best.1 {
            best.0.copy_from_slice(joint);
            best.1 = v;
        }
    });
    Ok(best)
}

pub fn exhaustive_best_joint_action(
    g: &ChannelRealization<f64>,
    powers: &Powers<f64>,
    objective: Objective,
    rate_scale: f64,
) -> Result<(Vec<Action>, f64)> {
    let mut eval = JointEvaluator::new(g, powers, objective, rate_scale);
    let (joint, v) = exhaustive_search(&mut eval, ENUMERATION_GUARD)?;
    let n = powers.num_levels();
    Ok((joint.into_iter().map(|a| Action::from_index(a, n)).collect(), v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub joint: Vec<usize>,
    pub value: f64,
    /// Full passes over the agents, including the final pass without changes.
    pub sweeps: usize,
}

/// Iterative best response from the all-silent start: agents in index order
/// switch to their best action given the others, lowest index on ties, and
/// only when it strictly improves the objective.
pub fn greedy_search(eval: &mut JointEvaluator<'_>) -> GreedyResult {
    let l = eval.num_agents();
    let k = eval.num_actions();
    let silent = Action { subchannel: 0, power: eval.powers.num_levels() - 1 }.index(eval.powers.num_levels());
    let mut joint = vec![silent; l];
    let mut value = eval.value(&joint);
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut changed = false;
        for i in 0..l {
            let current = joint[i];
            let mut best = (current, value);
            for a in 0..k {
                if a == current {
                    continue;
                }
                joint[i] = a;
                let v = eval.value(&joint);
                if v > best.1 {
                    best = (a, v);
                }
            }
            joint[i] = best.0;
            if best.0 != current {
                value = best.1;
                changed = true;
            }
        }
        if !changed {
            return GreedyResult { joint, value, sweeps };
        }
    }
}

pub fn greedy_iterative_assignment(
    g: &ChannelRealization<f64>,
    powers: &Powers<f64>,
    objective: Objective,
    rate_scale: f64,
) -> (Vec<Action>, f64) {
    let mut eval = JointEvaluator::new(g, powers, objective, rate_scale);
    let r = greedy_search(&mut eval);
    let n = powers.num_levels();
    (r.joint.into_iter().map(|a| Action::from_index(a, n)).collect(), r.value)
}
