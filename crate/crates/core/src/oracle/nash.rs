use serde::{Deserialize, Serialize};

use super::bounds::NormalizationBounds;
use super::search::{check_guard, for_each_joint, JointEvaluator};
use crate::error::{Error, Result};

/// Common payoff of every joint action, lexicographic with agent 0 most
/// significant.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTensor {
    pub num_agents: usize,
    pub num_actions: usize,
    pub values: Vec<f64>,
}

impl PayoffTensor {
    pub fn from_fn(num_agents: usize, num_actions: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut values = Vec::with_capacity(num_actions.pow(num_agents as u32));
        for_each_joint(num_agents, num_actions, |j| values.push(f(j)));
        PayoffTensor { num_agents, num_actions, values }
    }

    pub fn from_evaluator(eval: &mut JointEvaluator<'_>, guard: usize) -> Result<Self> {
        check_guard(eval.num_agents(), guard)?;
        let (l, k) = (eval.num_agents(), eval.num_actions());
        Ok(Self::from_fn(l, k, |j| eval.value(j)))
    }

    pub fn index(&self, joint: &[usize]) -> usize {
        joint.iter().fold(0, |acc, &a| acc * self.num_actions + a)
    }

    pub fn joint(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.num_agents];
        for slot in out.iter_mut().rev() {
            *slot = index % self.num_actions;
            index /= self.num_actions;
        }
        out
    }

    pub fn get(&self, joint: &[usize]) -> f64 {
        self.values[self.index(joint)]
    }

    /// First maximizer in lexicographic order.
    pub fn argmax(&self) -> (usize, f64) {
        self.values.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
    }

    /// Expected payoff under uniformly random independent actions.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    fn stride(&self, agent: usize) -> usize {
        self.num_actions.pow((self.num_agents - 1 - agent) as u32)
    }

    /// No agent can strictly raise the payoff by changing only its own
    /// action.
    pub fn is_pure_nash(&self, index: usize) -> bool {
        let v = self.values[index];
        (0..self.num_agents).all(|i| {
            let s = self.stride(i);
            let own = (index / s) % self.num_actions;
            let base = index - own * s;
            (0..self.num_actions).all(|a| self.values[base + a * s] <= v)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub joint: Vec<usize>,
    pub value: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub equilibria: Vec<Equilibrium>,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }

    pub fn max_normalized(&self) -> Option<f64> {
        self.equilibria.iter().map(|e| e.normalized).reduce(f64::max)
    }

    pub fn min_normalized(&self) -> Option<f64> {
        self.equilibria.iter().map(|e| e.normalized).reduce(f64::min)
    }

    pub fn mean_normalized(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.equilibria.iter().map(|e| e.normalized).sum::<f64>() / self.len() as f64)
    }
}

/// All pure equilibria, each normalized with `bounds`.
pub fn enumerate_pure_nash(tensor: &PayoffTensor, bounds: &NormalizationBounds) -> Result<EquilibriumSet> {
    let equilibria = (0..tensor.values.len())
        .filter(|&i| tensor.is_pure_nash(i))
        .map(|i| {
            let value = tensor.values[i];
            Ok(Equilibrium { joint: tensor.joint(i), value, normalized: bounds.normalize(value)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquilibriumSet { equilibria })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdsReport {
    pub topology: String,
    pub sample_id: u64,
    pub d: f64,
    pub equilibrium_count: usize,
    pub g_ne_max: f64,
    pub g_ne_min: f64,
    pub g_ne_mean: f64,
}

/// `(max - min) / max + (1 - mean) / max` over normalized equilibrium
/// returns.
pub fn coordination_difficulty_score(set: &EquilibriumSet) -> Result<f64> {
    let (Some(max), Some(min), Some(mean)) = (set.max_normalized(), set.min_normalized(), set.mean_normalized()) else {
        return Err(Error::Cds("no pure equilibria".into()));
    };
    if max <= 0.0 {
        return Err(Error::Cds(format!("best equilibrium has normalized return {max}")));
    }
    Ok((max - min) / max + (1.0 - mean) / max)
}

pub fn cds_report(set: &EquilibriumSet, topology: String, sample_id: u64) -> Result<CdsReport> {
    let d = coordination_difficulty_score(set)?;
    Ok(CdsReport {
        topology,
        sample_id,
        d,
        equilibrium_count: set.len(),
        g_ne_max: set.max_normalized().unwrap_or(f64::NAN),
        g_ne_min: set.min_normalized().unwrap_or(f64::NAN),
        g_ne_mean: set.mean_normalized().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_bounds() -> NormalizationBounds {
        NormalizationBounds::new(0.0, 1.0)
    }

    #[test]
    fn coordination_game_has_two_equilibria() {
        // Agents agree on action 0 (payoff 1) or action 1 (payoff 0.5);
        // miscoordination pays nothing.
        let t = PayoffTensor { num_agents: 2, num_actions: 2, values: vec![1.0, 0.0, 0.0, 0.5] };
        let set = enumerate_pure_nash(&t, &unit_bounds()).unwrap();
        let joints: Vec<_> = set.equilibria.iter().map(|e| e.joint.clone()).collect();
        assert_eq!(joints, vec![vec![0, 0], vec![1, 1]]);
        let d = coordination_difficulty_score(&set).unwrap();
        assert!((d - 0.75).abs() < 1e-12);
    }

    #[test]
    fn constant_payoff_all_equilibria() {
        let t = PayoffTensor::from_fn(3, 3, |_| 2.0);
        let set = enumerate_pure_nash(&t, &NormalizationBounds::new(0.0, 2.0)).unwrap();
        assert_eq!(set.len(), 27);
        assert_eq!(coordination_difficulty_score(&set).unwrap(), 0.0);
    }

    #[test]
    fn single_optimal_equilibrium_scores_zero() {
        let t = PayoffTensor::from_fn(2, 3, |j| (j[0] + j[1]) as f64);
        let set = enumerate_pure_nash(&t, &NormalizationBounds::new(0.0, 4.0)).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(coordination_difficulty_score(&set).unwrap(), 0.0);
    }

    #[test]
    fn index_roundtrip_and_argmax() {
        let t = PayoffTensor::from_fn(3, 4, |j| (j[0] * 16 + j[1] * 4 + j[2]) as f64);
        for i in 0..64 {
            assert_eq!(t.index(&t.joint(i)), i);
            assert_eq!(t.values[i], i as f64);
        }
        assert_eq!(t.argmax(), (63, 63.0));
        assert!(t.is_pure_nash(63));
    }

    #[test]
    fn empty_set_is_an_error() {
        let set = EquilibriumSet { equilibria: vec![] };
        assert!(coordination_difficulty_score(&set).is_err());
        let neg = EquilibriumSet { equilibria: vec![Equilibrium { joint: vec![0], value: -1.0, normalized: -0.5 }] };
        assert!(coordination_difficulty_score(&neg).is_err());
    }
}
