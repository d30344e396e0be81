use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, ChannelRealization, SILENT_DBM};
use crate::scalar::{dbm_to_watts, Scalar};

/// One agent's move: a subchannel and an index into the power set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub subchannel: usize,
    pub power: usize,
}

impl Action {
    #[inline]
    pub fn from_index(index: usize, num_power: usize) -> Self {
        Action { subchannel: index / num_power, power: index % num_power }
    }

    #[inline]
    pub fn index(self, num_power: usize) -> usize {
        self.subchannel * num_power + self.power
    }
}

/// Transmit powers and receiver noise in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct Powers<T> {
    /// One entry per power level; the silent level is exactly zero.
    pub v2v: Vec<T>,
    pub v2i: T,
    pub noise: T,
    pub bandwidth: T,
}

impl<T: Scalar> Powers<T> {
    pub fn from_params(params: &ChannelParams) -> Self {
        let v2v =
            params.power_levels_dbm.iter().map(|&p| if p <= SILENT_DBM { T::zero() } else { dbm_to_watts(T::lit(p)) }).collect();
        Powers {
            v2v,
            v2i: dbm_to_watts(T::lit(params.v2i_power_dbm)),
            noise: dbm_to_watts(T::lit(params.noise_dbm)),
            bandwidth: T::lit(params.subchannel_bandwidth),
        }
    }

    pub fn num_levels(&self) -> usize {
        self.v2v.len()
    }

    pub fn num_actions(&self, num_subchannels: usize) -> usize {
        num_subchannels * self.v2v.len()
    }
}

/// SINR of every V2I link.
pub fn sinr_v2i<T: Scalar>(actions: &[Action], g: &ChannelRealization<T>, p: &Powers<T>) -> Vec<T> {
    let mut interference = vec![T::zero(); g.num_v2i];
    for (i, a) in actions.iter().enumerate() {
        interference[a.subchannel] += p.v2v[a.power] * g.g_to_bs(i, a.subchannel);
    }
    (0..g.num_v2i).map(|m| p.v2i * g.g_v2i(m) / (p.noise + interference[m])).collect()
}

/// Interference `I_{i,m}` received by every V2V receiver on every
/// subchannel, `[i * M + m]`.
pub fn interference<T: Scalar>(actions: &[Action], g: &ChannelRealization<T>, p: &Powers<T>) -> Vec<T> {
    let l = g.num_v2v;
    let m = g.num_v2i;
    let mut out = vec![T::zero(); l * m];
    for i in 0..l {
        for k in 0..m {
            out[i * m + k] = p.v2i * g.g_from_v2i(i, k);
        }
        for (j, a) in actions.iter().enumerate() {
            if j != i {
                out[i * m + a.subchannel] += p.v2v[a.power] * g.g_cross(j, i, a.subchannel);
            }
        }
    }
    out
}

/// SINR of every V2V link on its chosen subchannel, together with the full
/// interference map.
pub fn sinr_v2v<T: Scalar>(actions: &[Action], g: &ChannelRealization<T>, p: &Powers<T>) -> (Vec<T>, Vec<T>) {
    let m = g.num_v2i;
    let interf = interference(actions, g, p);
    let sinr = actions
        .iter()
        .enumerate()
        .map(|(i, a)| p.v2v[a.power] * g.g_direct(i, a.subchannel) / (p.noise + interf[i * m + a.subchannel]))
        .collect();
    (sinr, interf)
}

/// Shannon rate in bits/s.
#[inline]
pub fn link_rate<T: Scalar>(sinr: T, bandwidth: T) -> T {
    bandwidth * sinr.ln_1p() / T::lit(std::f64::consts::LN_2)
}

/// Delivery rate in CAMs per second.
#[inline]
pub fn cam_rate<T: Scalar>(rate: T, cam_bits: T) -> T {
    rate / cam_bits
}

/// Rates of all links in bits/s for one joint action.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRates<T> {
    pub v2i: Vec<T>,
    pub v2v: Vec<T>,
}

pub fn link_rates<T: Scalar>(actions: &[Action], g: &ChannelRealization<T>, p: &Powers<T>) -> LinkRates<T> {
    let mut out = LinkRates { v2i: Vec::new(), v2v: Vec::new() };
    link_rates_into(actions, g, p, &mut out);
    out
}

/// Allocation-free rate evaluation. Only interference on the occupied
/// subchannel of each receiver is accumulated.
pub fn link_rates_into<T: Scalar>(actions: &[Action], g: &ChannelRealization<T>, p: &Powers<T>, out: &mut LinkRates<T>) {
    let l = actions.len();
    out.v2i.clear();
    out.v2i.resize(g.num_v2i, T::zero());
    for (i, a) in actions.iter().enumerate() {
        out.v2i[a.subchannel] += p.v2v[a.power] * g.g_to_bs(i, a.subchannel);
    }
    for (m, r) in out.v2i.iter_mut().enumerate() {
        *r = link_rate(p.v2i * g.g_v2i(m) / (p.noise + *r), p.bandwidth);
    }
    out.v2v.clear();
    for i in 0..l {
        let a = actions[i];
        let signal = p.v2v[a.power];
        if signal == T::zero() {
            out.v2v.push(T::zero());
            continue;
        }
        let mut interf = p.v2i * g.g_from_v2i(i, a.subchannel);
        for (j, b) in actions.iter().enumerate() {
            if j != i && b.subchannel == a.subchannel {
                interf += p.v2v[b.power] * g.g_cross(j, i, a.subchannel);
            }
        }
        out.v2v.push(link_rate(signal * g.g_direct(i, a.subchannel) / (p.noise + interf), p.bandwidth));
    }
}

/// Remaining CAM payload of each V2V transmitter within a control interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState<T> {
    pub q: Vec<T>,
    pub t: usize,
}

impl<T: Scalar> QueueState<T> {
    pub fn new(num_v2v: usize) -> Self {
        QueueState { q: vec![T::one(); num_v2v], t: 0 }
    }

    /// Advances one communication interval. The first interval of a control
    /// interval regenerates the CAM, so the queue leaves it full.
    pub fn step(&mut self, cam_rates: &[T], dt: T) {
        assert_eq!(cam_rates.len(), self.q.len());
        if self.t == 0 {
            self.q.iter_mut().for_each(|q| *q = T::one());
        } else {
            for (q, &r) in self.q.iter_mut().zip(cam_rates) {
                *q = (*q - r * dt).max(T::zero());
            }
        }
        self.t += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Per-step bonus for every link whose queue is empty.
    pub bonus: f64,
}

impl RewardWeights {
    pub const NFIG: RewardWeights = RewardWeights { lambda1: 0.1, lambda2: 0.9, bonus: 0.5 };
    pub const SIG: RewardWeights = RewardWeights { lambda1: 0.2, lambda2: 1.8, bonus: 0.5 };
}

/// `lambda1 * sum(v2i) + lambda2 * sum(v2v)` over scaled rates.
pub fn reward_nfig<T: Scalar>(v2i: &[T], v2v: &[T], w: &RewardWeights) -> T {
    weighted(v2i.iter().copied(), v2v.iter().copied(), None, w)
}

/// Rate terms for links with data left, the bonus for links already done.
/// `q` is the queue at the start of the interval.
pub fn reward_sig<T: Scalar>(v2i: &[T], v2v: &[T], q: &[T], w: &RewardWeights) -> T {
    assert_eq!(v2v.len(), q.len());
    weighted(v2i.iter().copied(), v2v.iter().copied(), Some(q), w)
}

/// Reward from raw rates in bits/s. Without a queue this is the one-shot
/// reward, with one the queue-aware reward.
pub fn scaled_reward<T: Scalar>(rates: &LinkRates<T>, q: Option<&[T]>, w: &RewardWeights, rate_scale: T) -> T {
    weighted(rates.v2i.iter().map(|&r| r / rate_scale), rates.v2v.iter().map(|&r| r / rate_scale), q, w)
}

fn weighted<T: Scalar>(v2i: impl Iterator<Item = T>, v2v: impl Iterator<Item = T>, q: Option<&[T]>, w: &RewardWeights) -> T {
    let s1: T = v2i.sum();
    let mut s2 = T::zero();
    let mut bonus = T::zero();
    for (i, r) in v2v.enumerate() {
        match q {
            Some(q) if q[i] <= T::zero() => bonus += T::lit(w.bonus),
            _ => s2 += r,
        }
    }
    T::lit(w.lambda1) * s1 + T::lit(w.lambda2) * s2 + bonus
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(l: usize, m: usize, f: impl Fn(&str, usize) -> f64) -> ChannelRealization<f64> {
        let gen = |name: &str, n: usize| (0..n).map(|k| f(name, k)).collect::<Vec<_>>();
        let direct = gen("direct", l * m);
        let mut cross = gen("cross", l * l * m);
        for i in 0..l {
            for k in 0..m {
                cross[(i * l + i) * m + k] = direct[i * m + k];
            }
        }
        ChannelRealization {
            num_v2v: l,
            num_v2i: m,
            direct,
            cross,
            to_bs: gen("to_bs", l * m),
            from_v2i: gen("from_v2i", l * m),
            v2i: gen("v2i", m),
        }
    }

    fn powers() -> Powers<f64> {
        Powers::from_params(&ChannelParams::default())
    }

    #[test]
    fn action_index_roundtrip() {
        for idx in 0..16 {
            assert_eq!(Action::from_index(idx, 4).index(4), idx);
        }
        assert_eq!(Action::from_index(6, 4), Action { subchannel: 1, power: 2 });
    }

    #[test]
    fn silent_level_is_zero_watts() {
        let p = powers();
        assert_eq!(p.v2v[3], 0.0);
        assert!((p.v2v[0] - 0.199_526_231_496_887_9).abs() < 1e-15);
    }

    #[test]
    fn all_silent_v2i_sinr() {
        let p = powers();
        let g = synthetic(2, 2, |_, k| 1e-9 * (k + 1) as f64);
        let silent = [Action { subchannel: 0, power: 3 }, Action { subchannel: 1, power: 3 }];
        let s = sinr_v2i(&silent, &g, &p);
        for m in 0..2 {
            assert!((s[m] - p.v2i * g.v2i[m] / p.noise).abs() / s[m] < 1e-15);
        }
    }

    #[test]
    fn symmetric_interferer_bounds_sinr() {
        let p = powers();
        let g = synthetic(1, 1, |_, _| 1e-10);
        let s = sinr_v2i(&[Action { subchannel: 0, power: 0 }], &g, &p);
        let expect = p.v2i * 1e-10 / (p.noise + p.v2v[0] * 1e-10);
        assert!((s[0] - expect).abs() / expect < 1e-12);
        assert!(s[0] < 1.0);
    }

    #[test]
    fn rates() {
        assert_eq!(link_rate::<f64>(0.0, 1e6), 0.0);
        assert!((link_rate::<f64>(1.0, 1e6) - 1e6).abs() < 1e-6);
        assert!((link_rate::<f64>(3.0, 1e6) - 2e6).abs() < 1e-6);
        assert_eq!(cam_rate::<f64>(50_880.0, 50_880.0), 1.0);
        assert!((cam_rate::<f64>(2.544e6, 50_880.0) * 1e-3 - 0.05).abs() < 1e-12);
    }

    #[test]
    fn queue_dynamics() {
        let mut q = QueueState::<f64>::new(2);
        q.step(&[400.0, 500.0], 1e-3);
        assert_eq!(q.q, vec![1.0, 1.0]);
        q.step(&[400.0, 500.0], 1e-3);
        assert!((q.q[0] - 0.6).abs() < 1e-12);
        assert!((q.q[1] - 0.5).abs() < 1e-12);
        q.q[0] = 0.2;
        q.step(&[500.0, 0.0], 1e-3);
        assert_eq!(q.q[0], 0.0);
        assert_eq!(q.t, 3);
    }

    #[test]
    fn rewards_by_hand() {
        let w = RewardWeights::NFIG;
        assert!((reward_nfig::<f64>(&[1.0, 1.0], &[2.0, 2.0], &w) - 3.8).abs() < 1e-12);
        assert_eq!(reward_nfig::<f64>(&[0.0], &[0.0], &w), 0.0);
        let s = RewardWeights::SIG;
        assert!((reward_sig::<f64>(&[0.0, 0.0], &[0.3, 0.7], &[0.0, 0.0], &s) - 1.0).abs() < 1e-12);
        let mixed = reward_sig::<f64>(&[0.5, 0.25], &[0.4, 0.9, 0.1], &[0.3, 0.0, 1.0], &s);
        assert!((mixed - (0.2 * 0.75 + 1.8 * 0.5 + 0.5)).abs() < 1e-12);
        let full = reward_sig::<f64>(&[0.5], &[0.4], &[1.0], &s);
        assert!((full - reward_nfig::<f64>(&[0.5], &[0.4], &s)).abs() < 1e-15);
    }

    #[test]
    fn rates_into_matches_sinr_functions() {
        let p = powers();
        let g = synthetic(3, 2, |name, k| 1e-9 * (1.0 + name.len() as f64 * 0.1 + k as f64 * 0.37));
        let acts = [Action { subchannel: 0, power: 0 }, Action { subchannel: 0, power: 1 }, Action { subchannel: 1, power: 3 }];
        let r = link_rates(&acts, &g, &p);
        let (sv, _) = sinr_v2v(&acts, &g, &p);
        let si = sinr_v2i(&acts, &g, &p);
        for i in 0..3 {
            assert!((r.v2v[i] - link_rate::<f64>(sv[i], p.bandwidth)).abs() <= 1e-9 * r.v2v[i].max(1.0));
        }
        for m in 0..2 {
            assert!((r.v2i[m] - link_rate::<f64>(si[m], p.bandwidth)).abs() <= 1e-9 * r.v2i[m]);
        }
        assert_eq!(r.v2v[2], 0.0);
    }
}
