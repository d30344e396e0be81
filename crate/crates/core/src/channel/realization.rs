use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{path_loss_v2i, path_loss_v2v, shadowing, ChannelParams};
use crate::rng::Rng;
use crate::scalar::{db_to_linear, Scalar};
use crate::topology::{TopologySnapshot, Vehicle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingMode {
    /// Unit-mean exponential (Rayleigh power) fading, redrawn every interval.
    Fast,
    /// `h = 1` on every link.
    None,
}

/// Shadowing values in dB for every link class.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowState {
    pub num_v2v: usize,
    pub num_v2i: usize,
    /// `[tx * L + rx]`; the diagonal holds the V2V link itself.
    pub v2v: Vec<f64>,
    /// V2V transmitter to BS.
    pub v2v_to_bs: Vec<f64>,
    /// `[m * L + rx]`: V2I vehicle `m` to V2V receiver.
    pub v2i_to_v2v: Vec<f64>,
    /// V2I vehicle to BS.
    pub v2i_to_bs: Vec<f64>,
}

impl ShadowState {
    pub fn zero(num_v2v: usize, num_v2i: usize) -> Self {
        ShadowState {
            num_v2v,
            num_v2i,
            v2v: vec![0.0; num_v2v * num_v2v],
            v2v_to_bs: vec![0.0; num_v2v],
            v2i_to_v2v: vec![0.0; num_v2i * num_v2v],
            v2i_to_bs: vec![0.0; num_v2i],
        }
    }

    /// Independent draws from the stationary distributions.
    pub fn draw(num_v2v: usize, num_v2i: usize, params: &ChannelParams, rng: &mut Rng) -> Self {
        let mut s = Self::zero(num_v2v, num_v2i);
        let mut fill = |v: &mut Vec<f64>, std: f64| {
            for x in v.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *x = std * z;
            }
        };
        fill(&mut s.v2v, params.shadow_std_v2v);
        fill(&mut s.v2v_to_bs, params.shadow_std_v2i);
        fill(&mut s.v2i_to_v2v, params.shadow_std_v2v);
        fill(&mut s.v2i_to_bs, params.shadow_std_v2i);
        s
    }

    /// Correlated update between two snapshots of the same vehicles; each
    /// link decorrelates with the larger displacement of its two ends.
    pub fn advance(&mut self, prev: &TopologySnapshot, next: &TopologySnapshot, params: &ChannelParams, rng: &mut Rng) {
        let moved = |a: &Vehicle, b: &Vehicle| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
        let l = self.num_v2v;
        let d_tx: Vec<f64> = (0..l).map(|i| moved(prev.tx(i), next.tx(i))).collect();
        let d_rx: Vec<f64> = (0..l).map(|i| moved(prev.rx(i), next.rx(i))).collect();
        let d_v2i: Vec<f64> = (0..self.num_v2i).map(|m| moved(prev.v2i(m), next.v2i(m))).collect();
        let (sv, dv) = (params.shadow_std_v2v, params.decorrelation_v2v);
        let (si, di) = (params.shadow_std_v2i, params.decorrelation_v2i);
        for j in 0..l {
            for i in 0..l {
                let k = j * l + i;
                self.v2v[k] = shadowing(self.v2v[k], d_tx[j].max(d_rx[i]), sv, dv, rng);
            }
        }
        for i in 0..l {
            self.v2v_to_bs[i] = shadowing(self.v2v_to_bs[i], d_tx[i], si, di, rng);
        }
        for m in 0..self.num_v2i {
            for i in 0..l {
                let k = m * l + i;
                self.v2i_to_v2v[k] = shadowing(self.v2i_to_v2v[k], d_v2i[m].max(d_rx[i]), sv, dv, rng);
            }
            self.v2i_to_bs[m] = shadowing(self.v2i_to_bs[m], d_v2i[m], si, di, rng);
        }
    }
}

/// Subchannel-independent linear gains (path loss, shadowing, antenna gains
/// and receiver noise figure).
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleGains<T> {
    pub num_v2v: usize,
    pub num_v2i: usize,
    /// `[tx * L + rx]`; the diagonal is the V2V link gain.
    pub v2v: Vec<T>,
    pub v2v_to_bs: Vec<T>,
    /// `[m * L + rx]`.
    pub v2i_to_v2v: Vec<T>,
    pub v2i: Vec<T>,
}

impl<T: Scalar> LargeScaleGains<T> {
    pub fn direct(&self, i: usize) -> T {
        self.v2v[i * self.num_v2v + i]
    }

    pub fn cross(&self, tx: usize, rx: usize) -> T {
        self.v2v[tx * self.num_v2v + rx]
    }
}

fn dist2(a: &Vehicle, b: &Vehicle) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

pub fn large_scale_gains<T: Scalar>(
    snapshot: &TopologySnapshot,
    params: &ChannelParams,
    shadow: &ShadowState,
) -> LargeScaleGains<T> {
    let l = snapshot.num_v2v;
    let m = snapshot.num_v2i;
    assert_eq!(shadow.num_v2v, l, "shadow state sized for a different topology");
    assert_eq!(shadow.num_v2i, m, "shadow state sized for a different topology");
    let f = T::lit(params.carrier_ghz);
    let v2v_budget = T::lit(params.vehicle_gain + params.vehicle_gain - params.vehicle_noise_figure);
    let v2i_budget = T::lit(params.vehicle_gain + params.bs_gain - params.bs_noise_figure);
    let dh = params.bs_antenna_height - params.vehicle_antenna_height;
    let bs = snapshot.bs_position;
    let bs_dist = |v: &Vehicle| ((v.x - bs.x).powi(2) + (v.y - bs.y).powi(2) + dh * dh).sqrt();
    let gain = |pl: T, shadow_db: f64, budget: T| db_to_linear(-pl - T::lit(shadow_db) + budget);

    let mut v2v = Vec::with_capacity(l * l);
    for j in 0..l {
        for i in 0..l {
            let d = T::lit(dist2(snapshot.tx(j), snapshot.rx(i)));
            v2v.push(gain(path_loss_v2v(d, f), shadow.v2v[j * l + i], v2v_budget));
        }
    }
    let v2v_to_bs =
        (0..l).map(|i| gain(path_loss_v2i(T::lit(bs_dist(snapshot.tx(i)))), shadow.v2v_to_bs[i], v2i_budget)).collect();
    let mut v2i_to_v2v = Vec::with_capacity(m * l);
    for k in 0..m {
        for i in 0..l {
            let d = T::lit(dist2(snapshot.v2i(k), snapshot.rx(i)));
            v2i_to_v2v.push(gain(path_loss_v2v(d, f), shadow.v2i_to_v2v[k * l + i], v2v_budget));
        }
    }
    let v2i = (0..m).map(|k| gain(path_loss_v2i(T::lit(bs_dist(snapshot.v2i(k)))), shadow.v2i_to_bs[k], v2i_budget)).collect();
    LargeScaleGains { num_v2v: l, num_v2i: m, v2v, v2v_to_bs, v2i_to_v2v, v2i }
}

/// Unit-mean exponential power fading factor.
pub fn fast_fading<T: Scalar>(rng: &mut Rng) -> T {
    let h: f64 = Exp1.sample(rng);
    T::lit(h)
}

/// Full gain tensors `G = alpha * h` for one communication interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    pub num_v2v: usize,
    /// Number of V2I links, equal to the number of subchannels.
    pub num_v2i: usize,
    /// `G_{i,m}`: `[i * M + m]`.
    pub direct: Vec<T>,
    /// `G_{j,i,m}`: `[(j * L + i) * M + m]`; the diagonal repeats `direct`.
    pub cross: Vec<T>,
    /// `G_{i,B,m}`: V2V transmitter `i` to the BS, `[i * M + m]`.
    pub to_bs: Vec<T>,
    /// `G_{B,i,m}`: V2I vehicle of subchannel `m` to V2V receiver `i`,
    /// `[i * M + m]`.
    pub from_v2i: Vec<T>,
    /// `G_m`: V2I link gain.
    pub v2i: Vec<T>,
}

impl<T: Scalar> ChannelRealization<T> {
    #[inline]
    pub fn g_direct(&self, i: usize, m: usize) -> T {
        self.direct[i * self.num_v2i + m]
    }

    #[inline]
    pub fn g_cross(&self, tx: usize, rx: usize, m: usize) -> T {
        self.cross[(tx * self.num_v2v + rx) * self.num_v2i + m]
    }

    #[inline]
    pub fn g_to_bs(&self, i: usize, m: usize) -> T {
        self.to_bs[i * self.num_v2i + m]
    }

    #[inline]
    pub fn g_from_v2i(&self, i: usize, m: usize) -> T {
        self.from_v2i[i * self.num_v2i + m]
    }

    #[inline]
    pub fn g_v2i(&self, m: usize) -> T {
        self.v2i[m]
    }

    pub fn all_positive_finite(&self) -> bool {
        self.direct
            .iter()
            .chain(&self.cross)
            .chain(&self.to_bs)
            .chain(&self.from_v2i)
            .chain(&self.v2i)
            .all(|g| g.is_finite() && *g > T::zero())
    }
}

/// Applies small-scale fading to fixed large-scale gains. The draw order is
/// direct, cross (off-diagonal), to-BS, from-V2I, V2I.
pub fn realize_from_gains<T: Scalar>(gains: &LargeScaleGains<T>, mode: FadingMode, rng: &mut Rng) -> ChannelRealization<T> {
    let l = gains.num_v2v;
    let m = gains.num_v2i;
    let mut h = || match mode {
        FadingMode::Fast => fast_fading::<T>(rng),
        FadingMode::None => T::one(),
    };
    let mut direct = Vec::with_capacity(l * m);
    for i in 0..l {
        for _ in 0..m {
            direct.push(gains.direct(i) * h());
        }
    }
    let mut cross = vec![T::zero(); l * l * m];
    for j in 0..l {
        for i in 0..l {
            for k in 0..m {
                cross[(j * l + i) * m + k] = if i == j { direct[i * m + k] } else { gains.cross(j, i) * h() };
            }
        }
    }
    let mut to_bs = Vec::with_capacity(l * m);
    for i in 0..l {
        for _ in 0..m {
            to_bs.push(gains.v2v_to_bs[i] * h());
        }
    }
    let mut from_v2i = Vec::with_capacity(l * m);
    for i in 0..l {
        for k in 0..m {
            from_v2i.push(gains.v2i_to_v2v[k * l + i] * h());
        }
    }
    let v2i = (0..m).map(|k| gains.v2i[k] * h()).collect();
    ChannelRealization { num_v2v: l, num_v2i: m, direct, cross, to_bs, from_v2i, v2i }
}

pub fn realize<T: Scalar>(
    snapshot: &TopologySnapshot,
    params: &ChannelParams,
    shadow: &ShadowState,
    mode: FadingMode,
    rng: &mut Rng,
) -> ChannelRealization<T> {
    realize_from_gains(&large_scale_gains(snapshot, params, shadow), mode, rng)
}
