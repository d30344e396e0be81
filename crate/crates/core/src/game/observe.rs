use crate::channel::ChannelRealization;

pub fn global_state_dim(num_v2v: usize, num_v2i: usize) -> usize {
    num_v2i * (num_v2v + 1) * (num_v2v + 1) + num_v2v + 1
}

pub fn local_obs_dim(num_v2i: usize) -> usize {
    3 * num_v2i + 2
}

/// Linear gain to a feature: `(10 log10 g + 120) / 60` clipped to `[0, 2]`.
#[inline]
pub fn encode_gain(g: f64) -> f64 {
    ((10.0 * g.log10() + 120.0) / 60.0).clamp(0.0, 2.0)
}

/// Interference relative to the noise floor, `10 log10(I / noise) / 60`
/// clipped to `[0, 2]`.
#[inline]
pub fn encode_interference(i: f64, noise: f64) -> f64 {
    (10.0 * (i / noise).log10() / 60.0).clamp(0.0, 2.0)
}

/// Every gain tensor, then queues and normalized time. Written into `out`
/// after clearing it.
pub fn encode_global(g: &ChannelRealization<f64>, q: &[f64], t: usize, horizon: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend(g.cross.iter().map(|&x| encode_gain(x)));
    out.extend(g.to_bs.iter().map(|&x| encode_gain(x)));
    out.extend(g.from_v2i.iter().map(|&x| encode_gain(x)));
    out.extend(g.v2i.iter().map(|&x| encode_gain(x)));
    out.extend_from_slice(q);
    out.push(t as f64 / horizon as f64);
}

/// Own link gains, own gains towards the BS, last interval's interference,
/// own queue and normalized time.
#[allow(clippy::too_many_arguments)]
pub fn encode_local(
    g: &ChannelRealization<f64>,
    prev_interference: &[f64],
    noise: f64,
    q: &[f64],
    t: usize,
    horizon: usize,
    agent: usize,
    out: &mut Vec<f64>,
) {
    let m = g.num_v2i;
    out.clear();
    out.extend((0..m).map(|k| encode_gain(g.g_direct(agent, k))));
    out.extend((0..m).map(|k| encode_gain(g.g_to_bs(agent, k))));
    out.extend(prev_interference[agent * m..(agent + 1) * m].iter().map(|&i| encode_interference(i, noise)));
    out.push(q[agent]);
    out.push(t as f64 / horizon as f64);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(global_state_dim(4, 4), 105);
        assert_eq!(local_obs_dim(4), 14);
    }

    #[test]
    fn encodings() {
        assert!((encode_gain(1e-9) - 0.5).abs() < 1e-12);
        assert_eq!(encode_gain(1e-15), 0.0);
        assert_eq!(encode_gain(10.0), 2.0);
        assert_eq!(encode_interference(3e-15, 3e-15), 0.0);
        assert!((encode_interference(3e-9, 3e-15) - 1.0).abs() < 1e-12);
    }
}
