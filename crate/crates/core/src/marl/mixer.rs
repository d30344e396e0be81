use crate::error::Result;
use crate::net::{clip_grad_norm, soft_update, Adam, DenseNetwork, ForwardCache};
use crate::rng::Rng;

/// Combines per-agent utilities into a joint value.
pub trait Mixer {
    /// `qs` is `batch x num_agents`, `states` is `batch x state_dim`.
    fn forward(&self, qs: &[f32], states: &[f32], batch: usize, target: bool) -> Result<Vec<f32>>;

    /// Accumulates parameter gradients of `sum_b grad[b] * Q_tot[b]` and
    /// writes `dQ_tot / dq` into `dq`.
    fn backward(&mut self, qs: &[f32], states: &[f32], batch: usize, grad: &[f32], dq: &mut [f32]) -> Result<()>;

    fn apply_grads(&mut self, max_norm: f32);

    fn soft_update(&mut self, tau: f32) -> Result<()>;

    fn networks(&self) -> Vec<(String, &DenseNetwork<f32>)>;
}

#[derive(Debug, Clone, Copy)]
pub struct VdnMixer {
    pub num_agents: usize,
}

impl Mixer for VdnMixer {
    fn forward(&self, qs: &[f32], _: &[f32], _: usize, _: bool) -> Result<Vec<f32>> {
        Ok(qs.chunks(self.num_agents).map(|r| r.iter().sum()).collect())
    }

    fn backward(&mut self, _: &[f32], _: &[f32], _: usize, grad: &[f32], dq: &mut [f32]) -> Result<()> {
        for (row, &g) in dq.chunks_mut(self.num_agents).zip(grad) {
            row.fill(g);
        }
        Ok(())
    }

    fn apply_grads(&mut self, _: f32) {}

    fn soft_update(&mut self, _: f32) -> Result<()> {
        Ok(())
    }

    fn networks(&self) -> Vec<(String, &DenseNetwork<f32>)> {
        Vec::new()
    }
}

const HYPER_NAMES: [&str; 4] = ["hyper_w1", "hyper_b1", "hyper_w2", "hyper_v"];

/// Monotonic mixing network whose weights are produced by hypernetworks
/// of the global state and passed through `abs`.
#[derive(Debug, Clone)]
pub struct QmixMixer {
    num_agents: usize,
    embed: usize,
    online: [DenseNetwork<f32>; 4],
    target: [DenseNetwork<f32>; 4],
    grads: [Vec<f32>; 4],
    opts: [Adam<f32>; 4],
    caches: [ForwardCache<f32>; 4],
}

fn elu(x: f32) -> f32 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f32) -> f32 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

impl QmixMixer {
    pub fn new(num_agents: usize, state_dim: usize, embed: usize, lr: f32, rng: &mut Rng) -> Self {
        let online = [
            DenseNetwork::new(&[state_dim, num_agents * embed], rng),
            DenseNetwork::new(&[state_dim, embed], rng),
            DenseNetwork::new(&[state_dim, embed], rng),
            DenseNetwork::new(&[state_dim, embed, 1], rng),
        ];
        let grads = online.each_ref().map(|n| vec![0.0; n.num_params()]);
        let opts = online.each_ref().map(|n| Adam::new(n.num_params(), lr));
        QmixMixer { num_agents, embed, target: online.clone(), online, grads, opts, caches: Default::default() }
    }

    pub fn hypernetworks_mut(&mut self) -> &mut [DenseNetwork<f32>; 4] {
        &mut self.online
    }

    fn run(nets: &[DenseNetwork<f32>; 4], states: &[f32], batch: usize, caches: &mut [ForwardCache<f32>; 4]) -> Result<()> {
        for (net, cache) in nets.iter().zip(caches.iter_mut()) {
            net.forward_batch(states, batch, cache)?;
        }
        Ok(())
    }

    fn mix_row(&self, caches: &[ForwardCache<f32>; 4], q: &[f32], b: usize, hidden: &mut [f32]) -> f32 {
        let (w1, b1, w2) = (caches[0].row(b), caches[1].row(b), caches[2].row(b));
        hidden.copy_from_slice(b1);
        for (i, &qi) in q.iter().enumerate() {
            for (h, &w) in hidden.iter_mut().zip(&w1[i * self.embed..(i + 1) * self.embed]) {
                *h += qi * w.abs();
            }
        }
        hidden.iter().zip(w2).map(|(&z, &w)| elu(z) * w.abs()).sum::<f32>() + caches[3].row(b)[0]
    }
}

impl Mixer for QmixMixer {
    fn forward(&self, qs: &[f32], states: &[f32], batch: usize, target: bool) -> Result<Vec<f32>> {
        let mut caches: [ForwardCache<f32>; 4] = Default::default();
        Self::run(if target { &self.target } else { &self.online }, states, batch, &mut caches)?;
        let mut hidden = vec![0.0; self.embed];
        Ok((0..batch)
            .map(|b| self.mix_row(&caches, &qs[b * self.num_agents..(b + 1) * self.num_agents], b, &mut hidden))
            .collect())
    }

    fn backward(&mut self, qs: &[f32], states: &[f32], batch: usize, grad: &[f32], dq: &mut [f32]) -> Result<()> {
        let mut caches = std::mem::take(&mut self.caches);
        Self::run(&self.online, states, batch, &mut caches)?;
        let (n, e) = (self.num_agents, self.embed);
        let mut g_w1 = vec![0.0; batch * n * e];
        let mut g_b1 = vec![0.0; batch * e];
        let mut g_w2 = vec![0.0; batch * e];
        let mut g_v = vec![0.0; batch];
        let mut z = vec![0.0; e];
        for b in 0..batch {
            let q = &qs[b * n..(b + 1) * n];
            let g = grad[b];
            self.mix_row(&caches, q, b, &mut z);
            let (w1, w2) = (caches[0].row(b), caches[2].row(b));
            g_v[b] = g;
            let dz: Vec<f32> = (0..e)
                .map(|k| {
                    g_w2[b * e + k] = g * elu(z[k]) * sign(w2[k]);
                    g * w2[k].abs() * elu_grad(z[k])
                })
                .collect();
            g_b1[b * e..(b + 1) * e].copy_from_slice(&dz);
            for i in 0..n {
                let row = &w1[i * e..(i + 1) * e];
                dq[b * n + i] = row.iter().zip(&dz).map(|(w, d)| w.abs() * d).sum();
                for k in 0..e {
                    g_w1[(b * n + i) * e + k] = q[i] * dz[k] * sign(row[k]);
                }
            }
        }
        for (k, g_out) in [g_w1, g_b1, g_w2, g_v].iter().enumerate() {
            self.online[k].backward(&caches[k], g_out, &mut self.grads[k], None)?;
        }
        self.caches = caches;
        Ok(())
    }

    fn apply_grads(&mut self, max_norm: f32) {
        for k in 0..4 {
            clip_grad_norm(&mut self.grads[k], max_norm);
            self.opts[k].step(self.online[k].params_mut(), &self.grads[k]);
            self.grads[k].fill(0.0);
        }
    }

    fn soft_update(&mut self, tau: f32) -> Result<()> {
        for (t, o) in self.target.iter_mut().zip(&self.online) {
            soft_update(t, o, tau)?;
        }
        Ok(())
    }

    fn networks(&self) -> Vec<(String, &DenseNetwork<f32>)> {
        HYPER_NAMES.iter().zip(&self.online).map(|(n, net)| (n.to_string(), net)).collect()
    }
}

fn sign(x: f32) -> f32 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn setup(seed: u64) -> (QmixMixer, Vec<f32>, Vec<f32>) {
        let mut r = rng::seeded(seed, 0);
        let m = QmixMixer::new(3, 5, 4, 1e-3, &mut r);
        let qs: Vec<f32> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        let st: Vec<f32> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
        (m, qs, st)
    }

    #[test]
    fn vdn_is_sum() {
        let v = VdnMixer { num_agents: 2 };
        assert_eq!(v.forward(&[1.0, 2.0, -3.0, 0.5], &[], 2, false).unwrap(), vec![3.0, -2.5]);
    }

    #[test]
    fn zero_hypernetworks_leave_state_bias() {
        let (mut m, qs, st) = setup(1);
        for net in &mut m.hypernetworks_mut()[..3] {
            net.params_mut().fill(0.0);
        }
        let v = m.online[3].clone();
        let out = m.forward(&qs, &st, 2, false).unwrap();
        for b in 0..2 {
            assert!((out[b] - v.forward(&st[b * 5..(b + 1) * 5]).unwrap()[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (mut m, qs, st) = setup(2);
        let mut dq = vec![0.0; 6];
        m.backward(&qs, &st, 2, &[1.0, 1.0], &mut dq).unwrap();
        let h = 1e-2;
        for j in 0..6 {
            let (mut up, mut dn) = (qs.clone(), qs.clone());
            up[j] += h;
            dn[j] -= h;
            let f = |x: &[f32]| m.forward(x, &st, 2, false).unwrap().iter().sum::<f32>();
            let fd = (f(&up) - f(&dn)) / (2.0 * h);
            assert!(dq[j] >= 0.0);
            assert!((fd - dq[j]).abs() < 1e-2 * (1.0 + fd.abs()), "{fd} vs {}", dq[j]);
        }
        let p = 7;
        let analytic = m.grads[0][p];
        let f = |m: &QmixMixer| m.forward(&qs, &st, 2, false).unwrap().iter().sum::<f32>();
        let mut mp = m.clone();
        mp.online[0].params_mut()[p] += h;
        let mut mm = m.clone();
        mm.online[0].params_mut()[p] -= h;
        let fd = (f(&mp) - f(&mm)) / (2.0 * h);
        assert!((fd - analytic).abs() < 1e-2 * (1.0 + fd.abs()), "{fd} vs {analytic}");
    }
}
