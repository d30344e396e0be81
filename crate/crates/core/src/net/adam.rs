use super::dense::DenseNetwork;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(num_params: usize, lr: T) -> Self {
        Adam {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (one - self.beta1) * g;
            *v = self.beta2 * *v + (one - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Rescales `grads` in place so their L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(grads: &mut [T], max_norm: T) -> T {
    let norm = grads.iter().map(|&g| g * g).sum::<T>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// `target <- (1 - tau) * target + tau * online`.
pub fn soft_update<T: Scalar>(target: &mut DenseNetwork<T>, online: &DenseNetwork<T>, tau: T) -> Result<()> {
    if target.sizes() != online.sizes() {
        return Err(Error::Shape { expected: online.num_params(), got: target.num_params() });
    }
    if tau == T::one() {
        target.params_mut().copy_from_slice(online.params());
        return Ok(());
    }
    let keep = T::one() - tau;
    for (t, &o) in target.params_mut().iter_mut().zip(online.params()) {
        *t = keep * *t + tau * o;
    }
    Ok(())
}
