use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Fully connected network with ReLU hidden layers and a linear output.
/// Weights of each layer are stored input-major (`[i * out + o]`) followed
/// by the biases, all in one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

/// Per-layer activations of the last batched forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache<T> {
    batch: usize,
    acts: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn new() -> Self {
        ForwardCache { batch: 0, acts: Vec::new() }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network outputs, row-major `batch x output_dim`.
    pub fn output(&self) -> &[T] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn row(&self, b: usize) -> &[T] {
        let out = self.output();
        let width = out.len() / self.batch.max(1);
        &out[b * width..(b + 1) * width]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub input: usize,
    pub output: usize,
}

impl<T: Scalar> DenseNetwork<T> {
    /// Uniform fan-in initialization, `U(-1/sqrt(in), 1/sqrt(in))` for
    /// weights and biases.
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Self {
        let mut net = Self::zeros(sizes);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[offset..offset + w[0] * w[1] + w[1]] {
                *p = T::lit(rng.random_range(-bound..bound));
            }
            offset += w[0] * w[1] + w[1];
        }
        net
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "a network needs input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        DenseNetwork { sizes: sizes.to_vec(), params: vec![T::zero(); n] }
    }

    pub fn from_params(sizes: &[usize], params: Vec<T>) -> Result<Self> {
        let net = Self::zeros(sizes);
        if params.len() != net.params.len() {
            return Err(Error::Shape { expected: net.params.len(), got: params.len() });
        }
        Ok(DenseNetwork { params, ..net })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn layers(&self) -> impl Iterator<Item = LayerShape> + '_ {
        self.sizes.windows(2).map(|w| LayerShape { input: w[0], output: w[1] })
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let mut cache = ForwardCache::new();
        self.forward_batch(x, 1, &mut cache)?;
        Ok(cache.output().to_vec())
    }

    /// Forward pass over `batch` row-major inputs, keeping activations for
    /// [`DenseNetwork::backward`].
    pub fn forward_batch(&self, xs: &[T], batch: usize, cache: &mut ForwardCache<T>) -> Result<()> {
        let expected = batch * self.input_dim();
        if xs.len() != expected {
            return Err(Error::Shape { expected, got: xs.len() });
        }
        let layers = self.sizes.len() - 1;
        cache.batch = batch;
        cache.acts.resize_with(layers + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(xs);
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let (prev, next) = cache.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            out.clear();
            out.reserve(batch * n_out);
            for r in 0..batch {
                let x = &input[r * n_in..(r + 1) * n_in];
                let start = out.len();
                out.extend_from_slice(b);
                let row = &mut out[start..];
                for (i, &xi) in x.iter().enumerate() {
                    if xi == T::zero() {
                        continue;
                    }
                    for (o, &wv) in row.iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
                        *o += xi * wv;
                    }
                }
                if l + 1 < layers {
                    row.iter_mut().for_each(|v| *v = v.max(T::zero()));
                }
            }
        }
        Ok(())
    }

    /// Accumulates parameter gradients of `sum_b grad_out[b] . output[b]`
    /// into `grads`. When `input_grad` is given it receives the gradient
    /// with respect to the inputs.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        grad_out: &[T],
        grads: &mut [T],
        input_grad: Option<&mut Vec<T>>,
    ) -> Result<()> {
        let layers = self.sizes.len() - 1;
        if cache.acts.len() != layers + 1 || cache.batch == 0 {
            return Err(Error::MissingCache);
        }
        let batch = cache.batch;
        if grad_out.len() != batch * self.output_dim() {
            return Err(Error::Shape { expected: batch * self.output_dim(), got: grad_out.len() });
        }
        if grads.len() != self.params.len() {
            return Err(Error::Shape { expected: self.params.len(), got: grads.len() });
        }
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let want_input = input_grad.is_some();
        let mut delta = grad_out.to_vec();
        let mut prev_delta = Vec::new();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &cache.acts[l];
            let w = &self.params[off..off + n_in * n_out];
            {
                let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for r in 0..batch {
                    let d = &delta[r * n_out..(r + 1) * n_out];
                    for (g, &dv) in gb.iter_mut().zip(d) {
                        *g += dv;
                    }
                    let x = &input[r * n_in..(r + 1) * n_in];
                    for (i, &xi) in x.iter().enumerate() {
                        if xi == T::zero() {
                            continue;
                        }
                        for (g, &dv) in gw[i * n_out..(i + 1) * n_out].iter_mut().zip(d) {
                            *g += xi * dv;
                        }
                    }
                }
            }
            if l == 0 && !want_input {
                break;
            }
            prev_delta.clear();
            prev_delta.resize(batch * n_in, T::zero());
            for r in 0..batch {
                let d = &delta[r * n_out..(r + 1) * n_out];
                let x = &input[r * n_in..(r + 1) * n_in];
                for i in 0..n_in {
                    // Hidden inputs are ReLU outputs: zero means the unit was
                    // inactive and blocks the gradient.
                    if l > 0 && x[i] <= T::zero() {
                        continue;
                    }
                    prev_delta[r * n_in + i] = w[i * n_out..(i + 1) * n_out].iter().zip(d).map(|(&a, &b)| a * b).sum();
                }
            }
            std::mem::swap(&mut delta, &mut prev_delta);
        }
        if let Some(out) = input_grad {
            *out = delta;
        }
        Ok(())
    }
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
