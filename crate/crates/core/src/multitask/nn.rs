//! A dense network with flat parameter storage, manual backprop, and Adam.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected layers with ReLU between them. Each layer stores its
/// weight row-major (`out × in`) followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// Apply ReLU to the final layer as well.
    relu_output: bool,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_trace`]; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("a trace holds at least the input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

impl Mlp {
    /// He-initialized weights, zero biases.
    pub fn new(sizes: &[usize], relu_output: bool, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let std = (2.0 / w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                params.push(std * rng.sample::<f64, _>(StandardNormal));
            }
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Mlp {
            sizes: sizes.to_vec(),
            relu_output,
            params,
        }
    }

    pub fn from_params(sizes: &[usize], relu_output: bool, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid("layer sizes", format!("{sizes:?}")));
        }
        if params.len() != param_count(sizes) {
            return Err(Error::WidthMismatch {
                expected: param_count(sizes),
                found: params.len(),
            });
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            relu_output,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize, bool)> + '_ {
        let n = self.sizes.len() - 1;
        let mut offset = 0;
        self.sizes.windows(2).enumerate().map(move |(l, w)| {
            let o = offset;
            offset += w[1] * (w[0] + 1);
            (o, w[0], w[1], l + 1 < n || self.relu_output)
        })
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_trace(x).acts.pop().expect("non-empty")
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        assert_eq!(x.len(), self.input_dim(), "input width");
        let mut acts = vec![x.to_vec()];
        for (o, nin, nout, relu) in self.layers() {
            let input = acts.last().expect("non-empty");
            let (w, b) = self.params[o..o + nout * (nin + 1)].split_at(nout * nin);
            let out = (0..nout)
                .map(|r| {
                    let z = b[r] + w[r * nin..(r + 1) * nin].iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    if relu {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        Trace { acts }
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂output` and returns `∂L/∂input`.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.params.len(), "gradient width");
        let layers: Vec<_> = self.layers().collect();
        let mut delta = d_out.to_vec();
        for (l, &(o, nin, nout, relu)) in layers.iter().enumerate().rev() {
            let out = &trace.acts[l + 1];
            if relu {
                for (d, &a) in delta.iter_mut().zip(out) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &trace.acts[l];
            let w = &self.params[o..o + nout * nin];
            let (gw, gb) = grad[o..o + nout * (nin + 1)].split_at_mut(nout * nin);
            let mut d_in = vec![0.0; nin];
            for r in 0..nout {
                let dr = delta[r];
                if dr == 0.0 {
                    continue;
                }
                gb[r] += dr;
                let row = r * nin;
                for c in 0..nin {
                    gw[row + c] += dr * input[c];
                    d_in[c] += dr * w[row + c];
                }
            }
            delta = d_in;
        }
        delta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}
