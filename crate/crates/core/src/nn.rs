//! Minimal dense-layer machinery with hand-written backpropagation.
//!
//! The reward networks and the trajectory autoencoder are small enough that
//! plain `Vec<f64>` layers beat any tensor dependency here. Gradients are
//! verified against central finite differences in the reward-module tests.

use alloc::vec;
use alloc::vec::Vec;
// Inherent float methods only exist with std; the Float trait fills in for no_std builds.
#[allow(unused_imports)]
use num_traits::Float;

use crate::rng::{standard_normal, SeededRng};

/// Fully connected layer; weights stored row-major as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    /// Layer with weights drawn from N(0, 1/in_dim) and zero biases.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut SeededRng) -> Self {
        let scale = 1.0 / (in_dim as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| standard_normal(rng) * scale)
            .collect();
        Linear {
            in_dim,
            out_dim,
            w,
            b: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, (row, bias)) in out
            .iter_mut()
            .zip(self.w.chunks_exact(self.in_dim).zip(self.b.iter()))
        {
            let mut acc = *bias;
            for (wi, xi) in row.iter().zip(x.iter()) {
                acc += wi * xi;
            }
            *o = acc;
        }
    }

    /// Accumulates parameter gradients for this layer and returns the
    /// gradient with respect to the input. `grad_out` is dL/d(pre-activation).
    pub fn backward(
        &self,
        x: &[f64],
        grad_out: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
    ) -> Vec<f64> {
        debug_assert_eq!(grad_w.len(), self.w.len());
        debug_assert_eq!(grad_b.len(), self.b.len());
        let mut grad_in = vec![0.0; self.in_dim];
        for (i, go) in grad_out.iter().enumerate() {
            grad_b[i] += go;
            let row = &self.w[i * self.in_dim..(i + 1) * self.in_dim];
            let grow = &mut grad_w[i * self.in_dim..(i + 1) * self.in_dim];
            for j in 0..self.in_dim {
                grow[j] += go * x[j];
                grad_in[j] += go * row[j];
            }
        }
        grad_in
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

pub fn tanh_forward(pre: &[f64], out: &mut [f64]) {
    for (o, p) in out.iter_mut().zip(pre.iter()) {
        *o = p.tanh();
    }
}

/// dL/d(pre-activation) from dL/d(activation), given activation = tanh(pre).
pub fn tanh_backward(activation: &[f64], grad_act: &[f64], grad_pre: &mut [f64]) {
    for ((gp, a), ga) in grad_pre.iter_mut().zip(activation.iter()).zip(grad_act.iter()) {
        *gp = ga * (1.0 - a * a);
    }
}

/// Flat parameter view across a stack of layers, weights before biases per
/// layer, layers in order.
pub fn collect_params(layers: &[Linear]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(&l.w);
        out.extend_from_slice(&l.b);
    }
    out
}

pub fn assign_params(layers: &mut [Linear], flat: &[f64]) {
    let mut offset = 0;
    for l in layers.iter_mut() {
        let wlen = l.w.len();
        l.w.copy_from_slice(&flat[offset..offset + wlen]);
        offset += wlen;
        let blen = l.b.len();
        l.b.copy_from_slice(&flat[offset..offset + blen]);
        offset += blen;
    }
    debug_assert_eq!(offset, flat.len());
}

/// Gradient-descent update rule applied to a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    /// Classic momentum: v <- momentum*v - lr*g; p <- p + v.
    Sgd { momentum: f64 },
    /// Adaptive moments with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Sgd { momentum: 0.9 }
    }
}

/// Per-parameter-vector optimizer state.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    rule: Optimizer,
    velocity: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(rule: Optimizer, param_count: usize) -> Self {
        OptimizerState {
            rule,
            velocity: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.step += 1;
        match self.rule {
            Optimizer::Sgd { momentum } => {
                for ((p, v), g) in params
                    .iter_mut()
                    .zip(self.velocity.iter_mut())
                    .zip(grads.iter())
                {
                    *v = momentum * *v - lr * g;
                    *p += *v;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = self.step as f64;
                let corr1 = 1.0 - beta1.powi(t as i32);
                let corr2 = 1.0 - beta2.powi(t as i32);
                for (((p, m), v), g) in params
                    .iter_mut()
                    .zip(self.velocity.iter_mut())
                    .zip(self.second_moment.iter_mut())
                    .zip(grads.iter())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let mhat = *m / corr1;
                    let vhat = *v / corr2;
                    *p -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
}
