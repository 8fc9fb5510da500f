//! Bradley-Terry reward learning.
//!
//! A reward network maps one (state, action) step to a bounded scalar; a
//! segment's predicted return is the sum over its steps. Preferences are
//! modeled with the Bradley-Terry probability
//! `P(t1 > t2) = exp(G1) / (exp(G1) + exp(G2))`, evaluated in the stable
//! `sigmoid(G1 - G2)` form, and trained by gradient descent on the
//! cross-entropy between observed labels and predicted probabilities.
//! An ensemble of independently initialized networks provides the
//! uncertainty estimate used by the uncertainty-aware noise model.

use alloc::vec;
use alloc::vec::Vec;
// Inherent float methods only exist with std; the Float trait fills in for no_std builds.
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;

use crate::envs::{Trajectory, TrajectoryPair};
use crate::error::{Error, Result};
use crate::mathutil::sigmoid;
use crate::nn::{
    assign_params, collect_params, tanh_backward, tanh_forward, Linear, OptimizerState,
};
pub use crate::nn::Optimizer;
use crate::rng::{rng_stream, SeededRng};
use crate::teachers::LabeledPreference;

/// Predicted probabilities are clamped this far away from {0, 1} inside the
/// cross-entropy loss.
pub const PROB_CLAMP: f64 = 1e-7;

/// Default hidden layout: two tanh layers of 64 units.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

/// Anything that scores a single environment step; segment returns follow by
/// summation. Implemented by one network and by an ensemble (member mean).
pub trait RewardModel {
    fn step_reward(&self, state: &[f64], action: &[f64]) -> f64;

    fn segment_return(&self, traj: &Trajectory) -> f64 {
        (0..traj.len())
            .map(|t| self.step_reward(traj.state(t), traj.action(t)))
            .sum()
    }
}

/// Dense reward network: tanh hidden layers and a tanh-bounded scalar output
/// in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RewardNet {
    layers: Vec<Linear>,
    input_dim: usize,
}

impl RewardNet {
    /// Network with the default 64-64 hidden layout.
    pub fn new(input_dim: usize, rng: &mut SeededRng) -> Self {
        Self::with_hidden(input_dim, &DEFAULT_HIDDEN, rng)
    }

    /// Network with an explicit hidden layout; an empty slice gives a single
    /// tanh-wrapped affine map.
    pub fn with_hidden(input_dim: usize, hidden: &[usize], rng: &mut SeededRng) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &h in hidden {
            layers.push(Linear::init(prev, h, rng));
            prev = h;
        }
        layers.push(Linear::init(prev, 1, rng));
        RewardNet { layers, input_dim }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Linear::param_count).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        collect_params(&self.layers)
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        assign_params(&mut self.layers, flat);
        Ok(())
    }

    /// Scalar reward for one concatenated (state, action) input.
    pub fn reward(&self, input: &[f64]) -> f64 {
        debug_assert_eq!(input.len(), self.input_dim);
        let mut cur = input.to_vec();
        for layer in &self.layers {
            let mut pre = vec![0.0; layer.out_dim];
            layer.forward(&cur, &mut pre);
            let mut act = vec![0.0; layer.out_dim];
            tanh_forward(&pre, &mut act);
            cur = act;
        }
        cur[0]
    }

    /// Forward pass keeping every activation, input first.
    fn forward_cached(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let mut pre = vec![0.0; layer.out_dim];
            layer.forward(acts.last().unwrap(), &mut pre);
            let mut act = vec![0.0; layer.out_dim];
            tanh_forward(&pre, &mut act);
            acts.push(act);
        }
        acts
    }

    /// Accumulates dL/dparams for one step given dL/d(output scalar).
    fn backward_step(&self, acts: &[Vec<f64>], out_grad: f64, grads: &mut [LayerGrad]) {
        let mut grad_act = vec![out_grad];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let activation = &acts[idx + 1];
            let mut grad_pre = vec![0.0; layer.out_dim];
            tanh_backward(activation, &grad_act, &mut grad_pre);
            grad_act = layer.backward(&acts[idx], &grad_pre, &mut grads[idx].w, &mut grads[idx].b);
        }
    }

    fn zero_grads(&self) -> Vec<LayerGrad> {
        self.layers
            .iter()
            .map(|l| LayerGrad {
                w: vec![0.0; l.w.len()],
                b: vec![0.0; l.b.len()],
            })
            .collect()
    }
}

impl RewardModel for RewardNet {
    fn step_reward(&self, state: &[f64], action: &[f64]) -> f64 {
        let mut input = Vec::with_capacity(state.len() + action.len());
        input.extend_from_slice(state);
        input.extend_from_slice(action);
        self.reward(&input)
    }
}

struct LayerGrad {
    w: Vec<f64>,
    b: Vec<f64>,
}

fn flatten_grads(grads: &[LayerGrad]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend_from_slice(&g.w);
        out.extend_from_slice(&g.b);
    }
    out
}

/// Predicted segment return under a reward model.
pub fn predicted_return<M: RewardModel + ?Sized>(model: &M, traj: &Trajectory) -> f64 {
    model.segment_return(traj)
}

/// Bradley-Terry probability of preferring the first segment. The ratio of
/// exponentiated returns is evaluated as `sigmoid(G1 - G2)`, which is its
/// numerically stable log-sum-exp reduction.
pub fn bt_prob<M: RewardModel + ?Sized>(model: &M, pair: &TrajectoryPair) -> f64 {
    bt_prob_from_returns(
        model.segment_return(pair.first()),
        model.segment_return(pair.second()),
    )
}

/// Bradley-Terry probability from two segment returns.
pub fn bt_prob_from_returns(g1: f64, g2: f64) -> f64 {
    sigmoid(g1 - g2)
}

fn clamped(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean cross-entropy between observed labels and predicted preference
/// probabilities, with probabilities clamped away from {0, 1}.
pub fn ce_loss<M: RewardModel + ?Sized>(model: &M, batch: &[LabeledPreference]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("preference batch"));
    }
    let mut total = 0.0;
    for sample in batch {
        let p = clamped(bt_prob(model, &sample.pair));
        let y = sample.observed.as_y();
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(total / batch.len() as f64)
}

/// Cross-entropy loss and its analytic gradient with respect to the
/// network's flat parameter vector.
pub fn ce_loss_and_grad(net: &RewardNet, batch: &[LabeledPreference]) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("preference batch"));
    }
    let mut grads = net.zero_grads();
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for sample in batch {
        let (g1, acts1) = segment_forward(net, sample.pair.first());
        let (g2, acts2) = segment_forward(net, sample.pair.second());
        let p = sigmoid(g1 - g2);
        let y = sample.observed.as_y();
        let pc = clamped(p);
        loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        let err = (p - y) * scale;
        for acts in &acts1 {
            net.backward_step(acts, err, &mut grads);
        }
        for acts in &acts2 {
            net.backward_step(acts, -err, &mut grads);
        }
    }
    Ok((loss * scale, flatten_grads(&grads)))
}

/// Forward over every step of a segment keeping activations for backprop.
fn segment_forward(net: &RewardNet, traj: &Trajectory) -> (f64, Vec<Vec<Vec<f64>>>) {
    let mut sum = 0.0;
    let mut all = Vec::with_capacity(traj.len());
    let mut input = vec![0.0; net.input_dim()];
    for t in 0..traj.len() {
        let s = traj.state(t);
        let a = traj.action(t);
        input[..s.len()].copy_from_slice(s);
        input[s.len()..].copy_from_slice(a);
        let acts = net.forward_cached(&input);
        sum += acts.last().unwrap()[0];
        all.push(acts);
    }
    (sum, all)
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs_per_update: usize,
    /// Ensemble size K.
    pub ensemble_size: usize,
    pub optimizer: Optimizer,
    /// L2 penalty on parameters. The Bradley-Terry loss only constrains
    /// return differences, so without it the bounded outputs drift into
    /// saturation and the pointwise reward landscape flattens out.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.02,
            batch_size: 32,
            epochs_per_update: 10,
            ensemble_size: 3,
            optimizer: Optimizer::default(),
            weight_decay: 3e-2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.ensemble_size == 0 {
            return Err(Error::InvalidConfig(
                "learning_rate, batch_size and ensemble_size must be positive".into(),
            ));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig("weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// K independently initialized reward networks plus their optimizer state.
#[derive(Debug, Clone)]
pub struct RewardEnsemble {
    members: Vec<RewardNet>,
    optimizers: Vec<OptimizerState>,
    updates: u64,
}

impl RewardEnsemble {
    pub fn new(input_dim: usize, cfg: &TrainConfig) -> Self {
        Self::with_hidden(input_dim, &DEFAULT_HIDDEN, cfg)
    }

    pub fn with_hidden(input_dim: usize, hidden: &[usize], cfg: &TrainConfig) -> Self {
        let members: Vec<RewardNet> = (0..cfg.ensemble_size)
            .map(|k| {
                let mut rng = rng_stream(cfg.seed, k as u64);
                RewardNet::with_hidden(input_dim, hidden, &mut rng)
            })
            .collect();
        let optimizers = members
            .iter()
            .map(|m| OptimizerState::new(cfg.optimizer.clone(), m.param_count()))
            .collect();
        RewardEnsemble {
            members,
            optimizers,
            updates: 0,
        }
    }

    pub fn members(&self) -> &[RewardNet] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

impl RewardModel for RewardEnsemble {
    fn step_reward(&self, state: &[f64], action: &[f64]) -> f64 {
        self.members
            .iter()
            .map(|m| m.step_reward(state, action))
            .sum::<f64>()
            / self.members.len() as f64
    }

    fn segment_return(&self, traj: &Trajectory) -> f64 {
        self.members
            .iter()
            .map(|m| m.segment_return(traj))
            .sum::<f64>()
            / self.members.len() as f64
    }
}

/// Per-member, per-epoch mean training losses from one update.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    /// `epoch_losses[member][epoch]`.
    pub epoch_losses: Vec<Vec<f64>>,
}

impl LossReport {
    /// Final-epoch loss per member.
    pub fn final_losses(&self) -> Vec<f64> {
        self.epoch_losses
            .iter()
            .map(|m| m.last().copied().unwrap_or(0.0))
            .collect()
    }
}

/// Trains every member on its own shuffled minibatches of the batch. Members
/// draw independent shuffling streams, so the ensemble stays diverse.
pub fn train_update(
    ensemble: &mut RewardEnsemble,
    batch: &[LabeledPreference],
    cfg: &TrainConfig,
) -> Result<LossReport> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("preference batch"));
    }
    cfg.validate()?;
    let mut epoch_losses = Vec::with_capacity(ensemble.members.len());
    let update_round = ensemble.updates;
    for (k, (member, opt)) in ensemble
        .members
        .iter_mut()
        .zip(ensemble.optimizers.iter_mut())
        .enumerate()
    {
        let mut rng = rng_stream(cfg.seed ^ update_round.wrapping_mul(0x9e37_79b9), k as u64);
        let mut losses = Vec::with_capacity(cfg.epochs_per_update);
        let mut indices: Vec<usize> = (0..batch.len()).collect();
        for epoch in 0..cfg.epochs_per_update {
            indices.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut minibatches = 0usize;
            for chunk in indices.chunks(cfg.batch_size) {
                let mini: Vec<LabeledPreference> =
                    chunk.iter().map(|&i| batch[i].clone()).collect();
                let (loss, mut grads) = ce_loss_and_grad(member, &mini)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { member: k, epoch });
                }
                let mut params = member.params();
                if cfg.weight_decay > 0.0 {
                    for (g, p) in grads.iter_mut().zip(params.iter()) {
                        *g += cfg.weight_decay * p;
                    }
                }
                opt.apply(&mut params, &grads, cfg.learning_rate);
                member.set_params(&params)?;
                epoch_loss += loss;
                minibatches += 1;
            }
            losses.push(epoch_loss / minibatches.max(1) as f64);
        }
        epoch_losses.push(losses);
    }
    ensemble.updates += 1;
    Ok(LossReport { epoch_losses })
}

/// Ensemble uncertainty for a pair: the member-mean absolute difference of
/// predicted segment returns. Lower values mean higher uncertainty.
pub fn ensemble_uncertainty(ensemble: &RewardEnsemble, pair: &TrajectoryPair) -> f64 {
    ensemble
        .members
        .iter()
        .map(|m| (m.segment_return(pair.first()) - m.segment_return(pair.second())).abs())
        .sum::<f64>()
        / ensemble.members.len() as f64
}

/// Which label a model prediction is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelView {
    Observed,
    GroundTruth,
}

/// Fraction of pairs whose predicted preference (probability >= 0.5 means
/// "first") matches the chosen label.
pub fn preference_accuracy<M: RewardModel + ?Sized>(
    model: &M,
    prefs: &[LabeledPreference],
    view: LabelView,
) -> f64 {
    if prefs.is_empty() {
        return 1.0;
    }
    let hits = prefs
        .iter()
        .filter(|lp| {
            let predicted_first = bt_prob(model, &lp.pair) >= 0.5;
            let target = match view {
                LabelView::Observed => lp.observed,
                LabelView::GroundTruth => lp.ground_truth,
            };
            predicted_first == (target == crate::teachers::PreferenceLabel::First)
        })
        .count();
    hits as f64 / prefs.len() as f64
}
