//! Trajectory embeddings from a small dense variational autoencoder.
//!
//! The encoder consumes a trajectory's flattened (states, actions) features,
//! produces a Gaussian posterior over a low-dimensional code, and a decoder
//! reconstructs the features from a sampled code. Training minimizes
//! reconstruction error plus the KL of the posterior against a standard
//! normal, by plain SGD with a fixed learning rate. At inference [`encode`]
//! returns the posterior mean, never a sample, so latent-space distances are
//! deterministic and the noise model built on them is reproducible.

use alloc::vec;
use alloc::vec::Vec;
// Inherent float methods only exist with std; the Float trait fills in for no_std builds.
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;

use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::nn::{assign_params, collect_params, tanh_backward, tanh_forward, Linear};
use crate::rng::{rng_stream, standard_normal, SeededRng};

/// Autoencoder layout and training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub embedding_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub kl_weight: f64,
    pub reconstruction_weight: f64,
    pub seed: u64,
}

impl EncoderConfig {
    /// Defaults sized for desk-scale trajectories.
    pub fn new(input_dim: usize, embedding_dim: usize) -> Self {
        EncoderConfig {
            input_dim,
            embedding_dim,
            hidden_dims: vec![32],
            learning_rate: 1e-4,
            epochs: 200,
            batch_size: 64,
            kl_weight: 1.0,
            reconstruction_weight: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.embedding_dim == 0 || self.hidden_dims.iter().any(|&d| d == 0)
        {
            return Err(Error::InvalidConfig("encoder dimensions must be >= 1".into()));
        }
        if self.embedding_dim >= self.input_dim {
            return Err(Error::InvalidConfig(alloc::format!(
                "embedding_dim {} must be smaller than input_dim {}",
                self.embedding_dim,
                self.input_dim
            )));
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(
                "batch_size and learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Encoder/decoder parameters. Obtain a trained one from [`train_encoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    trunk: Vec<Linear>,
    mu_head: Linear,
    logvar_head: Linear,
    dec_hidden: Vec<Linear>,
    dec_out: Linear,
    input_dim: usize,
    embedding_dim: usize,
    hidden_dims: Vec<usize>,
    trained: bool,
}

impl Encoder {
    /// Freshly initialized (untrained) autoencoder.
    pub fn init(cfg: &EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_stream(cfg.seed, 0);
        let mut trunk = Vec::new();
        let mut prev = cfg.input_dim;
        for &h in &cfg.hidden_dims {
            trunk.push(Linear::init(prev, h, &mut rng));
            prev = h;
        }
        let mu_head = Linear::init(prev, cfg.embedding_dim, &mut rng);
        let logvar_head = Linear::init(prev, cfg.embedding_dim, &mut rng);
        let mut dec_hidden = Vec::new();
        let mut dprev = cfg.embedding_dim;
        for &h in cfg.hidden_dims.iter().rev() {
            dec_hidden.push(Linear::init(dprev, h, &mut rng));
            dprev = h;
        }
        let dec_out = Linear::init(dprev, cfg.input_dim, &mut rng);
        Ok(Encoder {
            trunk,
            mu_head,
            logvar_head,
            dec_hidden,
            dec_out,
            input_dim: cfg.input_dim,
            embedding_dim: cfg.embedding_dim,
            hidden_dims: cfg.hidden_dims.clone(),
            trained: false,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn hidden_dims(&self) -> &[usize] {
        &self.hidden_dims
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Deterministic embedding of a trajectory: the posterior mean.
    pub fn encode(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        if traj.feature_len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: traj.feature_len(),
            });
        }
        let features: Vec<f64> = traj.features().collect();
        Ok(self.encode_features(&features))
    }

    fn encode_features(&self, x: &[f64]) -> Vec<f64> {
        let h = self.trunk_forward(x);
        let mut mu = vec![0.0; self.embedding_dim];
        self.mu_head.forward(&h, &mut mu);
        mu
    }

    fn trunk_forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for layer in &self.trunk {
            let mut pre = vec![0.0; layer.out_dim];
            layer.forward(&cur, &mut pre);
            let mut act = vec![0.0; layer.out_dim];
            tanh_forward(&pre, &mut act);
            cur = act;
        }
        cur
    }

    fn decode(&self, z: &[f64]) -> Vec<f64> {
        let mut cur = z.to_vec();
        for layer in &self.dec_hidden {
            let mut pre = vec![0.0; layer.out_dim];
            layer.forward(&cur, &mut pre);
            let mut act = vec![0.0; layer.out_dim];
            tanh_forward(&pre, &mut act);
            cur = act;
        }
        let mut out = vec![0.0; self.dec_out.out_dim];
        self.dec_out.forward(&cur, &mut out);
        out
    }

    /// All layers in a fixed order, for parameter flattening.
    fn layers(&self) -> Vec<&Linear> {
        let mut v: Vec<&Linear> = self.trunk.iter().collect();
        v.push(&self.mu_head);
        v.push(&self.logvar_head);
        v.extend(self.dec_hidden.iter());
        v.push(&self.dec_out);
        v
    }

    fn layers_mut(&mut self) -> Vec<&mut Linear> {
        let mut v: Vec<&mut Linear> = self.trunk.iter_mut().collect();
        v.push(&mut self.mu_head);
        v.push(&mut self.logvar_head);
        v.extend(self.dec_hidden.iter_mut());
        v.push(&mut self.dec_out);
        v
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// Flat parameter vector (weights then biases, layer by layer).
    pub fn params(&self) -> Vec<f64> {
        let owned: Vec<Linear> = self.layers().into_iter().cloned().collect();
        collect_params(&owned)
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut owned: Vec<Linear> = self.layers().into_iter().cloned().collect();
        assign_params(&mut owned, flat);
        for (dst, src) in self.layers_mut().into_iter().zip(owned.into_iter()) {
            *dst = src;
        }
        Ok(())
    }

    /// Rebuilds a trained encoder from its architecture and parameters, as
    /// used by the parameter-file round trip.
    pub fn from_parts(
        input_dim: usize,
        embedding_dim: usize,
        hidden_dims: Vec<usize>,
        params: &[f64],
    ) -> Result<Self> {
        let mut cfg = EncoderConfig::new(input_dim, embedding_dim);
        cfg.hidden_dims = hidden_dims;
        let mut enc = Encoder::init(&cfg)?;
        enc.set_params(params)?;
        enc.trained = true;
        Ok(enc)
    }
}

/// Mean squared reconstruction error (summed over feature dimensions,
/// averaged over trajectories) using the deterministic posterior mean.
pub fn reconstruction_loss(enc: &Encoder, trajs: &[Trajectory]) -> Result<f64> {
    if trajs.is_empty() {
        return Err(Error::EmptyInput("trajectories"));
    }
    let mut total = 0.0;
    for traj in trajs {
        if traj.feature_len() != enc.input_dim {
            return Err(Error::DimensionMismatch {
                expected: enc.input_dim,
                got: traj.feature_len(),
            });
        }
        let x: Vec<f64> = traj.features().collect();
        let xhat = enc.decode(&enc.encode_features(&x));
        total += x
            .iter()
            .zip(xhat.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / trajs.len() as f64)
}

/// Trains an autoencoder on the collected trajectories. Deterministic under
/// the config seed.
pub fn train_encoder(trajs: &[Trajectory], cfg: &EncoderConfig) -> Result<Encoder> {
    cfg.validate()?;
    if trajs.len() < cfg.batch_size {
        return Err(Error::BufferTooSmall {
            len: trajs.len(),
            needed: cfg.batch_size,
        });
    }
    let data: Vec<Vec<f64>> = trajs
        .iter()
        .map(|t| {
            if t.feature_len() != cfg.input_dim {
                Err(Error::DimensionMismatch {
                    expected: cfg.input_dim,
                    got: t.feature_len(),
                })
            } else {
                Ok(t.features().collect())
            }
        })
        .collect::<Result<_>>()?;

    let mut enc = Encoder::init(cfg)?;
    let mut rng = rng_stream(cfg.seed, 1);
    let mut indices: Vec<usize> = (0..data.len()).collect();
    for _epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        for chunk in indices.chunks(cfg.batch_size) {
            sgd_minibatch(&mut enc, &data, chunk, cfg, &mut rng);
        }
    }
    enc.trained = true;
    Ok(enc)
}

/// One SGD step on a minibatch; gradients are averaged over the chunk.
fn sgd_minibatch(
    enc: &mut Encoder,
    data: &[Vec<f64>],
    chunk: &[usize],
    cfg: &EncoderConfig,
    rng: &mut SeededRng,
) {
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = enc
        .layers()
        .iter()
        .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
        .collect();
    let scale = 1.0 / chunk.len() as f64;
    for &i in chunk {
        let noise: Vec<f64> = (0..enc.embedding_dim).map(|_| standard_normal(rng)).collect();
        backward_sample(enc, &data[i], &noise, scale, cfg, &mut grads);
    }
    let lr = cfg.learning_rate;
    for (layer, (gw, gb)) in enc.layers_mut().into_iter().zip(grads.iter()) {
        for (w, g) in layer.w.iter_mut().zip(gw.iter()) {
            *w -= lr * g;
        }
        for (b, g) in layer.b.iter_mut().zip(gb.iter()) {
            *b -= lr * g;
        }
    }
}

/// Accumulates gradients of `scale * (rec_w * ||xhat - x||^2 + kl_w * KL)`
/// for one sample with the given reparameterization noise. Gradient slots
/// follow [`Encoder::layers`] order.
fn backward_sample(
    enc: &Encoder,
    x: &[f64],
    noise: &[f64],
    scale: f64,
    cfg: &EncoderConfig,
    grads: &mut [(Vec<f64>, Vec<f64>)],
) {
    let n_trunk = enc.trunk.len();
    let n_dec = enc.dec_hidden.len();

    // Forward with caches.
    let mut trunk_acts: Vec<Vec<f64>> = Vec::with_capacity(n_trunk + 1);
    trunk_acts.push(x.to_vec());
    for layer in &enc.trunk {
        let mut pre = vec![0.0; layer.out_dim];
        layer.forward(trunk_acts.last().unwrap(), &mut pre);
        let mut act = vec![0.0; layer.out_dim];
        tanh_forward(&pre, &mut act);
        trunk_acts.push(act);
    }
    let h = trunk_acts.last().unwrap().clone();
    let mut mu = vec![0.0; enc.embedding_dim];
    enc.mu_head.forward(&h, &mut mu);
    let mut logvar = vec![0.0; enc.embedding_dim];
    enc.logvar_head.forward(&h, &mut logvar);
    let sigma: Vec<f64> = logvar.iter().map(|lv| (0.5 * lv).exp()).collect();
    let z: Vec<f64> = mu
        .iter()
        .zip(sigma.iter())
        .zip(noise.iter())
        .map(|((m, s), e)| m + s * e)
        .collect();
    let mut dec_acts: Vec<Vec<f64>> = Vec::with_capacity(n_dec + 1);
    dec_acts.push(z.clone());
    for layer in &enc.dec_hidden {
        let mut pre = vec![0.0; layer.out_dim];
        layer.forward(dec_acts.last().unwrap(), &mut pre);
        let mut act = vec![0.0; layer.out_dim];
        tanh_forward(&pre, &mut act);
        dec_acts.push(act);
    }
    let mut xhat = vec![0.0; enc.dec_out.out_dim];
    enc.dec_out.forward(dec_acts.last().unwrap(), &mut xhat);

    // Backward. Gradient slot layout: trunk.., mu, logvar, dec_hidden.., dec_out.
    let mu_slot = n_trunk;
    let logvar_slot = n_trunk + 1;
    let dec_base = n_trunk + 2;
    let out_slot = dec_base + n_dec;

    let gxhat: Vec<f64> = xhat
        .iter()
        .zip(x.iter())
        .map(|(xh, xi)| scale * cfg.reconstruction_weight * 2.0 * (xh - xi))
        .collect();
    let (gw, gb) = &mut grads[out_slot];
    let mut grad_act = enc.dec_out.backward(dec_acts.last().unwrap(), &gxhat, gw, gb);
    for (rev, layer) in enc.dec_hidden.iter().enumerate().rev() {
        let mut grad_pre = vec![0.0; layer.out_dim];
        tanh_backward(&dec_acts[rev + 1], &grad_act, &mut grad_pre);
        let (gw, gb) = &mut grads[dec_base + rev];
        grad_act = layer.backward(&dec_acts[rev], &grad_pre, gw, gb);
    }
    let gz = grad_act;

    let kw = scale * cfg.kl_weight;
    let gmu: Vec<f64> = gz.iter().zip(mu.iter()).map(|(g, m)| g + kw * m).collect();
    let glogvar: Vec<f64> = gz
        .iter()
        .zip(sigma.iter())
        .zip(noise.iter())
        .zip(logvar.iter())
        .map(|(((g, s), e), lv)| g * e * 0.5 * s + kw * 0.5 * (lv.exp() - 1.0))
        .collect();

    let (gw, gb) = &mut grads[mu_slot];
    let gh_mu = enc.mu_head.backward(&h, &gmu, gw, gb);
    let (gw, gb) = &mut grads[logvar_slot];
    let gh_lv = enc.logvar_head.backward(&h, &glogvar, gw, gb);
    let mut grad_act: Vec<f64> = gh_mu.iter().zip(gh_lv.iter()).map(|(a, b)| a + b).collect();
    for (rev, layer) in enc.trunk.iter().enumerate().rev() {
        let mut grad_pre = vec![0.0; layer.out_dim];
        tanh_backward(&trunk_acts[rev + 1], &grad_act, &mut grad_pre);
        let (gw, gb) = &mut grads[rev];
        grad_act = layer.backward(&trunk_acts[rev], &grad_pre, gw, gb);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_env, EnvSpec, UniformRandomPolicy};
    use crate::rng::rng_from_seed;

    fn sample_trajectories(n: usize) -> Vec<Trajectory> {
        let env = make_env(EnvSpec::gridworld(6, 5)).unwrap();
        let mut rng = rng_from_seed(41);
        (0..n).map(|_| env.rollout(&UniformRandomPolicy, &mut rng)).collect()
    }

    fn small_cfg(input_dim: usize) -> EncoderConfig {
        let mut cfg = EncoderConfig::new(input_dim, 4);
        cfg.hidden_dims = vec![16];
        cfg.epochs = 60;
        cfg.batch_size = 16;
        cfg.learning_rate = 1e-3;
        cfg
    }

    #[test]
    fn training_reduces_reconstruction_loss() {
        let trajs = sample_trajectories(80);
        let cfg = small_cfg(trajs[0].feature_len());
        let initial = reconstruction_loss(&Encoder::init(&cfg).unwrap(), &trajs).unwrap();
        let enc = train_encoder(&trajs, &cfg).unwrap();
        let trained = reconstruction_loss(&enc, &trajs).unwrap();
        assert!(trained < initial, "trained {trained} vs initial {initial}");
        assert!(enc.is_trained());
    }

    #[test]
    fn training_is_deterministic() {
        let trajs = sample_trajectories(40);
        let mut cfg = small_cfg(trajs[0].feature_len());
        cfg.epochs = 10;
        let a = train_encoder(&trajs, &cfg).unwrap();
        let b = train_encoder(&trajs, &cfg).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn embedding_dim_must_shrink() {
        let cfg = EncoderConfig::new(8, 8);
        assert!(matches!(Encoder::init(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn too_few_trajectories_is_an_error() {
        let trajs = sample_trajectories(4);
        let cfg = small_cfg(trajs[0].feature_len());
        assert!(matches!(
            train_encoder(&trajs, &cfg),
            Err(Error::BufferTooSmall { .. })
        ));
    }

    #[test]
    fn encode_is_deterministic_and_sized() {
        let trajs = sample_trajectories(20);
        let mut cfg = small_cfg(trajs[0].feature_len());
        cfg.epochs = 5;
        cfg.batch_size = 8;
        let enc = train_encoder(&trajs, &cfg).unwrap();
        let a = enc.encode(&trajs[0]).unwrap();
        let b = enc.encode(&trajs[0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), cfg.embedding_dim);
    }

    #[test]
    fn encode_rejects_mismatched_dims() {
        let trajs = sample_trajectories(20);
        let mut cfg = small_cfg(trajs[0].feature_len());
        cfg.epochs = 2;
        cfg.batch_size = 8;
        let enc = train_encoder(&trajs, &cfg).unwrap();
        let env = make_env(EnvSpec::gridworld(6, 9)).unwrap();
        let other = env.rollout(&UniformRandomPolicy, &mut rng_from_seed(1));
        assert!(matches!(
            enc.encode(&other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn params_round_trip_through_from_parts() {
        let trajs = sample_trajectories(20);
        let mut cfg = small_cfg(trajs[0].feature_len());
        cfg.epochs = 3;
        cfg.batch_size = 8;
        let enc = train_encoder(&trajs, &cfg).unwrap();
        let rebuilt = Encoder::from_parts(
            enc.input_dim(),
            enc.embedding_dim(),
            enc.hidden_dims().to_vec(),
            &enc.params(),
        )
        .unwrap();
        assert_eq!(enc.encode(&trajs[3]).unwrap(), rebuilt.encode(&trajs[3]).unwrap());
    }

    /// Full-model gradient check with reparameterization noise pinned, so the
    /// loss is a deterministic function of the parameters.
    #[test]
    fn vae_gradients_match_finite_differences() {
        let mut cfg = EncoderConfig::new(6, 2);
        cfg.hidden_dims = vec![5];
        cfg.learning_rate = 1e-3;
        let mut enc = Encoder::init(&cfg).unwrap();
        let x = [0.4, -0.2, 0.9, 0.1, -0.6, 0.3];
        let noise = [0.7, -1.1];

        let loss_of = |enc: &Encoder| {
            let h = enc.trunk_forward(&x);
            let mut mu = vec![0.0; 2];
            enc.mu_head.forward(&h, &mut mu);
            let mut logvar = vec![0.0; 2];
            enc.logvar_head.forward(&h, &mut logvar);
            let z: Vec<f64> = mu
                .iter()
                .zip(logvar.iter())
                .zip(noise.iter())
                .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
                .collect();
            let xhat = enc.decode(&z);
            let rec: f64 = xhat.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let kl: f64 = -0.5
                * mu.iter()
                    .zip(logvar.iter())
                    .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
                    .sum::<f64>();
            cfg.reconstruction_weight * rec + cfg.kl_weight * kl
        };

        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = enc
            .layers()
            .iter()
            .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
            .collect();
        backward_sample(&enc, &x, &noise, 1.0, &cfg, &mut grads);
        let mut flat_analytic = Vec::new();
        for (gw, gb) in &grads {
            flat_analytic.extend_from_slice(gw);
            flat_analytic.extend_from_slice(gb);
        }

        let params = enc.params();
        let h = 1e-6;
        for k in 0..params.len() {
            let mut plus = params.clone();
            plus[k] += h;
            enc.set_params(&plus).unwrap();
            let lp = loss_of(&enc);
            let mut minus = params.clone();
            minus[k] -= h;
            enc.set_params(&minus).unwrap();
            let lm = loss_of(&enc);
            enc.set_params(&params).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let denom = fd.abs().max(flat_analytic[k].abs()).max(1e-6);
            assert!(
                ((flat_analytic[k] - fd) / denom).abs() < 1e-3,
                "param {k}: analytic {} fd {fd}",
                flat_analytic[k]
            );
        }
    }
}
