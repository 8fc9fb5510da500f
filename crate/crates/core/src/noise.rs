//! Feature-dependent noise functions and their application to label batches.
//!
//! Every noise model is a map from a trajectory pair (and sometimes the
//! current reward ensemble) to a flip probability or a flip-priority score:
//!
//! - uniform: constant flip probability;
//! - similarity: flip probability `min(1, 1 / d^2)` where `d` is the L2
//!   distance between flattened trajectory features, or between autoencoder
//!   embeddings for the latent variant;
//! - magnitude: `sigmoid(beta * ln(1 + |delta|) * sign(delta))` where
//!   `delta` is the difference of time-averaged feature-subset norms;
//! - uncertainty: pairs with the smallest ensemble return differences are
//!   flipped first;
//! - adversarial: pairs are flipped where the KL divergence between the
//!   always-wrong teacher and the model's predicted preference is smallest,
//!   i.e. exactly where a KL-based denoiser is least likely to object;
//! - hybrid: an affine mix of a rank-normalized feature score and a
//!   rank-normalized uncertainty score.
//!
//! Threshold-based kinds flip exactly `floor(rate * n)` pairs per batch;
//! Bernoulli kinds rescale their raw probabilities so the batch mean hits
//! the target rate, then sample one flip decision per pair.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
// Inherent float methods only exist with std; the Float trait fills in for no_std builds.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::envs::TrajectoryPair;
use crate::error::{Error, Result};
use crate::latent::Encoder;
use crate::mathutil::{bernoulli_kl, mean, sigmoid, sign, squared_distance, ONE_HOT_SMOOTHING};
use crate::reward::{bt_prob, ensemble_uncertainty, RewardEnsemble};
use crate::rng::SeededRng;
use crate::teachers::LabeledPreference;

/// Distance space for similarity noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMetric {
    /// L2 on flattened (states, actions) features.
    L2,
    /// L2 on autoencoder embeddings.
    Latent,
}

/// How Bernoulli-style kinds honor a noise budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateMode {
    /// Rescale raw probabilities so their batch mean equals the target rate.
    Calibrated(f64),
    /// Use raw probabilities as-is.
    Raw,
}

impl RateMode {
    pub fn target(&self) -> Option<f64> {
        match self {
            RateMode::Calibrated(eps) => Some(*eps),
            RateMode::Raw => None,
        }
    }
}

/// Tagged noise-model configuration; each variant carries exactly the
/// parameters its kind needs.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModelSpec {
    Uniform {
        target_rate: f64,
    },
    Similarity {
        metric: DistanceMetric,
        rate: RateMode,
        max_flips_per_batch: Option<usize>,
    },
    Magnitude {
        beta: f64,
        feature_subset: Vec<usize>,
        rate: RateMode,
        max_flips_per_batch: Option<usize>,
    },
    Uncertainty {
        target_rate: f64,
    },
    Adversarial {
        target_rate: f64,
    },
    Hybrid {
        alpha: f64,
        target_rate: f64,
        /// Feature-score component; similarity or magnitude.
        component: Box<NoiseModelSpec>,
    },
}

impl NoiseModelSpec {
    /// Stable name used in CSV output and config files.
    pub fn name(&self) -> String {
        match self {
            NoiseModelSpec::Uniform { .. } => "uniform".into(),
            NoiseModelSpec::Similarity { metric, .. } => match metric {
                DistanceMetric::L2 => "similarity_l2".into(),
                DistanceMetric::Latent => "similarity_latent".into(),
            },
            NoiseModelSpec::Magnitude { .. } => "magnitude".into(),
            NoiseModelSpec::Uncertainty { .. } => "uncertainty".into(),
            NoiseModelSpec::Adversarial { .. } => "adversarial".into(),
            NoiseModelSpec::Hybrid { component, .. } => {
                alloc::format!("hybrid_{}", component.name())
            }
        }
    }

    /// Configured target rate, when the kind has one.
    pub fn target_rate(&self) -> Option<f64> {
        match self {
            NoiseModelSpec::Uniform { target_rate }
            | NoiseModelSpec::Uncertainty { target_rate }
            | NoiseModelSpec::Adversarial { target_rate }
            | NoiseModelSpec::Hybrid { target_rate, .. } => Some(*target_rate),
            NoiseModelSpec::Similarity { rate, .. } | NoiseModelSpec::Magnitude { rate, .. } => {
                rate.target()
            }
        }
    }

    pub fn requires_ensemble(&self) -> bool {
        matches!(
            self,
            NoiseModelSpec::Uncertainty { .. }
                | NoiseModelSpec::Adversarial { .. }
                | NoiseModelSpec::Hybrid { .. }
        )
    }

    pub fn requires_encoder(&self) -> bool {
        match self {
            NoiseModelSpec::Similarity {
                metric: DistanceMetric::Latent,
                ..
            } => true,
            NoiseModelSpec::Hybrid { component, .. } => component.requires_encoder(),
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_rate = |eps: f64| {
            if (0.0..=1.0).contains(&eps) && !eps.is_nan() {
                Ok(())
            } else {
                Err(Error::ProbabilityOutOfRange(eps))
            }
        };
        match self {
            NoiseModelSpec::Uniform { target_rate }
            | NoiseModelSpec::Uncertainty { target_rate }
            | NoiseModelSpec::Adversarial { target_rate } => check_rate(*target_rate),
            NoiseModelSpec::Similarity { rate, .. } => {
                rate.target().map_or(Ok(()), check_rate)
            }
            NoiseModelSpec::Magnitude {
                beta,
                feature_subset,
                rate,
                ..
            } => {
                if !(*beta > 0.0) || !beta.is_finite() {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "magnitude beta must be positive and finite, got {beta}"
                    )));
                }
                if feature_subset.is_empty() {
                    return Err(Error::InvalidConfig(
                        "magnitude feature subset must be non-empty".into(),
                    ));
                }
                rate.target().map_or(Ok(()), check_rate)
            }
            NoiseModelSpec::Hybrid {
                alpha,
                target_rate,
                component,
            } => {
                if !(0.0..=1.0).contains(alpha) || alpha.is_nan() {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "hybrid alpha must lie in [0, 1], got {alpha}"
                    )));
                }
                check_rate(*target_rate)?;
                match component.as_ref() {
                    NoiseModelSpec::Similarity { .. } | NoiseModelSpec::Magnitude { .. } => {
                        component.validate()
                    }
                    other => Err(Error::InvalidConfig(alloc::format!(
                        "hybrid component must be a similarity or magnitude model, got {}",
                        other.name()
                    ))),
                }
            }
        }
    }

    /// The default feature subset for magnitude noise: the action dimensions
    /// of the concatenated per-step (state, action) vector.
    pub fn default_action_subset() -> Vec<usize> {
        alloc::vec![2, 3]
    }

    /// The same model with its target rate replaced; Bernoulli kinds switch
    /// to calibrated mode. Sweeps use this to scan one model over a rate
    /// grid.
    pub fn with_target_rate(&self, epsilon: f64) -> NoiseModelSpec {
        let mut out = self.clone();
        match &mut out {
            NoiseModelSpec::Uniform { target_rate }
            | NoiseModelSpec::Uncertainty { target_rate }
            | NoiseModelSpec::Adversarial { target_rate }
            | NoiseModelSpec::Hybrid { target_rate, .. } => *target_rate = epsilon,
            NoiseModelSpec::Similarity { rate, .. } | NoiseModelSpec::Magnitude { rate, .. } => {
                *rate = RateMode::Calibrated(epsilon)
            }
        }
        out
    }

    /// The eight standard noise models at a common target rate: uniform,
    /// both similarity metrics, magnitude, uncertainty, adversarial, and the
    /// two hybrid mixes.
    pub fn standard_suite(target_rate: f64) -> Vec<NoiseModelSpec> {
        alloc::vec![
            NoiseModelSpec::Uniform { target_rate },
            NoiseModelSpec::Similarity {
                metric: DistanceMetric::L2,
                rate: RateMode::Calibrated(target_rate),
                max_flips_per_batch: None,
            },
            NoiseModelSpec::Similarity {
                metric: DistanceMetric::Latent,
                rate: RateMode::Calibrated(target_rate),
                max_flips_per_batch: None,
            },
            NoiseModelSpec::Magnitude {
                beta: 1.0,
                feature_subset: Self::default_action_subset(),
                rate: RateMode::Calibrated(target_rate),
                max_flips_per_batch: None,
            },
            NoiseModelSpec::Uncertainty { target_rate },
            NoiseModelSpec::Adversarial { target_rate },
            NoiseModelSpec::Hybrid {
                alpha: 0.5,
                target_rate,
                component: Box::new(NoiseModelSpec::Similarity {
                    metric: DistanceMetric::L2,
                    rate: RateMode::Raw,
                    max_flips_per_batch: None,
                }),
            },
            NoiseModelSpec::Hybrid {
                alpha: 0.5,
                target_rate,
                component: Box::new(NoiseModelSpec::Magnitude {
                    beta: 1.0,
                    feature_subset: Self::default_action_subset(),
                    rate: RateMode::Raw,
                    max_flips_per_batch: None,
                }),
            },
        ]
    }
}

/// A pair's flip-priority score; smaller scores are flipped first. The flip
/// probability is filled in when a flip decision is actually made.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseScore {
    pub pair_index: usize,
    pub score: f64,
    pub flip_prob: f64,
}

impl NoiseScore {
    fn new(pair_index: usize, score: f64) -> Self {
        NoiseScore {
            pair_index,
            score,
            flip_prob: 0.0,
        }
    }
}

/// Similarity flip probability `min(1, 1 / d^2)`; identical inputs give 1.
pub fn similarity_flip_prob(
    pair: &TrajectoryPair,
    metric: DistanceMetric,
    encoder: Option<&Encoder>,
) -> Result<f64> {
    let d2 = pair_squared_distance(pair, metric, encoder)?;
    if d2 == 0.0 {
        Ok(1.0)
    } else {
        Ok((1.0 / d2).min(1.0))
    }
}

fn pair_squared_distance(
    pair: &TrajectoryPair,
    metric: DistanceMetric,
    encoder: Option<&Encoder>,
) -> Result<f64> {
    match metric {
        DistanceMetric::L2 => {
            if pair.first().feature_len() != pair.second().feature_len() {
                return Err(Error::LengthMismatch {
                    left: pair.first().feature_len(),
                    right: pair.second().feature_len(),
                });
            }
            Ok(pair
                .first()
                .features()
                .zip(pair.second().features())
                .map(|(a, b)| (a - b) * (a - b))
                .sum())
        }
        DistanceMetric::Latent => {
            let enc = encoder.ok_or(Error::MissingDependency(
                "latent similarity noise needs a trained encoder",
            ))?;
            let e1 = enc.encode(pair.first())?;
            let e2 = enc.encode(pair.second())?;
            Ok(squared_distance(&e1, &e2))
        }
    }
}

/// Magnitude flip probability
/// `sigmoid(beta * ln(1 + |delta|) * sign(delta))`, with `delta` the
/// difference of time-averaged per-step L2 norms over the feature subset.
pub fn magnitude_flip_prob(pair: &TrajectoryPair, beta: f64, subset: &[usize]) -> Result<f64> {
    let m1 = mean_subset_norm(pair.first(), subset)?;
    let m2 = mean_subset_norm(pair.second(), subset)?;
    let delta = m1 - m2;
    Ok(sigmoid(beta * (1.0 + delta.abs()).ln() * sign(delta)))
}

fn mean_subset_norm(traj: &crate::envs::Trajectory, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidConfig(
            "magnitude feature subset must be non-empty".into(),
        ));
    }
    let width = traj.state_dim() + traj.action_dim();
    if let Some(&bad) = subset.iter().find(|&&i| i >= width) {
        return Err(Error::InvalidConfig(alloc::format!(
            "feature subset index {bad} out of range for step width {width}"
        )));
    }
    let mut total = 0.0;
    for t in 0..traj.len() {
        let s = traj.state(t);
        let a = traj.action(t);
        let mut sq = 0.0;
        for &i in subset {
            let v = if i < s.len() { s[i] } else { a[i - s.len()] };
            sq += v * v;
        }
        total += sq.sqrt();
    }
    Ok(total / traj.len() as f64)
}

/// Uncertainty flip-priority scores: the ensemble-mean absolute return
/// difference per pair. Smaller difference, higher flip priority.
pub fn uncertainty_scores(batch: &[TrajectoryPair], ensemble: &RewardEnsemble) -> Vec<NoiseScore> {
    batch
        .iter()
        .enumerate()
        .map(|(i, pair)| NoiseScore::new(i, ensemble_uncertainty(ensemble, pair)))
        .collect()
}

/// Adversarial flip-priority scores: KL divergence between the smoothed
/// always-wrong teacher distribution and the ensemble's Bradley-Terry
/// prediction. Small divergence means a flip would look trustworthy to a
/// KL-based denoiser, so those pairs are flipped first. Needs ground-truth
/// labels, which makes this model purely diagnostic.
pub fn adversarial_scores(
    batch: &[LabeledPreference],
    ensemble: &RewardEnsemble,
) -> Vec<NoiseScore> {
    batch
        .iter()
        .enumerate()
        .map(|(i, sample)| {
            let p_first = bt_prob(ensemble, &sample.pair);
            let wrong = sample.ground_truth.reversed();
            let q_first = match wrong {
                crate::teachers::PreferenceLabel::First => 1.0 - ONE_HOT_SMOOTHING,
                crate::teachers::PreferenceLabel::Second => ONE_HOT_SMOOTHING,
            };
            NoiseScore::new(i, bernoulli_kl(q_first, p_first))
        })
        .collect()
}

/// Elementwise affine mix `alpha * feature + (1 - alpha) * uncertainty` of
/// two aligned score sequences. Inputs are expected on a comparable scale
/// (see [`rank_normalize`]).
pub fn hybrid_scores(
    alpha: f64,
    feature_scores: &[f64],
    uncertainty_scores: &[f64],
) -> Result<Vec<NoiseScore>> {
    if feature_scores.len() != uncertainty_scores.len() {
        return Err(Error::LengthMismatch {
            left: feature_scores.len(),
            right: uncertainty_scores.len(),
        });
    }
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(Error::InvalidConfig(alloc::format!(
            "hybrid alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(feature_scores
        .iter()
        .zip(uncertainty_scores.iter())
        .enumerate()
        .map(|(i, (f, u))| NoiseScore::new(i, alpha * f + (1.0 - alpha) * u))
        .collect())
}

/// Maps scores to ordinal ranks scaled to [0, 1]. Ties are broken by index,
/// so ranking is a strictly monotone relabeling of the (score, index) order
/// and top-k selections are preserved exactly.
pub fn rank_normalize(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return alloc::vec![0.0];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut out = alloc::vec![0.0; n];
    for (rank, &idx) in order.iter().enumerate() {
        out[idx] = rank as f64 / (n - 1) as f64;
    }
    out
}

/// Which side of the threshold gets flipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipDirection {
    FlipBelow,
    FlipAbove,
}

/// Number of flips a target rate implies for a batch of size `n`, with a
/// tolerance for floating-point representation of the product.
fn flip_count(epsilon: f64, n: usize) -> usize {
    let t = epsilon * n as f64;
    let k = if (t - t.round()).abs() < 1e-9 { t.round() } else { t.floor() };
    (k as usize).min(n)
}

/// Indices of the `floor(epsilon * n)` scores on the flip side, ties broken
/// by ascending pair index. Returned in ascending index order.
pub fn select_flips(scores: &[f64], epsilon: f64, direction: FlipDirection) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("scores"));
    }
    if !(0.0..=1.0).contains(&epsilon) || epsilon.is_nan() {
        return Err(Error::ProbabilityOutOfRange(epsilon));
    }
    let k = flip_count(epsilon, scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    match direction {
        FlipDirection::FlipBelow => {
            order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        }
        FlipDirection::FlipAbove => {
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        }
    }
    let mut selected: Vec<usize> = order.into_iter().take(k).collect();
    selected.sort_unstable();
    Ok(selected)
}

/// The score threshold whose flip side holds exactly `floor(epsilon * n)`
/// scores (boundary ties resolved by ascending pair index). With
/// `FlipBelow`, scores at or below the threshold flip; with `FlipAbove`,
/// scores at or above it do.
pub fn calibrate_threshold(
    scores: &[f64],
    epsilon: f64,
    direction: FlipDirection,
) -> Result<f64> {
    let selected = select_flips(scores, epsilon, direction)?;
    match direction {
        FlipDirection::FlipBelow => Ok(selected
            .iter()
            .map(|&i| scores[i])
            .fold(f64::NEG_INFINITY, f64::max)),
        FlipDirection::FlipAbove => Ok(selected
            .iter()
            .map(|&i| scores[i])
            .fold(f64::INFINITY, f64::min)),
    }
}

/// Scale factor `c` such that `mean(min(1, c * raw))` equals the target
/// rate, found by bisection; the map is monotone in `c`.
fn calibrate_bernoulli_scale(raw: &[f64], epsilon: f64) -> f64 {
    if epsilon <= 0.0 || raw.is_empty() {
        return 0.0;
    }
    let realized = |c: f64| mean(&raw.iter().map(|&p| (c * p).min(1.0)).collect::<Vec<f64>>());
    let mut hi = 1.0;
    let mut grow = 0;
    while realized(hi) < epsilon && grow < 80 {
        hi *= 4.0;
        grow += 1;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if realized(mid) < epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fraction of samples whose observed label disagrees with ground truth.
pub fn realized_flip_rate(batch: &[LabeledPreference]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    batch.iter().filter(|lp| lp.flipped).count() as f64 / batch.len() as f64
}

/// Applies a noise model to a batch of labeled preferences, flipping
/// observed labels and recording provenance.
///
/// Threshold kinds (uncertainty, adversarial, hybrid) flip exactly
/// `floor(rate * n)` pairs chosen by their scores against the current
/// ensemble. Bernoulli kinds (uniform, similarity, magnitude) draw one flip
/// decision per pair in index order, stopping once `max_flips_per_batch` is
/// reached; magnitude defaults that cap to `ceil(rate * n)`. A calibrated
/// rate of zero returns the batch untouched.
pub fn apply_noise(
    batch: Vec<LabeledPreference>,
    spec: &NoiseModelSpec,
    ensemble: Option<&RewardEnsemble>,
    encoder: Option<&Encoder>,
    rng: &mut SeededRng,
) -> Result<Vec<LabeledPreference>> {
    spec.validate()?;
    if batch.is_empty() {
        return Ok(batch);
    }
    if spec.target_rate() == Some(0.0) {
        return Ok(batch);
    }
    if spec.requires_ensemble() && ensemble.is_none() {
        return Err(Error::MissingDependency(
            "this noise kind scores pairs against a reward ensemble",
        ));
    }
    if spec.requires_encoder() && encoder.is_none() {
        return Err(Error::MissingDependency(
            "latent similarity noise needs a trained encoder",
        ));
    }

    let mut batch = batch;
    match spec {
        NoiseModelSpec::Uniform { target_rate } => {
            for lp in batch.iter_mut() {
                lp.flip_prob = *target_rate;
                if rng.gen::<f64>() < *target_rate {
                    lp.flip_observed();
                }
            }
        }
        NoiseModelSpec::Similarity {
            metric,
            rate,
            max_flips_per_batch,
        } => {
            let raw: Vec<f64> = batch
                .iter()
                .map(|lp| similarity_flip_prob(&lp.pair, *metric, encoder))
                .collect::<Result<_>>()?;
            bernoulli_flips(&mut batch, &raw, *rate, *max_flips_per_batch, rng);
        }
        NoiseModelSpec::Magnitude {
            beta,
            feature_subset,
            rate,
            max_flips_per_batch,
        } => {
            let raw: Vec<f64> = batch
                .iter()
                .map(|lp| magnitude_flip_prob(&lp.pair, *beta, feature_subset))
                .collect::<Result<_>>()?;
            let cap = max_flips_per_batch.or_else(|| {
                rate.target()
                    .map(|eps| (eps * batch.len() as f64).ceil() as usize)
            });
            bernoulli_flips(&mut batch, &raw, *rate, cap, rng);
        }
        NoiseModelSpec::Uncertainty { target_rate } => {
            let pairs: Vec<TrajectoryPair> = batch.iter().map(|lp| lp.pair.clone()).collect();
            let scores = uncertainty_scores(&pairs, ensemble.unwrap());
            let raw: Vec<f64> = scores.iter().map(|s| s.score).collect();
            threshold_flips(&mut batch, &raw, *target_rate)?;
        }
        NoiseModelSpec::Adversarial { target_rate } => {
            let scores = adversarial_scores(&batch, ensemble.unwrap());
            let raw: Vec<f64> = scores.iter().map(|s| s.score).collect();
            threshold_flips(&mut batch, &raw, *target_rate)?;
        }
        NoiseModelSpec::Hybrid {
            alpha,
            target_rate,
            component,
        } => {
            let feature_raw = component_feature_scores(&batch, component, encoder)?;
            let pairs: Vec<TrajectoryPair> = batch.iter().map(|lp| lp.pair.clone()).collect();
            let unc_raw: Vec<f64> = uncertainty_scores(&pairs, ensemble.unwrap())
                .iter()
                .map(|s| s.score)
                .collect();
            let combined =
                hybrid_scores(*alpha, &rank_normalize(&feature_raw), &rank_normalize(&unc_raw))?;
            let raw: Vec<f64> = combined.iter().map(|s| s.score).collect();
            threshold_flips(&mut batch, &raw, *target_rate)?;
        }
    }
    Ok(batch)
}

/// Feature-side raw scores for hybrid noise; smaller means flip first.
/// Similarity uses the squared distance (alike pairs flip first); magnitude
/// uses `1 - N` so pairs with large magnitude contrast flip first.
pub fn component_feature_scores(
    batch: &[LabeledPreference],
    component: &NoiseModelSpec,
    encoder: Option<&Encoder>,
) -> Result<Vec<f64>> {
    match component {
        NoiseModelSpec::Similarity { metric, .. } => batch
            .iter()
            .map(|lp| pair_squared_distance(&lp.pair, *metric, encoder))
            .collect(),
        NoiseModelSpec::Magnitude {
            beta,
            feature_subset,
            ..
        } => batch
            .iter()
            .map(|lp| magnitude_flip_prob(&lp.pair, *beta, feature_subset).map(|n| 1.0 - n))
            .collect(),
        other => Err(Error::InvalidConfig(alloc::format!(
            "hybrid component must be a similarity or magnitude model, got {}",
            other.name()
        ))),
    }
}

fn threshold_flips(batch: &mut [LabeledPreference], scores: &[f64], epsilon: f64) -> Result<()> {
    let selected = select_flips(scores, epsilon, FlipDirection::FlipBelow)?;
    for idx in selected {
        batch[idx].flip_prob = 1.0;
        batch[idx].flip_observed();
    }
    Ok(())
}

fn bernoulli_flips(
    batch: &mut [LabeledPreference],
    raw: &[f64],
    rate: RateMode,
    cap: Option<usize>,
    rng: &mut SeededRng,
) {
    let probs: Vec<f64> = match rate {
        RateMode::Calibrated(eps) => {
            let c = calibrate_bernoulli_scale(raw, eps);
            raw.iter().map(|&p| (c * p).min(1.0)).collect()
        }
        RateMode::Raw => raw.to_vec(),
    };
    let budget = cap.unwrap_or(usize::MAX);
    let mut flips = 0usize;
    for (lp, &p) in batch.iter_mut().zip(probs.iter()) {
        lp.flip_prob = p;
        if flips < budget && rng.gen::<f64>() < p {
            lp.flip_observed();
            flips += 1;
        }
    }
}
