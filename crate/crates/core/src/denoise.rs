//! KL-divergence denoising discriminator.
//!
//! A sample is trusted when the KL divergence between its observed label
//! (one-hot, smoothed) and the reward model's predicted preference falls
//! below a threshold; everything else is suspect, and suspects whose KL
//! exceeds an upper bound can optionally have their labels flipped before
//! training. Precision and recall are computed against the hidden flip
//! provenance, which exists only because the harness injects known noise —
//! they are metrics, never training signal.

use alloc::vec::Vec;
// Inherent float methods only exist with std; the Float trait fills in for no_std builds.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::mathutil::{bernoulli_kl, ONE_HOT_SMOOTHING};
use crate::reward::{bt_prob, RewardModel};
use crate::teachers::{LabeledPreference, PreferenceLabel};

/// Threshold schedule over harness steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSchedule {
    Constant,
    /// Threshold `tau0 / (1 + rate * step)`.
    Decaying { rate: f64 },
}

/// Discriminator settings. The numeric defaults are artifact choices: a
/// base threshold of 1.0 sits above the ln 2 divergence of an uninformative
/// model, and the flip bound `ln(1/0.1)` only corrects confidently
/// contradicted labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserConfig {
    pub base_threshold: f64,
    pub schedule: ThresholdSchedule,
    pub flip_correction: bool,
    /// Suspects with KL above this bound get their labels flipped when
    /// `flip_correction` is on.
    pub flip_kl_bound: f64,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig {
            base_threshold: 1.0,
            schedule: ThresholdSchedule::Constant,
            flip_correction: false,
            flip_kl_bound: 10.0_f64.ln(),
        }
    }
}

impl DenoiserConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_threshold > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "denoiser base threshold must be positive, got {}",
                self.base_threshold
            )));
        }
        if let ThresholdSchedule::Decaying { rate } = self.schedule {
            if rate < 0.0 {
                return Err(Error::InvalidConfig(alloc::format!(
                    "decay rate must be non-negative, got {rate}"
                )));
            }
        }
        Ok(())
    }

    /// Trust threshold at a given harness step.
    pub fn threshold_at(&self, step: usize) -> f64 {
        match self.schedule {
            ThresholdSchedule::Constant => self.base_threshold,
            ThresholdSchedule::Decaying { rate } => {
                self.base_threshold / (1.0 + rate * step as f64)
            }
        }
    }
}

/// Outcome of partitioning one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseReport {
    pub trusted: Vec<usize>,
    pub suspect: Vec<usize>,
    /// Suspects selected for label correction; always a subset of `suspect`.
    pub flipped: Vec<usize>,
    /// Fraction of suspects that were genuinely corrupted (1 when nothing is
    /// suspect).
    pub precision: f64,
    /// Fraction of genuinely corrupted samples marked suspect (1 when the
    /// batch is clean).
    pub recall: f64,
}

/// KL divergence between the observed label (one-hot, smoothed by 1e-6) and
/// the model's Bradley-Terry prediction for the pair.
pub fn label_kl<M: RewardModel + ?Sized>(model: &M, sample: &LabeledPreference) -> f64 {
    let p_first = bt_prob(model, &sample.pair);
    let q_first = match sample.observed {
        PreferenceLabel::First => 1.0 - ONE_HOT_SMOOTHING,
        PreferenceLabel::Second => ONE_HOT_SMOOTHING,
    };
    bernoulli_kl(q_first, p_first)
}

/// Splits a batch into trusted and suspect samples at the scheduled
/// threshold, optionally nominating high-KL suspects for label correction.
pub fn partition<M: RewardModel + ?Sized>(
    batch: &[LabeledPreference],
    model: &M,
    cfg: &DenoiserConfig,
    step: usize,
) -> Result<DenoiseReport> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("preference batch"));
    }
    cfg.validate()?;
    let threshold = cfg.threshold_at(step);
    let mut trusted = Vec::new();
    let mut suspect = Vec::new();
    let mut flipped = Vec::new();
    for (i, sample) in batch.iter().enumerate() {
        let kl = label_kl(model, sample);
        if kl < threshold {
            trusted.push(i);
        } else {
            suspect.push(i);
            if cfg.flip_correction && kl > cfg.flip_kl_bound {
                flipped.push(i);
            }
        }
    }

    let truly_flipped = batch.iter().filter(|lp| lp.flipped).count();
    let caught = suspect.iter().filter(|&&i| batch[i].flipped).count();
    let precision = if suspect.is_empty() {
        1.0
    } else {
        caught as f64 / suspect.len() as f64
    };
    let recall = if truly_flipped == 0 {
        1.0
    } else {
        caught as f64 / truly_flipped as f64
    };

    Ok(DenoiseReport {
        trusted,
        suspect,
        flipped,
        precision,
        recall,
    })
}

/// Applies a report's label corrections to the batch.
pub fn apply_corrections(batch: &mut [LabeledPreference], report: &DenoiseReport) {
    for &i in &report.flipped {
        batch[i].flip_observed();
    }
}
