//! Oracle teachers and the noisy-teacher label mixture.
//!
//! The stochastic oracle prefers the first segment with probability
//! `sigmoid(G(t1) - G(t2))`; the deterministic oracle thresholds the return
//! difference and abstains on exact ties, which are filtered out before any
//! labeling. A noisy teacher observes the oracle label and flips it with a
//! pair-dependent probability supplied by the noise module.

use alloc::vec::Vec;
use rand::Rng;

use crate::envs::TrajectoryPair;
use crate::error::{Error, Result};
use crate::mathutil::sigmoid;
use crate::rng::SeededRng;

/// Binary preference over a pair; equal preferences never reach this type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreferenceLabel {
    /// The first trajectory is preferred (y = 1).
    First,
    /// The second trajectory is preferred (y = 0).
    Second,
}

impl PreferenceLabel {
    pub fn reversed(self) -> PreferenceLabel {
        match self {
            PreferenceLabel::First => PreferenceLabel::Second,
            PreferenceLabel::Second => PreferenceLabel::First,
        }
    }

    /// Target value for the cross-entropy loss.
    pub fn as_y(self) -> f64 {
        match self {
            PreferenceLabel::First => 1.0,
            PreferenceLabel::Second => 0.0,
        }
    }
}

/// A pair with its observed label, hidden ground truth, and flip provenance.
///
/// `flipped` always equals `observed != ground_truth`; the ground truth and
/// provenance exist so the harness can measure realized noise and denoiser
/// quality, never as training targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPreference {
    pub pair: TrajectoryPair,
    pub observed: PreferenceLabel,
    pub ground_truth: PreferenceLabel,
    pub flipped: bool,
    pub flip_prob: f64,
}

impl LabeledPreference {
    /// A clean sample: observed equals ground truth, no flip probability.
    pub fn clean(pair: TrajectoryPair, label: PreferenceLabel) -> Self {
        LabeledPreference {
            pair,
            observed: label,
            ground_truth: label,
            flipped: false,
            flip_prob: 0.0,
        }
    }

    /// Inverts the observed label, keeping provenance consistent. Applying
    /// this twice restores the original sample.
    pub fn flip_observed(&mut self) {
        self.observed = self.observed.reversed();
        self.flipped = self.observed != self.ground_truth;
    }
}

/// Probability that the stochastic oracle prefers the first trajectory:
/// `sigmoid(G(t1) - G(t2))` on ground-truth returns.
pub fn oracle_prob(pair: &TrajectoryPair, gamma: f64) -> f64 {
    sigmoid(pair.first().true_return(gamma) - pair.second().true_return(gamma))
}

/// Deterministic oracle label; `None` is the tie sentinel for equal returns,
/// and callers discard such pairs.
pub fn oracle_label(pair: &TrajectoryPair, gamma: f64) -> Option<PreferenceLabel> {
    oracle_label_with_band(pair, gamma, 0.0)
}

/// Deterministic oracle with a configurable tie band: return differences
/// with magnitude <= `band` count as ties. The default band is zero.
pub fn oracle_label_with_band(
    pair: &TrajectoryPair,
    gamma: f64,
    band: f64,
) -> Option<PreferenceLabel> {
    let diff = pair.first().true_return(gamma) - pair.second().true_return(gamma);
    if diff > band {
        Some(PreferenceLabel::First)
    } else if diff < -band {
        Some(PreferenceLabel::Second)
    } else {
        None
    }
}

/// One noisy-teacher draw: keeps the oracle label with probability
/// `1 - flip_prob`, otherwise reverses it. Provenance is recorded on the
/// returned sample.
pub fn noisy_label(
    pair: TrajectoryPair,
    flip_prob: f64,
    oracle: PreferenceLabel,
    rng: &mut SeededRng,
) -> Result<LabeledPreference> {
    if !(0.0..=1.0).contains(&flip_prob) || flip_prob.is_nan() {
        return Err(Error::ProbabilityOutOfRange(flip_prob));
    }
    let flip = rng.gen::<f64>() < flip_prob;
    let observed = if flip { oracle.reversed() } else { oracle };
    Ok(LabeledPreference {
        pair,
        observed,
        ground_truth: oracle,
        flipped: flip,
        flip_prob,
    })
}

/// Labels every pair with the deterministic oracle, dropping ties.
pub fn label_pairs_scripted(
    pairs: Vec<TrajectoryPair>,
    gamma: f64,
    tie_band: f64,
) -> Vec<LabeledPreference> {
    pairs
        .into_iter()
        .filter_map(|pair| {
            oracle_label_with_band(&pair, gamma, tie_band)
                .map(|label| LabeledPreference::clean(pair, label))
        })
        .collect()
}
