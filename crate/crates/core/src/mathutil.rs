//! Small numeric helpers shared across modules.

// Inherent float methods only exist with std; the Float trait fills in for no_std builds.
#[allow(unused_imports)]
use num_traits::Float;

/// Smoothing mass assigned to the off label when a one-hot preference
/// distribution enters a KL divergence; keeps the divergence finite.
pub const ONE_HOT_SMOOTHING: f64 = 1e-6;

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sign with `sign(0) = 0`, unlike `f64::signum`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// KL divergence between two Bernoulli distributions given their
/// first-outcome probabilities. Zero-probability terms contribute zero;
/// the reference side must be strictly inside (0, 1).
pub fn bernoulli_kl(p_first: f64, q_first: f64) -> f64 {
    fn term(a: f64, b: f64) -> f64 {
        if a == 0.0 {
            0.0
        } else {
            a * (a / b).ln()
        }
    }
    term(p_first, q_first) + term(1.0 - p_first, 1.0 - q_first)
}

/// Mean of a slice; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population standard deviation of a slice; 0 for fewer than two values.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Squared Euclidean distance between two equally long slices.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_complement() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
        for x in [-20.0, -3.0, -0.5, 0.5, 3.0, 20.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(2.5), 1.0);
        assert_eq!(sign(-0.1), -1.0);
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        for p in [0.1, 0.5, 0.9] {
            assert!(bernoulli_kl(p, p).abs() < 1e-15);
        }
    }

    #[test]
    fn kl_of_smoothed_one_hot_against_uniform_is_ln2() {
        let kl = bernoulli_kl(1.0 - ONE_HOT_SMOOTHING, 0.5);
        assert!((kl - core::f64::consts::LN_2).abs() < 1e-3, "kl={kl}");
    }

    #[test]
    fn population_std_handles_degenerate_inputs() {
        assert_eq!(population_std(&[]), 0.0);
        assert_eq!(population_std(&[3.0]), 0.0);
        assert!((population_std(&[1.0, 3.0]) - 1.0).abs() < 1e-12);
    }
}
