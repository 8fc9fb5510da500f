//! Core algorithms for a desk-scale preference-noise laboratory.
//!
//! Preference-based reward learning assumes a teacher that compares pairs of
//! trajectory segments. This crate provides everything needed to study what
//! happens when that teacher is noisy in *feature-dependent* ways:
//!
//! - [`envs`]: two small environments (gridworld, point mass) with known
//!   ground-truth reward, segment rollouts and pair sampling;
//! - [`teachers`]: stochastic and deterministic oracle teachers plus the
//!   noisy-teacher mixture that flips labels with a given probability;
//! - [`noise`]: the noise functions themselves — uniform, trajectory
//!   similarity (raw or latent-space distance), feature magnitude,
//!   model uncertainty, adversarial, and hybrid mixtures — with threshold
//!   calibration to hit a target flip rate;
//! - [`latent`]: a small dense variational autoencoder providing trajectory
//!   embeddings for the latent-distance noise;
//! - [`reward`]: Bradley-Terry reward networks with hand-written
//!   backpropagation and ensemble uncertainty estimates;
//! - [`denoise`]: a KL-divergence discriminator that partitions incoming
//!   preferences into trusted and suspect sets;
//! - [`agent`]: tabular Q-learning and cross-entropy-method policy search
//!   against either the true or a learned reward, plus evaluation.
//!
//! The crate is `no_std` (with `alloc`); everything is a pure function of its
//! inputs and an explicit seeded RNG, so results are reproducible bit-for-bit.
//! IO, file formats and the CLI live in the companion `prefnoise` crate.

#![no_std]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod agent;
pub mod denoise;
pub mod envs;
pub mod error;
pub mod latent;
pub mod mathutil;
mod nn;
pub mod noise;
pub mod reward;
pub mod rng;
pub mod teachers;

pub use error::{Error, Result};
pub use rng::SeededRng;
