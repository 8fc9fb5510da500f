//! JSON experiment configuration.
//!
//! The file schema is versioned and strict: unknown keys anywhere are
//! rejected. Top-level keys are `schema_version`, `env`, `noise`, `teacher`,
//! `denoiser` (optional), `train` and `protocol`. See the README for a full
//! example.

use std::path::{Path, PathBuf};
use std::time::Duration;

use prefnoise_core::denoise::{DenoiserConfig, ThresholdSchedule};
use prefnoise_core::envs::EnvSpec;
use prefnoise_core::noise::{DistanceMetric, NoiseModelSpec, RateMode};
use prefnoise_core::reward::TrainConfig;
use serde::Deserialize;

use crate::remote::{PromptTemplate, RemoteTeacherConfig};
use crate::{HarnessError, Result};

/// The schema this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Fully resolved experiment settings, ready for the harness.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub noise: NoiseModelSpec,
    pub teacher: TeacherSetup,
    pub denoiser: Option<DenoiserConfig>,
    pub train: TrainConfig,
    pub protocol: Protocol,
}

/// Who labels the sampled pairs.
#[derive(Debug, Clone)]
pub enum TeacherSetup {
    /// Deterministic return-threshold oracle; ties are discarded.
    Scripted { gamma: f64, tie_band: f64 },
    /// Preferences come from a remote chat model; the scripted oracle still
    /// runs in the background to measure the realized noise rate.
    Remote {
        cfg: RemoteTeacherConfig,
        oracle_gamma: f64,
    },
}

/// Loop sizing and output location.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub queries_per_round: usize,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    pub rollouts_per_round: usize,
    pub eval_episodes: usize,
    pub policy_steps_per_round: usize,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.env
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.noise
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(d) = &self.denoiser {
            d.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        self.train
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let p = &self.protocol;
        if p.queries_per_round == 0 || p.rounds == 0 || p.seeds.is_empty() {
            return Err(HarnessError::Config(
                "protocol needs queries_per_round >= 1, rounds >= 1 and at least one seed".into(),
            ));
        }
        if p.rollouts_per_round < 2 || p.eval_episodes == 0 {
            return Err(HarnessError::Config(
                "protocol needs rollouts_per_round >= 2 and eval_episodes >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Parses and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text)
}

/// Parses a config from JSON text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let file: ConfigFile =
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::Config(format!(
            "unsupported schema_version {}, this build reads {SCHEMA_VERSION}",
            file.schema_version
        )));
    }
    let cfg = ExperimentConfig {
        env: file.env.into_spec(),
        noise: file.noise.into_spec()?,
        teacher: file.teacher.into_setup(),
        denoiser: file.denoiser.map(DenoiserJson::into_config),
        train: file.train.into_config(),
        protocol: file.protocol.into_protocol(),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: u32,
    env: EnvJson,
    noise: NoiseJson,
    teacher: TeacherJson,
    #[serde(default)]
    denoiser: Option<DenoiserJson>,
    #[serde(default)]
    train: TrainJson,
    protocol: ProtocolJson,
}

fn default_horizon() -> usize {
    20
}

fn default_gamma() -> f64 {
    0.9
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum EnvJson {
    Gridworld {
        size: usize,
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    Pointmass {
        #[serde(default = "default_half_width")]
        half_width: f64,
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn default_half_width() -> f64 {
    1.0
}

impl EnvJson {
    fn into_spec(self) -> EnvSpec {
        match self {
            EnvJson::Gridworld {
                size,
                horizon,
                gamma,
            } => {
                let mut s = EnvSpec::gridworld(size, horizon);
                s.gamma = gamma;
                s
            }
            EnvJson::Pointmass {
                half_width,
                horizon,
                gamma,
            } => {
                let mut s = EnvSpec::pointmass(half_width, horizon);
                s.gamma = gamma;
                s
            }
        }
    }
}

fn default_beta() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    0.5
}

fn default_subset() -> Vec<usize> {
    NoiseModelSpec::default_action_subset()
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum NoiseJson {
    Uniform {
        target_rate: f64,
    },
    SimilarityL2 {
        target_rate: f64,
        #[serde(default)]
        max_flips_per_batch: Option<usize>,
    },
    SimilarityLatent {
        target_rate: f64,
        #[serde(default)]
        max_flips_per_batch: Option<usize>,
    },
    Magnitude {
        target_rate: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_subset")]
        feature_subset: Vec<usize>,
        #[serde(default)]
        max_flips_per_batch: Option<usize>,
    },
    Uncertainty {
        target_rate: f64,
    },
    Adversarial {
        target_rate: f64,
    },
    Hybrid {
        target_rate: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        component: ComponentJson,
    },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ComponentJson {
    SimilarityL2 {},
    SimilarityLatent {},
    Magnitude {
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_subset")]
        feature_subset: Vec<usize>,
    },
}

impl ComponentJson {
    fn into_spec(self) -> NoiseModelSpec {
        match self {
            ComponentJson::SimilarityL2 {} => NoiseModelSpec::Similarity {
                metric: DistanceMetric::L2,
                rate: RateMode::Raw,
                max_flips_per_batch: None,
            },
            ComponentJson::SimilarityLatent {} => NoiseModelSpec::Similarity {
                metric: DistanceMetric::Latent,
                rate: RateMode::Raw,
                max_flips_per_batch: None,
            },
            ComponentJson::Magnitude {
                beta,
                feature_subset,
            } => NoiseModelSpec::Magnitude {
                beta,
                feature_subset,
                rate: RateMode::Raw,
                max_flips_per_batch: None,
            },
        }
    }
}

impl NoiseJson {
    fn into_spec(self) -> Result<NoiseModelSpec> {
        let spec = match self {
            NoiseJson::Uniform { target_rate } => NoiseModelSpec::Uniform { target_rate },
            NoiseJson::SimilarityL2 {
                target_rate,
                max_flips_per_batch,
            } => NoiseModelSpec::Similarity {
                metric: DistanceMetric::L2,
                rate: RateMode::Calibrated(target_rate),
                max_flips_per_batch,
            },
            NoiseJson::SimilarityLatent {
                target_rate,
                max_flips_per_batch,
            } => NoiseModelSpec::Similarity {
                metric: DistanceMetric::Latent,
                rate: RateMode::Calibrated(target_rate),
                max_flips_per_batch,
            },
            NoiseJson::Magnitude {
                target_rate,
                beta,
                feature_subset,
                max_flips_per_batch,
            } => NoiseModelSpec::Magnitude {
                beta,
                feature_subset,
                rate: RateMode::Calibrated(target_rate),
                max_flips_per_batch,
            },
            NoiseJson::Uncertainty { target_rate } => {
                NoiseModelSpec::Uncertainty { target_rate }
            }
            NoiseJson::Adversarial { target_rate } => {
                NoiseModelSpec::Adversarial { target_rate }
            }
            NoiseJson::Hybrid {
                target_rate,
                alpha,
                component,
            } => NoiseModelSpec::Hybrid {
                alpha,
                target_rate,
                component: Box::new(component.into_spec()),
            },
        };
        spec.validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(spec)
    }
}

fn default_teacher_gamma() -> f64 {
    // Teachers compare episodic returns by default; the discount stays
    // configurable.
    1.0
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_max_retries() -> u32 {
    2
}

fn default_api_key_env_var() -> String {
    "PREFNOISE_API_KEY".into()
}

#[derive(Debug, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
enum TeacherJson {
    Scripted {
        #[serde(default = "default_teacher_gamma")]
        gamma: f64,
        #[serde(default)]
        tie_band: f64,
    },
    Remote {
        endpoint_url: String,
        model_name: String,
        #[serde(default = "default_api_key_env_var")]
        api_key_env_var: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default = "default_max_retries")]
        max_retries: u32,
        cache_path: PathBuf,
        #[serde(default)]
        prompt: PromptJson,
        #[serde(default = "default_teacher_gamma")]
        oracle_gamma: f64,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PromptJson {
    #[default]
    Cartpole,
    Soccer,
}

impl TeacherJson {
    fn into_setup(self) -> TeacherSetup {
        match self {
            TeacherJson::Scripted { gamma, tie_band } => {
                TeacherSetup::Scripted { gamma, tie_band }
            }
            TeacherJson::Remote {
                endpoint_url,
                model_name,
                api_key_env_var,
                timeout_secs,
                max_retries,
                cache_path,
                prompt,
                oracle_gamma,
            } => TeacherSetup::Remote {
                cfg: RemoteTeacherConfig {
                    endpoint_url,
                    model_name,
                    api_key_env_var,
                    timeout: Duration::from_secs(timeout_secs),
                    max_retries,
                    cache_path,
                    prompt: match prompt {
                        PromptJson::Cartpole => PromptTemplate::CartPole,
                        PromptJson::Soccer => PromptTemplate::Soccer,
                    },
                },
                oracle_gamma,
            },
        }
    }
}

fn default_base_threshold() -> f64 {
    1.0
}

fn default_flip_kl_bound() -> f64 {
    10.0f64.ln()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenoiserJson {
    #[serde(default = "default_base_threshold")]
    base_threshold: f64,
    #[serde(default)]
    schedule: ScheduleJson,
    #[serde(default)]
    flip_correction: bool,
    #[serde(default = "default_flip_kl_bound")]
    flip_kl_bound: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ScheduleJson {
    #[default]
    Constant,
    Decaying {
        rate: f64,
    },
}

impl DenoiserJson {
    fn into_config(self) -> DenoiserConfig {
        DenoiserConfig {
            base_threshold: self.base_threshold,
            schedule: match self.schedule {
                ScheduleJson::Constant => ThresholdSchedule::Constant,
                ScheduleJson::Decaying { rate } => ThresholdSchedule::Decaying { rate },
            },
            flip_correction: self.flip_correction,
            flip_kl_bound: self.flip_kl_bound,
        }
    }
}

fn default_learning_rate() -> f64 {
    0.02
}

fn default_batch_size() -> usize {
    32
}

fn default_epochs() -> usize {
    10
}

fn default_ensemble_size() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainJson {
    #[serde(default = "default_learning_rate")]
    learning_rate: f64,
    #[serde(default = "default_batch_size")]
    batch_size: usize,
    #[serde(default = "default_epochs")]
    epochs_per_update: usize,
    #[serde(default = "default_ensemble_size")]
    ensemble_size: usize,
    #[serde(default = "default_weight_decay")]
    weight_decay: f64,
    #[serde(default)]
    optimizer: OptimizerJson,
}

fn default_weight_decay() -> f64 {
    3e-2
}

impl Default for TrainJson {
    fn default() -> Self {
        TrainJson {
            learning_rate: default_learning_rate(),
            batch_size: default_batch_size(),
            epochs_per_update: default_epochs(),
            ensemble_size: default_ensemble_size(),
            weight_decay: default_weight_decay(),
            optimizer: OptimizerJson::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum OptimizerJson {
    Sgd {
        #[serde(default = "default_momentum")]
        momentum: f64,
    },
    Adam {},
}

fn default_momentum() -> f64 {
    0.9
}

impl Default for OptimizerJson {
    fn default() -> Self {
        OptimizerJson::Sgd {
            momentum: default_momentum(),
        }
    }
}

impl TrainJson {
    fn into_config(self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs_per_update: self.epochs_per_update,
            ensemble_size: self.ensemble_size,
            weight_decay: self.weight_decay,
            optimizer: match self.optimizer {
                OptimizerJson::Sgd { momentum } => {
                    prefnoise_core::reward::Optimizer::Sgd { momentum }
                }
                OptimizerJson::Adam {} => prefnoise_core::reward::Optimizer::Adam {
                    beta1: 0.9,
                    beta2: 0.999,
                    eps: 1e-8,
                },
            },
            // The per-run seed overrides this.
            seed: 0,
        }
    }
}

fn default_queries() -> usize {
    50
}

fn default_rounds() -> usize {
    20
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_rollouts() -> usize {
    25
}

fn default_eval_episodes() -> usize {
    30
}

fn default_policy_steps() -> usize {
    3000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProtocolJson {
    #[serde(default = "default_queries")]
    queries_per_round: usize,
    #[serde(default = "default_rounds")]
    rounds: usize,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    #[serde(default = "default_rollouts")]
    rollouts_per_round: usize,
    #[serde(default = "default_eval_episodes")]
    eval_episodes: usize,
    #[serde(default = "default_policy_steps")]
    policy_steps_per_round: usize,
    #[serde(default)]
    output_path: Option<PathBuf>,
}

impl ProtocolJson {
    fn into_protocol(self) -> Protocol {
        Protocol {
            queries_per_round: self.queries_per_round,
            rounds: self.rounds,
            seeds: self.seeds,
            rollouts_per_round: self.rollouts_per_round,
            eval_episodes: self.eval_episodes,
            policy_steps_per_round: self.policy_steps_per_round,
            output_path: self.output_path,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "env": {"kind": "gridworld", "size": 6},
        "noise": {"kind": "uniform", "target_rate": 0.2},
        "teacher": {"mode": "scripted"},
        "protocol": {"rounds": 3, "seeds": [1, 2]}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.protocol.rounds, 3);
        assert_eq!(cfg.protocol.queries_per_round, 50);
        assert_eq!(cfg.train.ensemble_size, 3);
        assert!(matches!(cfg.noise, NoiseModelSpec::Uniform { target_rate } if target_rate == 0.2));
        assert!(matches!(cfg.teacher, TeacherSetup::Scripted { gamma, .. } if gamma == 1.0));
    }

    #[test]
    fn unknown_top_level_key_is_rejected() {
        let text = MINIMAL.replace("\"schema_version\"", "\"extra\": 1, \"schema_version\"");
        assert!(matches!(parse_config(&text), Err(HarnessError::Config(_))));
    }

    #[test]
    fn unknown_noise_kind_is_rejected() {
        let text = MINIMAL.replace("\"uniform\"", "\"bogus\"");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let text = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 9");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn hybrid_component_parses() {
        let text = r#"{
            "schema_version": 1,
            "env": {"kind": "pointmass"},
            "noise": {"kind": "hybrid", "target_rate": 0.3, "alpha": 0.7,
                      "component": {"kind": "magnitude", "beta": 2.0}},
            "teacher": {"mode": "scripted", "gamma": 0.99},
            "protocol": {}
        }"#;
        let cfg = parse_config(text).unwrap();
        match cfg.noise {
            NoiseModelSpec::Hybrid {
                alpha, component, ..
            } => {
                assert_eq!(alpha, 0.7);
                assert!(matches!(*component, NoiseModelSpec::Magnitude { beta, .. } if beta == 2.0));
            }
            other => panic!("unexpected spec {other:?}"),
        }
    }

    #[test]
    fn out_of_range_rate_is_rejected() {
        let text = MINIMAL.replace("0.2", "1.5");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn remote_teacher_parses() {
        let text = r#"{
            "schema_version": 1,
            "env": {"kind": "gridworld", "size": 8},
            "noise": {"kind": "uniform", "target_rate": 0.0},
            "teacher": {"mode": "remote", "endpoint_url": "http://localhost:9000/v1",
                        "model_name": "test-model", "cache_path": "/tmp/cache.jsonl"},
            "protocol": {"seeds": [1]}
        }"#;
        let cfg = parse_config(text).unwrap();
        match cfg.teacher {
            TeacherSetup::Remote { cfg, oracle_gamma } => {
                assert_eq!(cfg.model_name, "test-model");
                assert_eq!(cfg.max_retries, 2);
                assert_eq!(oracle_gamma, 1.0);
            }
            _ => panic!("expected remote teacher"),
        }
    }
}
