//! Experiment orchestration.
//!
//! One run fixes a seed and iterates feedback rounds: collect rollouts,
//! sample pairs, label them (scripted oracle or remote teacher), inject
//! noise against the current ensemble snapshot, optionally denoise, retrain
//! the reward ensemble on everything kept so far, continue policy training
//! against the learned reward, and evaluate against the true reward. Every
//! round emits one CSV record; reruns with the same config and seed
//! reproduce the file byte for byte.

use std::path::Path;

use prefnoise_core::agent::{evaluate, improve_policy, initial_policy, RewardSource};
use prefnoise_core::denoise::{apply_corrections, partition};
use prefnoise_core::envs::{make_env, sample_pairs, Environment, Trajectory, UniformRandomPolicy};
use prefnoise_core::latent::{train_encoder, Encoder, EncoderConfig};
use prefnoise_core::noise::{apply_noise, realized_flip_rate, NoiseModelSpec};
use prefnoise_core::reward::{
    preference_accuracy, train_update, LabelView, RewardEnsemble, TrainConfig,
};
use prefnoise_core::rng::{rng_stream, SeededRng};
use prefnoise_core::teachers::{
    label_pairs_scripted, oracle_label_with_band, LabeledPreference,
};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, TeacherSetup};
use crate::records::{CsvWriter, ExperimentRecord};
use crate::remote::{HttpTransport, RemoteTeacher, Transport};
use crate::{HarnessError, Result};

/// Bound on pair-resampling rounds while hunting non-tie labels; sparse
/// reward buffers can make comparable pairs scarce.
const MAX_LABEL_ATTEMPTS: usize = 50;

/// Noise-kind column value for remote-teacher runs, where the teacher's own
/// errors are the noise.
pub const LANGUAGE_MODEL_KIND: &str = "language_model";

/// Aggregate over seeds of one (noise kind, rate) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub noise_kind: String,
    pub target_rate: f64,
    pub seeds: usize,
    pub realized_rate_mean: f64,
    pub reward_label_accuracy_mean: f64,
    pub final_return_mean: f64,
    pub final_return_std: f64,
}

impl AggregateRow {
    pub const CSV_HEADER: &'static str = "noise_kind,target_rate,seeds,realized_rate_mean,reward_label_accuracy_mean,final_return_mean,final_return_std";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.6},{},{:.6},{:.6},{:.6},{:.6}",
            self.noise_kind,
            self.target_rate,
            self.seeds,
            self.realized_rate_mean,
            self.reward_label_accuracy_mean,
            self.final_return_mean,
            self.final_return_std,
        )
    }
}

/// Runs every configured seed sequentially, streaming rows to the
/// configured output path (if any) as they are produced.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let mut writer = match &cfg.protocol.output_path {
        Some(path) => Some(CsvWriter::create(path)?),
        None => None,
    };
    let mut all = Vec::new();
    for &seed in &cfg.protocol.seeds {
        let records = run_single_seed(cfg, seed).map_err(|e| match e {
            HarnessError::Io { path, source } => {
                eprintln!("note: partial results may be present in the output CSV");
                HarnessError::Io { path, source }
            }
            other => other,
        })?;
        if let Some(w) = writer.as_mut() {
            for r in &records {
                w.append(r)?;
            }
        }
        all.extend(records);
    }
    Ok(all)
}

/// One deterministic run: all rounds for a single seed.
pub fn run_single_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ExperimentRecord>> {
    let mut spec = cfg.env.clone();
    spec.seed = seed;
    let env = make_env(spec)?;
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };

    let mut collect_rng = rng_stream(seed, 0);
    let mut pair_rng = rng_stream(seed, 1);
    let mut noise_rng = rng_stream(seed, 2);
    let mut policy_rng = rng_stream(seed, 3);

    let mut ensemble = RewardEnsemble::new(env.step_feature_dim(), &train_cfg);
    let mut policy = initial_policy(&env);
    let mut buffer: Vec<Trajectory> = Vec::new();
    let mut dataset: Vec<LabeledPreference> = Vec::new();
    let mut encoder: Option<Encoder> = None;
    let mut remote = match &cfg.teacher {
        TeacherSetup::Remote { cfg: rcfg, .. } => Some((
            RemoteTeacher::new(rcfg.clone())?,
            Box::new(HttpTransport::new(rcfg)?) as Box<dyn Transport>,
        )),
        TeacherSetup::Scripted { .. } => None,
    };

    let (noise_kind, target_rate) = match &cfg.teacher {
        TeacherSetup::Remote { .. } => (LANGUAGE_MODEL_KIND.to_string(), 0.0),
        TeacherSetup::Scripted { .. } => (
            cfg.noise.name(),
            cfg.noise.target_rate().unwrap_or(0.0),
        ),
    };

    let mut records = Vec::with_capacity(cfg.protocol.rounds);
    for round in 1..=cfg.protocol.rounds {
        for _ in 0..cfg.protocol.rollouts_per_round {
            buffer.push(env.rollout(&UniformRandomPolicy, &mut collect_rng));
        }
        if cfg.noise.requires_encoder() && encoder.is_none() {
            encoder = Some(default_encoder(&buffer, seed)?);
        }

        let batch = match &cfg.teacher {
            TeacherSetup::Scripted { gamma, tie_band } => collect_scripted_labels(
                &buffer,
                cfg.protocol.queries_per_round,
                *gamma,
                *tie_band,
                &mut pair_rng,
            )?,
            TeacherSetup::Remote { oracle_gamma, .. } => {
                let (teacher, transport) = remote.as_mut().expect("remote teacher initialized");
                collect_remote_labels(
                    &env,
                    &buffer,
                    cfg.protocol.queries_per_round,
                    *oracle_gamma,
                    teacher,
                    transport.as_mut(),
                    &mut pair_rng,
                )?
            }
        };

        // Remote-teacher labels carry their noise already; scripted labels
        // are corrupted here against the previous round's ensemble.
        let batch = match &cfg.teacher {
            TeacherSetup::Scripted { .. } => apply_noise(
                batch,
                &cfg.noise,
                Some(&ensemble),
                encoder.as_ref(),
                &mut noise_rng,
            )?,
            TeacherSetup::Remote { .. } => batch,
        };
        // A round can come back without comparable pairs (e.g. a young
        // sparse-reward buffer where every sampled pair ties); it still
        // counts as a round, with nothing to train on.
        let realized = realized_flip_rate(&batch);

        let (precision, recall, kept) = match &cfg.denoiser {
            Some(_) if batch.is_empty() => (1.0, 1.0, Vec::new()),
            Some(dcfg) => {
                let report = partition(&batch, &ensemble, dcfg, round - 1)?;
                let mut corrected = batch.clone();
                apply_corrections(&mut corrected, &report);
                let mut keep_idx: Vec<usize> = report
                    .trusted
                    .iter()
                    .chain(report.flipped.iter())
                    .copied()
                    .collect();
                keep_idx.sort_unstable();
                let kept: Vec<LabeledPreference> = keep_idx
                    .into_iter()
                    .map(|i| corrected[i].clone())
                    .collect();
                (report.precision, report.recall, kept)
            }
            // No denoiser: everything is kept; vacuous precision, zero
            // recall whenever noise actually flipped something.
            None => {
                let any_flipped = batch.iter().any(|lp| lp.flipped);
                (1.0, if any_flipped { 0.0 } else { 1.0 }, batch.clone())
            }
        };

        dataset.extend(kept);
        if rounds_completed_without_data(&dataset, round, cfg.protocol.rounds) {
            return Err(HarnessError::Config(
                "teacher never produced a comparable pair: every sampled pair tied on return"
                    .into(),
            ));
        }
        if !dataset.is_empty() {
            let report = train_update(&mut ensemble, &dataset, &train_cfg)?;
            for (member, losses) in report.epoch_losses.iter().enumerate() {
                if losses.iter().any(|l| !l.is_finite()) {
                    return Err(HarnessError::Config(format!(
                        "non-finite loss in member {member} at round {round}"
                    )));
                }
            }
        }
        let label_accuracy = preference_accuracy(&ensemble, &batch, LabelView::GroundTruth);

        improve_policy(
            &mut policy,
            &env,
            &RewardSource::Learned(&ensemble),
            cfg.protocol.policy_steps_per_round,
            &mut policy_rng,
        );
        let eval = evaluate(
            &policy,
            &env,
            cfg.protocol.eval_episodes,
            &mut rng_stream(seed, 1_000 + round as u64),
        )?;

        records.push(ExperimentRecord {
            seed,
            round,
            noise_kind: noise_kind.clone(),
            target_rate,
            realized_rate: realized,
            denoiser_precision: precision,
            denoiser_recall: recall,
            reward_label_accuracy: label_accuracy,
            mean_return: eval.mean_return,
            std_return: eval.std_return,
        });
    }
    Ok(records)
}

/// True when the final round has finished and no comparable pair ever
/// arrived; such a run has produced nothing but vacuous rows.
fn rounds_completed_without_data(
    dataset: &[LabeledPreference],
    round: usize,
    total_rounds: usize,
) -> bool {
    dataset.is_empty() && round == total_rounds
}

/// Encoder defaults used when a latent noise model is configured without a
/// pre-trained encoder: trained once on the first round's buffer.
fn default_encoder(buffer: &[Trajectory], seed: u64) -> Result<Encoder> {
    let input_dim = buffer
        .first()
        .ok_or_else(|| HarnessError::Config("empty rollout buffer".into()))?
        .feature_len();
    let mut cfg = EncoderConfig::new(input_dim, 8);
    cfg.hidden_dims = vec![32];
    cfg.epochs = 60;
    cfg.batch_size = buffer.len().min(16);
    cfg.learning_rate = 1e-3;
    cfg.seed = seed;
    Ok(train_encoder(buffer, &cfg)?)
}

/// Samples pairs and labels them with the deterministic oracle, dropping
/// ties and resampling up to a bounded number of rounds. The result can be
/// shorter than requested when comparable pairs are scarce.
fn collect_scripted_labels(
    buffer: &[Trajectory],
    queries: usize,
    gamma: f64,
    tie_band: f64,
    rng: &mut SeededRng,
) -> Result<Vec<LabeledPreference>> {
    let mut labeled = Vec::with_capacity(queries);
    for _ in 0..MAX_LABEL_ATTEMPTS {
        if labeled.len() >= queries {
            break;
        }
        let pairs = sample_pairs(buffer, queries - labeled.len(), rng)?;
        labeled.extend(label_pairs_scripted(pairs, gamma, tie_band));
    }
    labeled.truncate(queries);
    Ok(labeled)
}

/// Samples pairs and asks the remote teacher. Indifferent verdicts and
/// oracle ties are excluded; the scripted oracle's label rides along as
/// ground truth so realized noise is measurable.
#[allow(clippy::too_many_arguments)]
fn collect_remote_labels(
    env: &Environment,
    buffer: &[Trajectory],
    queries: usize,
    oracle_gamma: f64,
    teacher: &mut RemoteTeacher,
    transport: &mut dyn Transport,
    rng: &mut SeededRng,
) -> Result<Vec<LabeledPreference>> {
    let mut labeled = Vec::with_capacity(queries);
    for _ in 0..MAX_LABEL_ATTEMPTS {
        if labeled.len() >= queries {
            break;
        }
        let pairs = sample_pairs(buffer, queries - labeled.len(), rng)?;
        for pair in pairs {
            let Some(oracle) = oracle_label_with_band(&pair, oracle_gamma, 0.0) else {
                continue;
            };
            let verdict = teacher.query_preference(env.spec(), &pair, transport)?;
            let Some(observed) = verdict.label.to_preference() else {
                continue; // indifferent: never enters training
            };
            let mut lp = LabeledPreference::clean(pair, oracle);
            if observed != oracle {
                lp.flip_observed();
            }
            labeled.push(lp);
        }
    }
    labeled.truncate(queries);
    Ok(labeled)
}

/// Cross product of noise kinds and rates over the base config's seeds.
/// Cells run in parallel on `jobs` threads (0 = rayon default); output
/// order is deterministic regardless of parallelism. Returns all run rows
/// plus one aggregate row per cell.
pub fn sweep(
    base: &ExperimentConfig,
    kinds: &[NoiseModelSpec],
    rates: &[f64],
    jobs: usize,
) -> Result<(Vec<ExperimentRecord>, Vec<AggregateRow>)> {
    if kinds.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one noise kind".into()));
    }
    if rates.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one rate".into()));
    }
    if let TeacherSetup::Remote { .. } = base.teacher {
        return Err(HarnessError::Config(
            "sweeps drive the scripted teacher; remote runs use `run`".into(),
        ));
    }
    let mut cells = Vec::new();
    for kind in kinds {
        for &rate in rates {
            let mut cfg = base.clone();
            cfg.noise = kind.with_target_rate(rate);
            cfg.protocol.output_path = None;
            cfg.validate()?;
            for &seed in &base.protocol.seeds {
                cells.push((cfg.clone(), seed));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let results: Vec<Result<Vec<ExperimentRecord>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(cfg, seed)| run_single_seed(cfg, *seed))
            .collect()
    });

    let mut runs = Vec::new();
    for r in results {
        runs.extend(r?);
    }
    let aggregates = aggregate(&runs);
    Ok((runs, aggregates))
}

/// Aggregates run rows into per-(kind, rate) summaries: mean and spread of
/// the final round's return over seeds, plus mean realized rate and label
/// accuracy over all rounds from all seeds. Pure function of the rows.
pub fn aggregate(records: &[ExperimentRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(String, String)> = records
        .iter()
        .map(|r| (r.noise_kind.clone(), format!("{:.6}", r.target_rate)))
        .collect();
    keys.sort();
    keys.dedup();

    let mut rows = Vec::with_capacity(keys.len());
    for (kind, rate_key) in keys {
        let cell: Vec<&ExperimentRecord> = records
            .iter()
            .filter(|r| r.noise_kind == kind && format!("{:.6}", r.target_rate) == rate_key)
            .collect();
        let mut seeds: Vec<u64> = cell.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let finals: Vec<f64> = seeds
            .iter()
            .map(|&s| {
                cell.iter()
                    .filter(|r| r.seed == s)
                    .max_by_key(|r| r.round)
                    .map(|r| r.mean_return)
                    .unwrap_or(0.0)
            })
            .collect();
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
        let final_mean = mean(&finals);
        let final_std = if finals.len() < 2 {
            0.0
        } else {
            (finals.iter().map(|x| (x - final_mean).powi(2)).sum::<f64>() / finals.len() as f64)
                .sqrt()
        };
        rows.push(AggregateRow {
            noise_kind: kind,
            target_rate: cell[0].target_rate,
            seeds: seeds.len(),
            realized_rate_mean: mean(&cell.iter().map(|r| r.realized_rate).collect::<Vec<_>>()),
            reward_label_accuracy_mean: mean(
                &cell
                    .iter()
                    .map(|r| r.reward_label_accuracy)
                    .collect::<Vec<_>>(),
            ),
            final_return_mean: final_mean,
            final_return_std: final_std,
        });
    }
    rows
}

/// Writes aggregate rows as CSV.
pub fn write_aggregates(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    use std::io::Write;
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
    }
    let mut out = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    writeln!(out, "{}", AggregateRow::CSV_HEADER).map_err(|e| HarnessError::io(path, e))?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_row()).map_err(|e| HarnessError::io(path, e))?;
    }
    Ok(())
}
