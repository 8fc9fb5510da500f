//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS line with the measured values. Run with
//! `cargo test -p prefnoise --test acceptance -- --nocapture`.

use prefnoise::config::{ExperimentConfig, Protocol, TeacherSetup};
use prefnoise::harness::run_experiment;
use prefnoise::remote::{
    measure_noise, MockTransport, PromptTemplate, RemoteTeacher, RemoteTeacherConfig,
};
use prefnoise_core::denoise::{partition, DenoiserConfig, ThresholdSchedule};
use prefnoise_core::envs::{
    make_env, sample_pairs, EnvSpec, Trajectory, TrajectoryPair, UniformRandomPolicy,
};
use prefnoise_core::latent::{train_encoder, Encoder, EncoderConfig};
use prefnoise_core::noise::{
    adversarial_scores, apply_noise, hybrid_scores, magnitude_flip_prob, realized_flip_rate,
    similarity_flip_prob, uncertainty_scores, DistanceMetric, NoiseModelSpec, RateMode,
};
use prefnoise_core::reward::{
    ce_loss, ce_loss_and_grad, ensemble_uncertainty, preference_accuracy, train_update,
    LabelView, RewardEnsemble, RewardNet, TrainConfig,
};
use prefnoise_core::rng::{rng_from_seed, rng_stream};
use prefnoise_core::teachers::{label_pairs_scripted, oracle_label, LabeledPreference};

// ---------------------------------------------------------------------------
// shared fixtures
// ---------------------------------------------------------------------------

/// Tie-free labeled batch from the dense-reward point mass.
fn pointmass_batch(seed: u64, n: usize, horizon: usize) -> Vec<LabeledPreference> {
    let env = make_env(EnvSpec::pointmass(1.0, horizon)).unwrap();
    let mut rng = rng_stream(seed, 0);
    let buffer: Vec<Trajectory> = (0..300)
        .map(|_| env.rollout(&UniformRandomPolicy, &mut rng))
        .collect();
    let mut labeled = Vec::with_capacity(n);
    let mut pair_rng = rng_stream(seed, 1);
    while labeled.len() < n {
        let pairs = sample_pairs(&buffer, n - labeled.len(), &mut pair_rng).unwrap();
        labeled.extend(label_pairs_scripted(pairs, 1.0, 0.0));
    }
    labeled
}

/// Gridworld preference set with enough return spread for learning.
fn gridworld_batch(seed: u64, n: usize) -> Vec<LabeledPreference> {
    let env = make_env(EnvSpec::gridworld(8, 20)).unwrap();
    let mut rng = rng_stream(seed, 0);
    let buffer: Vec<Trajectory> = (0..300)
        .map(|_| env.rollout(&UniformRandomPolicy, &mut rng))
        .collect();
    let mut labeled = Vec::with_capacity(n);
    let mut pair_rng = rng_stream(seed, 1);
    let mut attempts = 0;
    while labeled.len() < n {
        let pairs = sample_pairs(&buffer, n - labeled.len(), &mut pair_rng).unwrap();
        labeled.extend(label_pairs_scripted(pairs, 1.0, 0.0));
        attempts += 1;
        assert!(attempts < 200, "gridworld buffer yielded too few comparisons");
    }
    labeled
}

fn small_encoder(seed: u64, horizon: usize) -> Encoder {
    let env = make_env(EnvSpec::pointmass(1.0, horizon)).unwrap();
    let mut rng = rng_stream(seed, 9);
    let trajs: Vec<Trajectory> = (0..64)
        .map(|_| env.rollout(&UniformRandomPolicy, &mut rng))
        .collect();
    let mut cfg = EncoderConfig::new(trajs[0].feature_len(), 6);
    cfg.hidden_dims = vec![24];
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.learning_rate = 1e-3;
    cfg.seed = seed;
    train_encoder(&trajs, &cfg).unwrap()
}

fn flipped_indices(batch: &[LabeledPreference]) -> Vec<usize> {
    batch
        .iter()
        .enumerate()
        .filter(|(_, lp)| lp.flipped)
        .map(|(i, _)| i)
        .collect()
}

/// Pair of constant-feature trajectories whose time-averaged full-subset
/// norms are exactly the given values.
fn pair_with_mean_norms(m1: f64, m2: f64) -> TrajectoryPair {
    // Constant value v per feature gives per-step norm 2|v| over 4 dims.
    let steps = 4;
    let build = |norm: f64, id: u64| {
        let v = norm / 2.0;
        Trajectory::new(
            2,
            2,
            vec![v; (steps + 1) * 2],
            vec![v; steps * 2],
            vec![0.0; steps],
            id,
        )
        .unwrap()
    };
    TrajectoryPair::new(build(m1, 1), build(m2, 2)).unwrap()
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

/// C1: realized flip rates match targets for all eight noise kinds at the
/// 10/20/30/40% grid — exactly floor(eps*n)/n for threshold kinds, within
/// +/-0.01 over 10^4 pairs for Bernoulli kinds.
#[test]
fn c01_noise_rate_calibration() {
    let n = 10_000;
    let batch = pointmass_batch(41, n, 4);
    let cfg = TrainConfig {
        seed: 41,
        ..TrainConfig::default()
    };
    // Calibration only needs scores, not a particular capacity; a slim
    // ensemble keeps the 10^4-pair scoring passes inside the time budget.
    let ensemble = RewardEnsemble::with_hidden(4, &[32, 32], &cfg);
    let encoder = small_encoder(41, 4);

    for eps in [0.1, 0.2, 0.3, 0.4] {
        for spec in NoiseModelSpec::standard_suite(eps) {
            let noised = apply_noise(
                batch.clone(),
                &spec,
                Some(&ensemble),
                Some(&encoder),
                &mut rng_from_seed(7),
            )
            .unwrap();
            let flips = noised.iter().filter(|lp| lp.flipped).count();
            let realized = realized_flip_rate(&noised);
            let threshold_based = matches!(
                spec,
                NoiseModelSpec::Uncertainty { .. }
                    | NoiseModelSpec::Adversarial { .. }
                    | NoiseModelSpec::Hybrid { .. }
            );
            if threshold_based {
                let expected = (eps * n as f64).round() as usize;
                assert_eq!(
                    flips,
                    expected,
                    "{} at eps {eps}: {flips} flips",
                    spec.name()
                );
            } else {
                assert!(
                    (realized - eps).abs() < 0.01,
                    "{} at eps {eps}: realized {realized}",
                    spec.name()
                );
            }
        }
    }
    println!("[acceptance] C01 noise-rate calibration: PASS (8 kinds x 4 rates over {n} pairs)");
}

/// C2: magnitude noise matches hand evaluation at beta=1 and delta in
/// {0, 2, -2} to 1e-6; the hybrid score is the stated affine identity and
/// its alpha endpoints reproduce the component flip sets exactly.
#[test]
fn c02_equation_fidelity() {
    let subset = [0usize, 1, 2, 3];
    let cases = [
        (pair_with_mean_norms(1.0, 1.0), 0.5),  // delta = 0 -> sigmoid(0)
        (pair_with_mean_norms(3.0, 1.0), 0.75), // delta = 2 -> sigmoid(ln 3)
        (pair_with_mean_norms(1.0, 3.0), 0.25), // delta = -2 -> sigmoid(-ln 3)
    ];
    for (pair, expected) in &cases {
        let n = magnitude_flip_prob(pair, 1.0, &subset).unwrap();
        assert!(
            (n - expected).abs() < 1e-6,
            "expected {expected}, got {n}"
        );
    }

    // Affine identity on explicit scores.
    let f = [0.2, 0.9, 0.4, 0.7];
    let u = [0.8, 0.1, 0.6, 0.3];
    for alpha in [0.0, 0.5, 1.0] {
        let mixed = hybrid_scores(alpha, &f, &u).unwrap();
        for (i, s) in mixed.iter().enumerate() {
            let expected = alpha * f[i] + (1.0 - alpha) * u[i];
            assert!((s.score - expected).abs() < 1e-12);
        }
    }
    let mid = hybrid_scores(0.5, &[0.2], &[0.8]).unwrap();
    assert_eq!(mid[0].score, 0.5);

    // Endpoint flip sets equal the component flip sets.
    let batch = pointmass_batch(42, 80, 6);
    let cfg = TrainConfig {
        seed: 42,
        ..TrainConfig::default()
    };
    let ensemble = RewardEnsemble::new(4, &cfg);
    let eps = 0.25;
    let component = NoiseModelSpec::Similarity {
        metric: DistanceMetric::L2,
        rate: RateMode::Raw,
        max_flips_per_batch: None,
    };
    let flips_of = |spec: &NoiseModelSpec| {
        flipped_indices(
            &apply_noise(
                batch.clone(),
                spec,
                Some(&ensemble),
                None,
                &mut rng_from_seed(1),
            )
            .unwrap(),
        )
    };
    let at0 = flips_of(&NoiseModelSpec::Hybrid {
        alpha: 0.0,
        target_rate: eps,
        component: Box::new(component.clone()),
    });
    assert_eq!(at0, flips_of(&NoiseModelSpec::Uncertainty { target_rate: eps }));

    let at1 = flips_of(&NoiseModelSpec::Hybrid {
        alpha: 1.0,
        target_rate: eps,
        component: Box::new(component),
    });
    let d2: Vec<f64> = batch
        .iter()
        .map(|lp| {
            lp.pair
                .first()
                .features()
                .zip(lp.pair.second().features())
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect();
    let mut order: Vec<usize> = (0..d2.len()).collect();
    order.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(a.cmp(&b)));
    let mut expected: Vec<usize> = order
        .into_iter()
        .take((eps * batch.len() as f64).floor() as usize)
        .collect();
    expected.sort_unstable();
    assert_eq!(at1, expected);

    println!("[acceptance] C02 equation fidelity: PASS (magnitude hand values, hybrid affine + endpoints)");
}

/// C3: uncertainty and adversarial flip sets equal exhaustive-sort
/// selections on batches of at most 64 pairs, across 100 random seeds.
#[test]
fn c03_brute_force_selection_oracles() {
    let brute_force = |scores: &[f64], k: usize| -> Vec<usize> {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
        let mut out: Vec<usize> = order.into_iter().take(k).collect();
        out.sort_unstable();
        out
    };

    for seed in 0..100u64 {
        let n = 8 + (seed as usize * 7) % 57; // 8..=64
        let batch = pointmass_batch(seed, n, 4);
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let ensemble = RewardEnsemble::new(4, &cfg);
        let eps = [0.1, 0.25, 0.4][(seed % 3) as usize];
        let k = (eps * n as f64).floor() as usize;

        let unc: Vec<f64> = batch
            .iter()
            .map(|lp| ensemble_uncertainty(&ensemble, &lp.pair))
            .collect();
        let got = flipped_indices(
            &apply_noise(
                batch.clone(),
                &NoiseModelSpec::Uncertainty { target_rate: eps },
                Some(&ensemble),
                None,
                &mut rng_from_seed(seed),
            )
            .unwrap(),
        );
        assert_eq!(got, brute_force(&unc, k), "uncertainty, seed {seed}");

        let adv: Vec<f64> = adversarial_scores(&batch, &ensemble)
            .iter()
            .map(|s| s.score)
            .collect();
        let got = flipped_indices(
            &apply_noise(
                batch.clone(),
                &NoiseModelSpec::Adversarial { target_rate: eps },
                Some(&ensemble),
                None,
                &mut rng_from_seed(seed),
            )
            .unwrap(),
        );
        assert_eq!(got, brute_force(&adv, k), "adversarial, seed {seed}");
    }
    println!("[acceptance] C03 brute-force selection oracles: PASS (100 seeds, batches <= 64)");
}

/// C4: analytic gradients match central finite differences (h = 1e-5) with
/// max relative error below 1e-4 over 50 random small networks.
#[test]
fn c04_gradient_check() {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = rng_stream(seed, 0);
        let hidden: &[usize] = match seed % 4 {
            0 => &[],
            1 => &[3],
            2 => &[5],
            _ => &[4, 3],
        };
        let mut net = RewardNet::with_hidden(4, hidden, &mut rng);
        let batch = pointmass_batch(seed, 3, 3);
        let (_, grads) = ce_loss_and_grad(&net, &batch).unwrap();
        let params = net.params();
        let h = 1e-5;
        for k in 0..params.len() {
            let mut plus = params.clone();
            plus[k] += h;
            net.set_params(&plus).unwrap();
            let lp = ce_loss(&net, &batch).unwrap();
            let mut minus = params.clone();
            minus[k] -= h;
            net.set_params(&minus).unwrap();
            let lm = ce_loss(&net, &batch).unwrap();
            net.set_params(&params).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grads[k] - fd).abs() / grads[k].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(
                rel < 1e-4,
                "seed {seed} param {k}: analytic {} fd {fd} rel {rel}",
                grads[k]
            );
        }
    }
    println!("[acceptance] C04 gradient check: PASS (50 nets, max relative error {worst:.2e})");
}

/// C5: a reward model trained on 200 noiseless oracle preferences in an 8x8
/// gridworld reaches at least 90% held-out pairwise accuracy, and a policy
/// trained on that reward earns at least 90% of the true-reward policy's
/// mean return. Both requirements are checked as means over 5 seeds.
#[test]
fn c05_clean_label_recovery() {
    use prefnoise_core::agent::{evaluate, train_policy, RewardSource};
    let env = make_env(EnvSpec::gridworld(8, 20)).unwrap();
    let mut accuracies = Vec::new();
    let mut ratios = Vec::new();
    for seed in 1..=5u64 {
        let all = gridworld_batch(seed, 300);
        let (train, heldout) = all.split_at(200);
        let cfg = TrainConfig {
            epochs_per_update: 100,
            seed,
            ..TrainConfig::default()
        };
        let mut ensemble = RewardEnsemble::new(4, &cfg);
        train_update(&mut ensemble, train, &cfg).unwrap();
        let acc = preference_accuracy(&ensemble, heldout, LabelView::GroundTruth);
        accuracies.push(acc);

        let steps = 60_000;
        let true_policy =
            train_policy(&env, &RewardSource::True, steps, &mut rng_stream(seed, 20));
        let learned_policy = train_policy(
            &env,
            &RewardSource::Learned(&ensemble),
            steps,
            &mut rng_stream(seed, 21),
        );
        let true_eval = evaluate(&true_policy, &env, 63, &mut rng_stream(seed, 22)).unwrap();
        let learned_eval =
            evaluate(&learned_policy, &env, 63, &mut rng_stream(seed, 22)).unwrap();
        ratios.push(learned_eval.mean_return / true_eval.mean_return);
    }
    let mean_acc = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(
        mean_acc >= 0.9,
        "held-out accuracy {mean_acc:.4} (per seed: {accuracies:?})"
    );
    assert!(
        mean_ratio >= 0.9,
        "return ratio {mean_ratio:.4} (per seed: {ratios:?})"
    );
    println!(
        "[acceptance] C05 clean-label recovery: PASS (accuracy {mean_acc:.3}, return ratio {mean_ratio:.3})"
    );
}

/// C6: under uniform noise the mean final return degrades strictly with the
/// noise rate: eps 0.4 < eps 0.2 < eps 0, gridworld, 5 seeds.
#[test]
fn c06_degradation_monotonicity() {
    // (mean final return, mean final reward-label accuracy) over seeds.
    let run_at = |eps: f64| -> (f64, f64) {
        let cfg = ExperimentConfig {
            env: EnvSpec::gridworld(6, 20),
            noise: NoiseModelSpec::Uniform { target_rate: eps },
            teacher: TeacherSetup::Scripted {
                gamma: 1.0,
                tie_band: 0.0,
            },
            denoiser: None,
            train: TrainConfig::default(),
            protocol: Protocol {
                queries_per_round: 40,
                rounds: 8,
                seeds: vec![1, 2, 3, 4, 5],
                rollouts_per_round: 25,
                eval_episodes: 35,
                policy_steps_per_round: 4000,
                output_path: None,
            },
        };
        let records = run_experiment(&cfg).unwrap();
        let finals: Vec<&prefnoise::records::ExperimentRecord> = cfg
            .protocol
            .seeds
            .iter()
            .map(|&s| {
                records
                    .iter()
                    .filter(|r| r.seed == s)
                    .max_by_key(|r| r.round)
                    .unwrap()
            })
            .collect();
        let n = finals.len() as f64;
        (
            finals.iter().map(|r| r.mean_return).sum::<f64>() / n,
            finals.iter().map(|r| r.reward_label_accuracy).sum::<f64>() / n,
        )
    };

    let (clean, clean_acc) = run_at(0.0);
    let (mild, _) = run_at(0.2);
    let (heavy, heavy_acc) = run_at(0.4);
    assert!(
        heavy < mild && mild < clean,
        "expected strict degradation, got clean {clean:.3}, eps=0.2 {mild:.3}, eps=0.4 {heavy:.3}"
    );
    assert!(
        clean_acc >= heavy_acc,
        "label accuracy should not improve under noise: clean {clean_acc:.3} vs eps=0.4 {heavy_acc:.3}"
    );
    println!(
        "[acceptance] C06 degradation monotonicity: PASS (returns {clean:.2} > {mild:.2} > {heavy:.2}; label accuracy {clean_acc:.2} >= {heavy_acc:.2})"
    );
}

/// C7: with a fixed trained ensemble and fixed denoiser threshold at 30%
/// noise, the denoiser catches uniform flips more reliably than adversarial
/// flips (mean recall difference > 0 over 5 seeds).
#[test]
fn c07_feature_noise_evades_the_denoiser() {
    let dcfg = DenoiserConfig {
        base_threshold: 1.0,
        schedule: ThresholdSchedule::Constant,
        flip_correction: false,
        flip_kl_bound: 10.0f64.ln(),
    };
    let mut diffs = Vec::new();
    for seed in 1..=5u64 {
        let all = gridworld_batch(seed, 500);
        let (train, fresh) = all.split_at(300);
        let cfg = TrainConfig {
            epochs_per_update: 40,
            seed,
            ..TrainConfig::default()
        };
        let mut ensemble = RewardEnsemble::new(4, &cfg);
        train_update(&mut ensemble, train, &cfg).unwrap();

        let recall_of = |spec: &NoiseModelSpec| -> f64 {
            let noised = apply_noise(
                fresh.to_vec(),
                spec,
                Some(&ensemble),
                None,
                &mut rng_from_seed(seed),
            )
            .unwrap();
            partition(&noised, &ensemble, &dcfg, 0).unwrap().recall
        };
        let uniform = recall_of(&NoiseModelSpec::Uniform { target_rate: 0.3 });
        let adversarial = recall_of(&NoiseModelSpec::Adversarial { target_rate: 0.3 });
        diffs.push(uniform - adversarial);
    }
    let mean_diff = diffs.iter().sum::<f64>() / diffs.len() as f64;
    assert!(
        mean_diff > 0.0,
        "uniform recall should exceed adversarial recall, per-seed differences {diffs:?}"
    );
    println!(
        "[acceptance] C07 feature-dependent noise evades the denoiser: PASS (mean recall gap {mean_diff:.3})"
    );
}

/// C8: similarity (both metrics) and uncertainty scores are exactly
/// symmetric under argument swap; magnitude complements to 1 within 1e-12.
#[test]
fn c08_symmetry_suite() {
    let env = make_env(EnvSpec::pointmass(1.0, 6)).unwrap();
    let mut rng = rng_stream(80, 0);
    let buffer: Vec<Trajectory> = (0..60)
        .map(|_| env.rollout(&UniformRandomPolicy, &mut rng))
        .collect();
    let pairs = sample_pairs(&buffer, 200, &mut rng_stream(80, 1)).unwrap();
    let encoder = small_encoder(80, 6);
    let cfg = TrainConfig {
        seed: 80,
        ..TrainConfig::default()
    };
    let ensemble = RewardEnsemble::new(4, &cfg);
    let subset = [2usize, 3];

    for pair in &pairs {
        let swapped = pair.swapped();
        let l2 = similarity_flip_prob(pair, DistanceMetric::L2, None).unwrap();
        assert_eq!(
            l2,
            similarity_flip_prob(&swapped, DistanceMetric::L2, None).unwrap()
        );
        let latent = similarity_flip_prob(pair, DistanceMetric::Latent, Some(&encoder)).unwrap();
        assert_eq!(
            latent,
            similarity_flip_prob(&swapped, DistanceMetric::Latent, Some(&encoder)).unwrap()
        );
        let unc = ensemble_uncertainty(&ensemble, pair);
        assert_eq!(unc, ensemble_uncertainty(&ensemble, &swapped));

        let m = magnitude_flip_prob(pair, 1.5, &subset).unwrap();
        let m_swapped = magnitude_flip_prob(&swapped, 1.5, &subset).unwrap();
        assert!(
            (m + m_swapped - 1.0).abs() <= 1e-12,
            "magnitude complement violated: {m} + {m_swapped}"
        );
    }
    let scores = uncertainty_scores(
        &pairs.iter().map(|p| p.swapped()).collect::<Vec<_>>(),
        &ensemble,
    );
    let direct = uncertainty_scores(&pairs, &ensemble);
    for (a, b) in scores.iter().zip(direct.iter()) {
        assert_eq!(a.score, b.score);
    }
    println!("[acceptance] C08 symmetry suite: PASS (200 pairs, all four score families)");
}

/// C9: a scripted mock that flips 46 of 100 labels measures noise 0.46
/// exactly, and indifferent verdicts never reach a training batch.
#[test]
fn c09_remote_teacher_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let spec = EnvSpec::pointmass(1.0, 8);
    let env = make_env(spec.clone()).unwrap();
    let mut rng = rng_stream(90, 0);
    let buffer: Vec<Trajectory> = (0..50)
        .map(|_| env.rollout(&UniformRandomPolicy, &mut rng))
        .collect();
    let pairs: Vec<TrajectoryPair> = sample_pairs(&buffer, 100, &mut rng_stream(90, 1)).unwrap();
    let oracles: Vec<_> = pairs
        .iter()
        .map(|p| oracle_label(p, 1.0).expect("dense rewards never tie"))
        .collect();

    // First 46 answers contradict the oracle, the rest agree.
    let replies: Vec<String> = pairs
        .iter()
        .zip(oracles.iter())
        .enumerate()
        .map(|(i, (_, oracle))| {
            let label = if i < 46 { oracle.reversed() } else { *oracle };
            match label {
                prefnoise_core::teachers::PreferenceLabel::First => "0".into(),
                prefnoise_core::teachers::PreferenceLabel::Second => "1".into(),
            }
        })
        .collect();
    let mut transport = MockTransport::scripted_verdicts(replies);
    let mut teacher = RemoteTeacher::new(RemoteTeacherConfig {
        endpoint_url: "http://localhost:1".into(),
        model_name: "mock".into(),
        api_key_env_var: "NONE".into(),
        timeout: std::time::Duration::from_secs(1),
        max_retries: 0,
        cache_path: dir.path().join("cache.jsonl"),
        prompt: PromptTemplate::CartPole,
    })
    .unwrap();
    let verdicts: Vec<_> = pairs
        .iter()
        .map(|p| teacher.query_preference(&spec, p, &mut transport).unwrap())
        .collect();
    let noise = measure_noise(&verdicts, &oracles).unwrap();
    assert_eq!(noise, 0.46);

    // Indifferent verdicts are excluded from training batches.
    let mut transport = MockTransport::scripted_verdicts(["-1", "0", "-1", "1"]);
    let fresh: Vec<TrajectoryPair> = sample_pairs(&buffer, 4, &mut rng_stream(91, 0)).unwrap();
    let mut batch: Vec<LabeledPreference> = Vec::new();
    let mut teacher2 = RemoteTeacher::new(RemoteTeacherConfig {
        cache_path: dir.path().join("cache2.jsonl"),
        ..teacher.config().clone()
    })
    .unwrap();
    for pair in &fresh {
        let oracle = oracle_label(pair, 1.0).unwrap();
        let verdict = teacher2
            .query_preference(&spec, pair, &mut transport)
            .unwrap();
        if let Some(observed) = verdict.label.to_preference() {
            let mut lp = LabeledPreference::clean(pair.clone(), oracle);
            if observed != oracle {
                lp.flip_observed();
            }
            batch.push(lp);
        }
    }
    assert_eq!(batch.len(), 2);
    println!("[acceptance] C09 remote-teacher protocol: PASS (noise 0.46 exact, indifferent excluded)");
}

/// C10: rerunning an experiment with the same config and seed reproduces
/// its CSV byte for byte.
#[test]
fn c10_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig {
        env: EnvSpec::gridworld(6, 20),
        noise: NoiseModelSpec::Magnitude {
            beta: 1.0,
            feature_subset: vec![2, 3],
            rate: RateMode::Calibrated(0.3),
            max_flips_per_batch: None,
        },
        teacher: TeacherSetup::Scripted {
            gamma: 1.0,
            tie_band: 0.0,
        },
        denoiser: Some(DenoiserConfig::default()),
        train: TrainConfig {
            epochs_per_update: 4,
            ..TrainConfig::default()
        },
        protocol: Protocol {
            queries_per_round: 20,
            rounds: 3,
            seeds: vec![11, 12],
            rollouts_per_round: 20,
            eval_episodes: 14,
            policy_steps_per_round: 1000,
            output_path: Some(dir.path().join("first.csv")),
        },
    };
    run_experiment(&cfg).unwrap();
    let first = std::fs::read(dir.path().join("first.csv")).unwrap();
    cfg.protocol.output_path = Some(dir.path().join("second.csv"));
    run_experiment(&cfg).unwrap();
    let second = std::fs::read(dir.path().join("second.csv")).unwrap();
    assert_eq!(first, second);
    assert!(first.len() > prefnoise::records::CSV_HEADER.len());
    println!("[acceptance] C10 determinism: PASS (rerun CSV byte-identical)");
}
