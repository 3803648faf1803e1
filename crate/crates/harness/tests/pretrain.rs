use pnda_core::{rotate, ImageSample, Rotation, Verdict};
use pnda_harness::{
    generate_synthetic_corpus, plan_batches, pretrain, ExperimentConfig, Framework, HarnessError, Pretrainer,
    SyntheticCorpusSpec,
};
use pnda_losses::AugMode;
use pnda_nn::{EncoderSpec, Module, OptimizerSpec};
use pnda_sampler::{RaiPartition, ScoreRecord};

fn corpus(n: usize, size: usize, seed: u64) -> Vec<ImageSample> {
    generate_synthetic_corpus(&SyntheticCorpusSpec { n_rai: n / 2, n_nonrai: n - n / 2, size, noise: 0.02, seed })
        .unwrap()
}

fn small_cfg(framework: Framework, mode: AugMode) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        framework,
        mode,
        encoder: EncoderSpec::Conv { channels: vec![8, 16] },
        projection: vec![32, 16],
        predictor: vec![32, 16],
        batch_size: 8,
        epochs: 2,
        queue_size: 32,
        seed: 5,
        ..ExperimentConfig::default()
    };
    if mode == AugMode::Pnda {
        cfg.partition = Some("truth.csv".into());
    }
    cfg
}

fn truth_partition(corpus: &[ImageSample]) -> RaiPartition {
    let records = corpus
        .iter()
        .map(|s| {
            let verdict = s.truth().unwrap();
            ScoreRecord { id: s.id().to_string(), score: if verdict.is_rai() { 1.3 } else { 0.1 }, verdict }
        })
        .collect();
    RaiPartition::from_records(records, Default::default()).unwrap()
}

fn row_mean_top_bottom(img: &ImageSample) -> (f64, f64) {
    let n = img.size();
    let half = n / 2;
    let mean = |rows: std::ops::Range<usize>| {
        let mut s = 0.0;
        for y in rows.clone() {
            for x in 0..n {
                for c in 0..img.channels() {
                    s += img.pixel(y, x, c) as f64;
                }
            }
        }
        s / (rows.len() * n * img.channels()) as f64
    };
    (mean(0..half), mean(n - half..n))
}

#[test]
fn synthetic_rai_rotation_differs_by_noise_only() {
    let sigma = 0.02;
    let images =
        generate_synthetic_corpus(&SyntheticCorpusSpec { n_rai: 60, n_nonrai: 0, size: 32, noise: sigma, seed: 1 }).unwrap();
    for img in &images {
        let rot = rotate(img, Rotation::R90);
        let mse: f64 = img.pixels().iter().zip(rot.pixels()).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>()
            / img.pixels().len() as f64;
        // Difference of two independent N(0, sigma^2) draws.
        let expected = sigma * 2f64.sqrt();
        let rmse = mse.sqrt();
        assert!((rmse / expected - 1.0).abs() < 0.1, "{}: rmse {rmse} vs {expected}", img.id());
    }
}

#[test]
fn synthetic_nonrai_flips_under_half_turn() {
    let images =
        generate_synthetic_corpus(&SyntheticCorpusSpec { n_rai: 0, n_nonrai: 60, size: 32, noise: 0.02, seed: 2 }).unwrap();
    for img in &images {
        let (top, bottom) = row_mean_top_bottom(img);
        let (rtop, rbottom) = row_mean_top_bottom(&rotate(img, Rotation::R180));
        assert!(top > bottom, "{} is not top-bright", img.id());
        assert!(rtop < rbottom, "{} did not flip", img.id());
    }
}

fn nt_xent(rows: &[Vec<f64>], tau: f64) -> f64 {
    let n = rows.len();
    let m = n / 2;
    let unit: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            r.iter().map(|v| v / norm).collect()
        })
        .collect();
    let sim = |a: usize, b: usize| unit[a].iter().zip(&unit[b]).map(|(x, y)| x * y).sum::<f64>() / tau;
    let mut total = 0.0;
    for i in 0..n {
        let j = (i + m) % n;
        let denom: f64 = (0..n).filter(|&k| k != i).map(|k| sim(i, k).exp()).sum();
        total += denom.ln() - sim(i, j);
    }
    total / n as f64
}

#[test]
fn mode_none_matches_independent_nt_xent() {
    let data = corpus(32, 16, 0);
    let cfg = small_cfg(Framework::Simclr, AugMode::None);
    let mut trainer = Pretrainer::new(&cfg, &data, None).unwrap();
    let tau = cfg.tau().unwrap();
    for plan in trainer.next_epoch(1).unwrap().into_iter().take(3) {
        let batch = trainer.prepare(plan).unwrap();
        assert_eq!(batch.views.len(), 2 * cfg.batch_size);
        let raw = trainer.online().embed(&batch.views).unwrap();
        let rows: Vec<Vec<f64>> = raw.data.chunks(raw.cols).map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let oracle = nt_xent(&rows, tau);
        let loss = trainer.step(&batch, 0.05).unwrap();
        assert!((loss - oracle).abs() < 1e-10, "{loss} vs {oracle}");
    }
}

#[test]
fn simclr_none_loss_decreases_for_most_seeds() {
    let data = corpus(64, 32, 3);
    let seeds = 0..5u64;
    let mut decreasing = 0;
    for seed in seeds.clone() {
        let cfg = ExperimentConfig {
            encoder: EncoderSpec::Conv { channels: vec![16, 32, 32] },
            projection: vec![64, 32],
            optimizer: Some(OptimizerSpec::adam(3e-3)),
            seed,
            ..small_cfg(Framework::Simclr, AugMode::None)
        };
        let out = pretrain(&cfg, &data, None).unwrap();
        assert!(out.epoch_losses.iter().all(|l| l.is_finite()));
        if out.epoch_losses[1] < out.epoch_losses[0] {
            decreasing += 1;
        }
    }
    assert!(decreasing * 5 >= seeds.count() * 4, "only {decreasing}/5 seeds decreased");
}

#[test]
fn identical_config_gives_identical_losses() {
    let data = corpus(32, 16, 1);
    let partition = truth_partition(&data);
    for framework in [Framework::Simclr, Framework::MocoV2, Framework::Byol] {
        let cfg = small_cfg(framework, AugMode::Pnda);
        let a = pretrain(&cfg, &data, Some(&partition)).unwrap();
        let b = pretrain(&cfg, &data, Some(&partition)).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.epoch_losses), bits(&b.epoch_losses), "{framework}");
        assert_eq!(a.steps, b.steps);
        assert!(a.online == b.online);
    }
}

#[test]
fn pool_sizes_follow_the_framework_layout() {
    let data = corpus(32, 16, 2);
    let partition = truth_partition(&data);
    let m = 8;

    let cfg = small_cfg(Framework::Simclr, AugMode::Pnda);
    let mut t = Pretrainer::new(&cfg, &data, Some(&partition)).unwrap();
    let plan = t.next_epoch(1).unwrap().remove(0);
    let batch = t.prepare(plan).unwrap();
    assert_eq!(batch.views.len(), 4 * m);
    assert_eq!(batch.plan.specs.len(), 2 * m);
    for spec in &batch.plan.specs {
        assert_eq!(spec.positives.len() + spec.negatives.len() + 1, 4 * m);
    }

    let cfg = small_cfg(Framework::MocoV2, AugMode::Pnda);
    let mut t = Pretrainer::new(&cfg, &data, Some(&partition)).unwrap();
    assert!(t.queue().unwrap().is_full());
    let plan = t.next_epoch(1).unwrap().remove(0);
    let batch = t.prepare(plan).unwrap();
    // queries, keys and three rotated key blocks; the queue is appended at step time
    assert_eq!(batch.views.len(), 5 * m);
    for (i, spec) in batch.plan.specs.iter().enumerate() {
        let extra = match batch.plan.treatments[i] {
            Some(Verdict::NonRai) => 3,
            _ => 0,
        };
        assert_eq!(spec.negatives.len(), cfg.queue_size + extra);
        assert!(spec.positives.iter().chain(&spec.negatives).all(|&k| k < 5 * m + cfg.queue_size));
    }
    let before = t.queue().unwrap().iter().map(<[f64]>::to_vec).collect::<Vec<_>>();
    t.step(&batch, 0.01).unwrap();
    let after = t.queue().unwrap().iter().map(<[f64]>::to_vec).collect::<Vec<_>>();
    assert_eq!(after.len(), cfg.queue_size);
    assert_eq!(&after[..cfg.queue_size - m], &before[m..]);
}

#[test]
fn byol_target_gets_no_gradient_and_follows_ema() {
    let data = corpus(32, 16, 4);
    let cfg = ExperimentConfig { ema_momentum: 0.9, ..small_cfg(Framework::Byol, AugMode::Nda) };
    let mut t = Pretrainer::new(&cfg, &data, None).unwrap();
    let plan = t.next_epoch(1).unwrap().remove(0);
    let batch = t.prepare(plan).unwrap();
    let target_before = t.target().unwrap().clone();
    t.step(&batch, 0.05).unwrap();
    let target = t.target().unwrap();
    assert!(target.params().iter().all(|p| p.grad.iter().all(|&g| g == 0.0)));
    let online = t.online().branch.params();
    assert!(online.iter().any(|p| p.grad.iter().any(|&g| g != 0.0)));
    for ((after, before), on) in target.params().iter().zip(target_before.params()).zip(&online) {
        for ((a, b), o) in after.value.iter().zip(&before.value).zip(&on.value) {
            assert!((a - (0.9 * b + 0.1 * o)).abs() <= 1e-6, "{}", after.name);
        }
    }
}

#[test]
fn pda_never_reads_the_partition() {
    let data = corpus(32, 16, 7);
    let cfg = small_cfg(Framework::Simclr, AugMode::Pda);
    let bogus = RaiPartition::uniform(["unrelated"], Verdict::NonRai).unwrap();
    let without = plan_batches(&cfg, &data, None, 2).unwrap();
    let with = plan_batches(&cfg, &data, Some(&bogus), 2).unwrap();
    assert_eq!(without, with);
    assert!(without.iter().all(|p| p.treatments.iter().all(|t| *t == Some(Verdict::Rai))));
}

#[test]
fn nda_specs_have_a_single_positive() {
    let data = corpus(32, 16, 8);
    for framework in [Framework::Simclr, Framework::MocoV2] {
        let cfg = small_cfg(framework, AugMode::Nda);
        for plan in plan_batches(&cfg, &data, None, 2).unwrap() {
            assert!(plan.specs.iter().all(|s| s.positives.len() == 1), "{framework}");
        }
    }
}

#[test]
fn pnda_rejects_incomplete_partition() {
    let data = corpus(32, 16, 9);
    let cfg = small_cfg(Framework::Simclr, AugMode::Pnda);
    let partial = RaiPartition::uniform(data[..10].iter().map(|s| s.id()), Verdict::Rai).unwrap();
    assert!(matches!(pretrain(&cfg, &data, Some(&partial)), Err(HarnessError::PartitionCoverage { .. })));
    assert!(pretrain(&cfg, &data, None).is_err());
}

#[test]
fn nonfinite_loss_aborts_with_last_good_encoder() {
    let data = corpus(32, 16, 10);
    let cfg = ExperimentConfig {
        epochs: 3,
        optimizer: Some(OptimizerSpec::sgd(1e30, 0.0, 0.0)),
        ..small_cfg(Framework::Byol, AugMode::None)
    };
    match pretrain(&cfg, &data, None) {
        Err(HarnessError::Diverged { loss, .. }) => assert!(!loss.is_finite()),
        Err(e) => panic!("unexpected error {e}"),
        Ok(out) => panic!("run with a huge learning rate finished: {:?}", out.epoch_losses),
    }
}
