use approx::assert_abs_diff_eq;
use ndarray::{arr1, ArrayD};

use crate::autodiff::PadMode;
use crate::denoiser::DenoiserConfig;
use crate::imaging::save_png;
use crate::synth::make_dataset;

use super::*;

/// Smallest full-featured setup: 8-pixel inputs, two levels, one block,
/// attention and cross-attention at 4x4, an 8-step schedule.
fn tiny_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::desk();
    cfg.denoiser = DenoiserConfig {
        base_channels: 8,
        channel_multipliers: vec![1, 2],
        num_res_blocks: 1,
        attention_resolutions: vec![4],
        use_cross_attention: true,
        use_rdb: true,
        dense_skips: true,
        concat_condition: false,
        rdb_layers: 2,
        rdb_growth: 4,
        time_embed_dim: 8,
        head_count: 2,
        input_size: 8,
        groups: 4,
        pad_mode: PadMode::Zeros,
    };
    cfg.schedule = ScheduleConfig {
        t_steps: 8,
        beta_start: 1e-4,
        beta_end: 0.35,
    };
    cfg.loss.ssim_window = 5; // 11 would not fit an 8-pixel patch
    cfg.train.patch_size = 8;
    cfg.train.iterations = 4;
    cfg.train.learning_rate = 1e-3;
    cfg.validate().unwrap();
    cfg
}

fn tiny_pairs(n: usize) -> Vec<ImagePair> {
    pairs_from_synth(&make_dataset(n, 8, 3).unwrap()).unwrap()
}

/// 16-pixel variant for tests that score with the full-reference metrics,
/// whose fixed 11x11 SSIM window cannot fit an 8-pixel image.
fn small16_config() -> PipelineConfig {
    let mut cfg = tiny_config();
    cfg.denoiser.input_size = 16;
    cfg.denoiser.attention_resolutions = vec![8];
    cfg.loss.ssim_window = 11;
    cfg.train.patch_size = 16;
    cfg.validate().unwrap();
    cfg
}

fn pairs16(n: usize) -> Vec<ImagePair> {
    pairs_from_synth(&make_dataset(n, 16, 3).unwrap()).unwrap()
}

#[test]
fn loss_is_finite_and_positive_at_initialization() {
    let mut trainer = Trainer::new(tiny_config()).unwrap();
    let losses = trainer.step(&tiny_pairs(2)).unwrap();
    assert!(losses.total.is_finite() && losses.total > 0.0, "{losses:?}");
    assert!(losses.eps_mse > 0.0);
    assert!(losses.cdc.total > 0.0);
}

#[test]
fn identical_seeds_give_bit_identical_trajectories() {
    let pairs = tiny_pairs(2);
    let mut a = Trainer::new(tiny_config()).unwrap();
    let mut b = Trainer::new(tiny_config()).unwrap();
    for step in 0..10 {
        let la = a.step(&pairs).unwrap();
        let lb = b.step(&pairs).unwrap();
        assert_eq!(la.total, lb.total, "losses diverged at step {step}");
        for ((na, va), (nb, vb)) in a.net().params().iter().zip(b.net().params().iter()) {
            assert_eq!(na, nb);
            assert_eq!(va, vb, "weights of {na:?} diverged at step {step}");
        }
    }
}

#[test]
fn different_seeds_give_different_trajectories() {
    let pairs = tiny_pairs(2);
    let mut a = Trainer::new(tiny_config()).unwrap();
    let mut cfg = tiny_config();
    cfg.train.seed = 1;
    let mut b = Trainer::new(cfg).unwrap();
    let la = a.step(&pairs).unwrap();
    let lb = b.step(&pairs).unwrap();
    assert_ne!(la.total, lb.total);
}

#[test]
fn adam_step_matches_hand_computed_update() {
    // Quadratic surrogate f(p) = p^2 at p = 1, so the gradient is 2.
    let mut p = arr1(&[1.0]).into_dyn();
    let g = arr1(&[2.0]).into_dyn();
    let mut m = ArrayD::zeros(p.raw_dim());
    let mut v = ArrayD::zeros(p.raw_dim());
    let (lr, b1, b2) = (0.1, 0.9, 0.999);

    adam_update(&mut p, &g, &mut m, &mut v, 1, lr, b1, b2);
    // First step: m = 0.1*2, v = 0.001*4; bias correction divides by the
    // same factors, so m_hat = 2, v_hat = 4.
    assert_abs_diff_eq!(m[0], 0.2, epsilon = 1e-15);
    assert_abs_diff_eq!(v[0], 0.004, epsilon = 1e-15);
    let expected = 1.0 - lr * (0.2 / (1.0 - b1)) / ((0.004 / (1.0 - b2)).sqrt() + 1e-8);
    assert_abs_diff_eq!(p[0], expected, epsilon = 1e-15);

    // Second step with the same raw gradient.
    let p1 = p[0];
    adam_update(&mut p, &g, &mut m, &mut v, 2, lr, b1, b2);
    let m2 = 0.9 * 0.2 + 0.1 * 2.0;
    let v2 = 0.999 * 0.004 + 0.001 * 4.0;
    let expected2 =
        p1 - lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + 1e-8);
    assert_abs_diff_eq!(p[0], expected2, epsilon = 1e-15);
}

#[test]
fn empty_dataset_is_rejected_before_any_step() {
    let mut trainer = Trainer::new(tiny_config()).unwrap();
    assert!(trainer.step(&[]).is_err());
    assert!(trainer.run(&[], None).is_err());
    assert_eq!(trainer.state().step, 0);

    // Validation reservation must leave at least one training pair.
    let mut cfg = tiny_config();
    cfg.train.val_pairs = 2;
    let mut trainer = Trainer::new(cfg).unwrap();
    assert!(trainer.run(&tiny_pairs(2), None).is_err());
}

#[test]
fn loss_modes_select_the_expected_terms() {
    let pairs = tiny_pairs(1);

    let mut cfg = tiny_config();
    cfg.train.loss_mode = LossMode::EpsMse;
    let losses = Trainer::new(cfg).unwrap().step(&pairs).unwrap();
    assert_eq!(losses.cdc.total, 0.0);
    assert!(losses.eps_mse > 0.0);
    assert_eq!(losses.total, losses.eps_mse);

    let mut cfg = tiny_config();
    cfg.train.loss_mode = LossMode::Cdc;
    let losses = Trainer::new(cfg).unwrap().step(&pairs).unwrap();
    assert_eq!(losses.eps_mse, 0.0);
    assert!(losses.cdc.total > 0.0);
    assert_eq!(losses.total, losses.cdc.total);

    let mut cfg = tiny_config();
    cfg.train.loss_mode = LossMode::Both;
    let losses = Trainer::new(cfg).unwrap().step(&pairs).unwrap();
    assert!(losses.eps_mse > 0.0 && losses.cdc.total > 0.0);
    assert_abs_diff_eq!(
        losses.total,
        losses.eps_mse + losses.cdc.total,
        epsilon = 1e-14
    );
}

fn assert_paramsets_close(a: &crate::autodiff::ParamSet, b: &crate::autodiff::ParamSet, tol: f64) {
    a.compatible_with(b).unwrap();
    for ((_, va), (_, vb)) in a.iter().zip(b.iter()) {
        for (x, y) in va.iter().zip(vb.iter()) {
            assert!(
                (x - y).abs() <= tol + x.abs() * 1e-6,
                "values {x} vs {y} differ beyond f32 precision"
            );
        }
    }
}

#[test]
fn checkpoint_resume_continues_the_trajectory_within_noise() {
    let pairs = tiny_pairs(2);
    // Uninterrupted reference run: 6 steps.
    let mut reference = Trainer::new(tiny_config()).unwrap();
    let mut ref_losses = Vec::new();
    for _ in 0..6 {
        ref_losses.push(reference.step(&pairs).unwrap().total);
    }

    // Interrupted run: 3 steps, checkpoint, restore, 3 more.
    let mut first = Trainer::new(tiny_config()).unwrap();
    for i in 0..3 {
        let l = first.step(&pairs).unwrap().total;
        assert_eq!(l, ref_losses[i], "pre-save trajectory must match exactly");
    }
    let ckpt = first.to_checkpoint();
    let bytes = ckpt.to_bytes().unwrap();
    let restored = crate::checkpoint::Checkpoint::from_bytes(&bytes).unwrap();
    let mut resumed = Trainer::from_checkpoint(&restored, tiny_config()).unwrap();

    assert_eq!(resumed.state().step, 3);
    assert_eq!(resumed.config(), first.config());
    assert_paramsets_close(resumed.net().params(), first.net().params(), 1e-6);
    assert_paramsets_close(&resumed.state().m, &first.state().m, 1e-6);
    assert_paramsets_close(&resumed.state().v, &first.state().v, 1e-6);

    // The continuation replays the same noise streams; the only
    // perturbation is the f32 rounding of the stored state.
    for expected in ref_losses.iter().skip(3) {
        let got = resumed.step(&pairs).unwrap().total;
        let rel = (got - expected).abs() / expected.abs();
        assert!(
            rel < 1e-3,
            "resumed loss {got} vs uninterrupted {expected} (rel {rel:.2e})"
        );
    }
}

#[test]
fn run_writes_logs_and_checkpoints_and_tracks_best() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut cfg = tiny_config();
    cfg.train.iterations = 4;
    cfg.train.checkpoint_every = 2;
    cfg.train.val_pairs = 1;
    let mut trainer = Trainer::new(cfg.clone()).unwrap();
    let outcome = trainer.run(&tiny_pairs(3), Some(&out)).unwrap();

    assert_eq!(outcome.log.len(), 4, "log_every = 1 logs every step");
    assert_eq!(outcome.log[0].step, 1);
    assert_eq!(outcome.val.len(), 2, "validated at steps 2 and 4");
    assert!(outcome.best_step.is_some());

    for file in ["train_log.csv", "val_log.csv", "ckpt_step2.aqdf", "ckpt_step4.aqdf", "final.aqdf", "best.aqdf"] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let csv = std::fs::read_to_string(out.join("train_log.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(LOG_HEADER));
    assert_eq!(lines.count(), 4);

    // The stored config digests back to exactly this run's configuration.
    let final_ckpt = crate::checkpoint::Checkpoint::load(out.join("final.aqdf")).unwrap();
    verify_config_digest(&final_ckpt, &cfg).unwrap();
    // Run-control settings may differ: resuming with a larger iteration budget
    // (or different logging cadence) is still the same model identity.
    let mut extended = cfg.clone();
    extended.train.iterations = 50;
    extended.train.log_every = 7;
    verify_config_digest(&final_ckpt, &extended).unwrap();
    // But anything touching the model itself must match.
    let mut other = cfg.clone();
    other.schedule.t_steps = 9;
    let err = verify_config_digest(&final_ckpt, &other).unwrap_err();
    assert!(err.to_string().contains("mismatch"), "{err}");
}

#[test]
fn enhance_is_deterministic_in_range_and_shape_checked() {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    let mut trainer = Trainer::new(tiny_config()).unwrap();
    let pairs = tiny_pairs(1);
    trainer.step(&pairs).unwrap();
    let ckpt = trainer.to_checkpoint();
    let (cfg, net, schedule) = restore_for_inference(&ckpt).unwrap();

    let run = |seed: u64| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        enhance_image(
            &net,
            &schedule,
            &cfg.compensation,
            cfg.clamp_x0,
            &pairs[0].degraded,
            &mut rng,
        )
        .unwrap()
    };
    let a = run(9);
    let b = run(9);
    assert_eq!(a.data(), b.data(), "fixed seed must be bit-identical");
    let c = run(10);
    assert_ne!(a.data(), c.data(), "different seeds explore different noise");

    assert_eq!((a.height(), a.width(), a.channels()), (8, 8, 3));
    assert!(a.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));

    let wrong_size = crate::imaging::Image::zeros(16, 16, 3);
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    assert!(enhance_image(
        &net,
        &schedule,
        &cfg.compensation,
        cfg.clamp_x0,
        &wrong_size,
        &mut rng
    )
    .is_err());
}

#[test]
fn enhance_dir_writes_every_file_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let in_dir = dir.path().join("in");
    std::fs::create_dir_all(&in_dir).unwrap();
    let pairs = tiny_pairs(2);
    for pair in &pairs {
        save_png(&pair.degraded, &in_dir.join(format!("{}.png", pair.name))).unwrap();
    }
    let trainer = Trainer::new(tiny_config()).unwrap();
    let ckpt = trainer.to_checkpoint();

    let out_a = dir.path().join("out_a");
    let out_b = dir.path().join("out_b");
    let names = enhance_dir(&ckpt, &in_dir, &out_a, 4).unwrap();
    enhance_dir(&ckpt, &in_dir, &out_b, 4).unwrap();
    assert_eq!(names, vec!["synth_0000", "synth_0001"]);
    for name in &names {
        let a = std::fs::read(out_a.join(format!("{name}.png"))).unwrap();
        let b = std::fs::read(out_b.join(format!("{name}.png"))).unwrap();
        assert_eq!(a, b, "repeated runs must produce identical bytes");
    }
}

#[test]
fn evaluate_identical_dirs_saturates_reference_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let enhanced = dir.path().join("enhanced");
    let reference = dir.path().join("reference");
    std::fs::create_dir_all(&enhanced).unwrap();
    std::fs::create_dir_all(&reference).unwrap();
    for pair in pairs16(2) {
        save_png(&pair.clean, &enhanced.join(format!("{}.png", pair.name))).unwrap();
        save_png(&pair.clean, &reference.join(format!("{}.png", pair.name))).unwrap();
    }
    let report = evaluate_dirs(&enhanced, Some(&reference)).unwrap();
    assert_eq!(report.rows.len(), 2);
    for row in &report.rows {
        assert_eq!(row.psnr, Some(99.0), "identical images hit the PSNR cap");
        assert_abs_diff_eq!(row.ssim.unwrap(), 1.0, epsilon = 1e-12);
    }
    assert_eq!(report.mean.psnr, Some(99.0));

    // Aggregate equals the mean of the rows.
    let mean_uiqm = report.rows.iter().map(|r| r.uiqm).sum::<f64>() / 2.0;
    assert_abs_diff_eq!(report.mean.uiqm, mean_uiqm, epsilon = 1e-12);

    let csv = report.to_csv();
    assert!(csv.starts_with("name,uiqm,uciqe,psnr,ssim\n"));
    assert_eq!(csv.lines().count(), 4, "two rows + mean + header");
    assert!(csv.lines().last().unwrap().starts_with("mean,"));
}

#[test]
fn evaluate_without_reference_omits_reference_columns() {
    let dir = tempfile::tempdir().unwrap();
    let enhanced = dir.path().join("enhanced");
    std::fs::create_dir_all(&enhanced).unwrap();
    for pair in tiny_pairs(2) {
        save_png(&pair.degraded, &enhanced.join(format!("{}.png", pair.name))).unwrap();
    }
    let report = evaluate_dirs(&enhanced, None).unwrap();
    assert!(report.rows.iter().all(|r| r.psnr.is_none() && r.ssim.is_none()));
    assert!(report.mean.psnr.is_none());
    let csv = report.to_csv();
    assert!(csv.starts_with("name,uiqm,uciqe\n"));
    assert!(!csv.contains("psnr"));
}

#[test]
fn evaluate_rejects_unpaired_and_mixed_references() {
    let dir = tempfile::tempdir().unwrap();
    let enhanced = dir.path().join("enhanced");
    let reference = dir.path().join("reference");
    std::fs::create_dir_all(&enhanced).unwrap();
    std::fs::create_dir_all(&reference).unwrap();
    let pairs = tiny_pairs(2);
    for pair in &pairs {
        save_png(&pair.degraded, &enhanced.join(format!("{}.png", pair.name))).unwrap();
    }
    save_png(&pairs[0].clean, &reference.join("synth_0000.png")).unwrap();
    let err = evaluate_dirs(&enhanced, Some(&reference)).unwrap_err();
    assert!(err.to_string().contains("synth_0001"), "{err}");

    let imgs = vec![
        ("a".to_string(), pairs[0].degraded.clone(), Some(pairs[0].clean.clone())),
        ("b".to_string(), pairs[1].degraded.clone(), None),
    ];
    assert!(evaluate_images(&imgs).is_err());
}

#[test]
fn ablation_variants_toggle_exactly_the_two_factors() {
    let base = tiny_config();
    assert_eq!(
        VARIANTS.map(|v| v.name),
        ["baseline", "+cdc", "+backbone", "full"]
    );

    let baseline = variant_config(&base, VARIANTS[0], 7);
    assert_eq!(baseline.train.seed, 7);
    assert_eq!(baseline.train.loss_mode, LossMode::EpsMse);
    assert!(!baseline.denoiser.use_rdb);
    assert!(!baseline.denoiser.dense_skips);
    assert!(!baseline.denoiser.use_cross_attention);
    assert!(baseline.denoiser.concat_condition);
    assert!(baseline.denoiser.attention_resolutions.is_empty());
    baseline.validate().unwrap();

    let cdc_only = variant_config(&base, VARIANTS[1], 7);
    assert_eq!(cdc_only.train.loss_mode, LossMode::Both);
    assert_eq!(cdc_only.denoiser, baseline.denoiser);

    let backbone_only = variant_config(&base, VARIANTS[2], 7);
    assert_eq!(backbone_only.train.loss_mode, LossMode::EpsMse);
    assert_eq!(backbone_only.denoiser, base.denoiser);

    let full = variant_config(&base, VARIANTS[3], 7);
    assert_eq!(full.train.loss_mode, LossMode::Both);
    assert_eq!(full.denoiser, base.denoiser);
}

#[test]
fn ablation_micro_run_reports_four_finite_rows() {
    let mut base = small16_config();
    base.train.iterations = 2;
    let report = run_ablation(&base, &[5], &pairs16(2)).unwrap();
    assert_eq!(report.variants.len(), 4);
    for v in &report.variants {
        assert_eq!(v.per_seed.len(), 1);
        assert!(v.mean_psnr().is_finite() && v.mean_psnr() > 0.0);
        assert!(v.mean_ssim().is_finite());
        assert!(v.mean_uiqm().is_finite());
        assert!(v.mean_uciqe().is_finite());
    }
    assert!(report.get("full").is_some() && report.get("nope").is_none());
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 5, "header + four variant rows");
    assert!(csv.starts_with("variant,psnr,ssim,uiqm,uciqe\n"));
}
