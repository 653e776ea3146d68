//! One full 2000-step desk-config overfit run: reports the loss trajectory
//! and the reconstruction quality of the trained sampler on its own training
//! pairs. Used to validate the long-running acceptance thresholds.

use std::time::Instant;

use aquadiff::pipeline::{
    enhance_image, evaluate_images, pairs_from_synth, LossMode, PipelineConfig, Trainer,
};
use aquadiff::synth::make_dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let lr: f64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1e-3);
    let iters: usize = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2000);

    let variant = std::env::args().nth(4).unwrap_or_default();

    let mut cfg = PipelineConfig::desk();
    cfg.train.iterations = iters;
    cfg.train.learning_rate = lr;
    cfg.train.seed = seed;
    cfg.train.loss_mode = LossMode::Both;
    cfg.train.log_every = 100;
    for part in variant.split('+').filter(|p| !p.is_empty()) {
        match part {
            "attn32" => cfg.denoiser.attention_resolutions = vec![32, 16, 8],
            "base24" => cfg.denoiser.base_channels = 24,
            "base32" => cfg.denoiser.base_channels = 32,
            "batch2" => cfg.train.batch_size = 2,
            "batch4" => cfg.train.batch_size = 4,
            "heads2" => cfg.denoiser.head_count = 2,
            "rdb3" => cfg.denoiser.rdb_layers = 3,
            "blocks1" => cfg.denoiser.num_res_blocks = 1,
            other => panic!("unknown variant part {other:?}"),
        }
    }
    println!("variant: {variant:?}");

    let pairs = pairs_from_synth(&make_dataset(4, 32, 0).unwrap()).unwrap();
    let mut trainer = Trainer::new(cfg.clone()).unwrap();

    let t0 = Instant::now();
    let outcome = trainer.run(&pairs, None).unwrap();
    println!(
        "seed {seed} lr {lr}: trained {iters} steps in {:.1} s",
        t0.elapsed().as_secs_f64()
    );
    for row in &outcome.log {
        println!(
            "  step {:>5}  total {:>9.4}  eps {:>7.4}  cdc {:>9.4}",
            row.step, row.losses.total, row.losses.eps_mse, row.losses.cdc.total
        );
    }
    let first = outcome.log.first().unwrap().losses.total;
    let last = outcome.log.last().unwrap().losses.total;
    println!("  loss ratio last/first = {:.4}", last / first);

    let t0 = Instant::now();
    let mut scored = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xAB1A_7E00);
        rng.set_stream(i as u64);
        let out = enhance_image(
            trainer.net(),
            trainer.schedule(),
            &cfg.compensation,
            cfg.clamp_x0,
            &pair.degraded,
            &mut rng,
        )
        .unwrap();
        scored.push((pair.name.clone(), out, Some(pair.clean.clone())));
    }
    let report = evaluate_images(&scored).unwrap();
    println!("  enhanced 4 pairs in {:.1} s", t0.elapsed().as_secs_f64());
    for row in &report.rows {
        println!(
            "  {}  psnr {:>6.2}  ssim {:>6.4}",
            row.name,
            row.psnr.unwrap(),
            row.ssim.unwrap()
        );
    }
    println!(
        "  mean psnr {:.2}  mean ssim {:.4}",
        report.mean.psnr.unwrap(),
        report.mean.ssim.unwrap()
    );
}
