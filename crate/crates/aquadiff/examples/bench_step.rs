//! Rough wall-clock measurements for the desk configuration: one training
//! step and one full reverse-chain enhancement at 32x32. Used to budget the
//! long-running acceptance tests.

use std::time::Instant;

use aquadiff::pipeline::{enhance_image, pairs_from_synth, PipelineConfig, Trainer};
use aquadiff::synth::make_dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let cfg = PipelineConfig::desk();
    let pairs = pairs_from_synth(&make_dataset(4, 32, 0).unwrap()).unwrap();
    let mut trainer = Trainer::new(cfg.clone()).unwrap();

    // Warm-up step (allocations, page faults).
    let t0 = Instant::now();
    trainer.step(&pairs).unwrap();
    println!("first step: {:.3} s", t0.elapsed().as_secs_f64());

    let n = 10;
    let t0 = Instant::now();
    for _ in 0..n {
        trainer.step(&pairs).unwrap();
    }
    let per = t0.elapsed().as_secs_f64() / n as f64;
    println!("train step: {per:.3} s  ({:.1} min / 2000 steps)", per * 2000.0 / 60.0);

    let schedule = cfg.schedule.build().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let t0 = Instant::now();
    let img = enhance_image(
        trainer.net(),
        &schedule,
        &cfg.compensation,
        cfg.clamp_x0,
        &pairs[0].degraded,
        &mut rng,
    )
    .unwrap();
    println!(
        "enhance (T={}): {:.3} s  (mean {:.3})",
        schedule.t_steps(),
        t0.elapsed().as_secs_f64(),
        img.data().iter().sum::<f64>() / img.data().len() as f64
    );
}
