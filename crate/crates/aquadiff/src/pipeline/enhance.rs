//! Inference: full reverse-diffusion enhancement of degraded images.

use std::path::Path;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::checkpoint::Checkpoint;
use crate::compensation::{preprocess, CompensationParams};
use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::imaging::{load_png, save_png, Image};
use crate::schedule::{from_model_space, to_model_space, NoiseSchedule};

use super::configio::PipelineConfig;
use super::dataset::png_stems;

fn digest_array(a: &Array3<f64>) -> [u8; 32] {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for &v in a.iter() {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

fn standard_normal(rng: &mut ChaCha20Rng, shape: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_simple_fn(shape, || rng.sample(StandardNormal))
}

/// Enhances one degraded image by running the full reverse process.
///
/// The conditioning signal is the chromatically compensated input, mapped
/// to model space once and applied unchanged at every timestep. Sampling
/// starts from pure Gaussian noise and walks `t = T .. 1`; at each step
/// the clean estimate is formed from the predicted noise (optionally
/// clamped to the model-space range) and the posterior mean is taken,
/// with posterior noise added for every step except the last.
pub fn enhance_image(
    net: &Denoiser,
    schedule: &NoiseSchedule,
    comp: &CompensationParams,
    clamp_x0: bool,
    degraded: &Image,
    rng: &mut ChaCha20Rng,
) -> Result<Image> {
    let s = net.config().input_size;
    if degraded.height() != s || degraded.width() != s || degraded.channels() != 3 {
        return Err(Error::dim(format!(
            "enhance expects a 3-channel {s}x{s} image (the network's input size), got {}x{}x{}",
            degraded.height(),
            degraded.width(),
            degraded.channels()
        )));
    }
    let y01 = preprocess(degraded, comp)?;
    let y = to_model_space(&y01.to_chw());
    let y_digest = digest_array(&y);

    let mut x = standard_normal(rng, (3, s, s));
    for t in (1..=schedule.t_steps()).rev() {
        // The conditioning must be bit-identical at every step.
        debug_assert_eq!(digest_array(&y), y_digest, "conditioning drifted at t={t}");
        let eps_hat = net.denoise(&x, &y, t)?;
        let mut x0_hat = schedule.predict_x0(&x, &eps_hat, t)?;
        if clamp_x0 {
            x0_hat.mapv_inplace(|v| v.clamp(-1.0, 1.0));
        }
        let mean = schedule.posterior_mean_from_x0(&x, &x0_hat, t)?;
        x = if t > 1 {
            let z = standard_normal(rng, (3, s, s));
            mean + z * schedule.posterior_var(t).sqrt()
        } else {
            mean
        };
    }
    Image::from_chw(&from_model_space(&x))
}

/// Loads a checkpoint for inference: rebuilds the network from its stored
/// configuration and weights (optimizer arrays are not required) and
/// returns the parsed configuration alongside.
pub fn restore_for_inference(
    ckpt: &Checkpoint,
) -> Result<(PipelineConfig, Denoiser, NoiseSchedule)> {
    let cfg = PipelineConfig::from_flat(&ckpt.config)?;
    let schedule = cfg.schedule.build()?;
    let reference = Denoiser::new(cfg.denoiser.clone(), 0)?;
    let mut weights = crate::autodiff::ParamSet::new();
    for i in 0..reference.params().len() {
        let name = reference.params().name_at(i);
        weights.insert(name, ckpt.arrays.get(name)?.clone());
    }
    let net = Denoiser::from_parts(cfg.denoiser.clone(), weights)?;
    Ok((cfg, net, schedule))
}

/// ChaCha stream id for one file: a hash of its name, so each output
/// depends only on (seed, filename, content), not on what else is in the
/// directory.
fn stem_stream(stem: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(stem.as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Enhances every PNG in `in_dir` into `out_dir` under the same filename.
pub fn enhance_dir(
    ckpt: &Checkpoint,
    in_dir: &Path,
    out_dir: &Path,
    seed: u64,
) -> Result<Vec<String>> {
    let (cfg, net, schedule) = restore_for_inference(ckpt)?;
    let stems = png_stems(in_dir)?;
    if stems.is_empty() {
        return Err(Error::Dataset(format!("no .png files found in {in_dir:?}")));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for stem in &stems {
        let img = load_png(&in_dir.join(format!("{stem}.png")))?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stem_stream(stem));
        let out = enhance_image(
            &net,
            &schedule,
            &cfg.compensation,
            cfg.clamp_x0,
            &img,
            &mut rng,
        )?;
        save_png(&out, &out_dir.join(format!("{stem}.png")))?;
    }
    Ok(stems)
}
