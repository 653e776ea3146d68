//! Cross-domain consistency (CDC) loss.
//!
//! The training objective compares the reconstruction `x̂₀` against the
//! reference `x₀` in five complementary ways:
//!
//! 1. **Pixel L1** — plain mean absolute difference.
//! 2. **Multi-scale L1** — the same comparison after bilinear downsampling
//!    to each scale in a configured set, rescaled so every term measures a
//!    mean per-pixel discrepancy.
//! 3. **Perceptual** — squared distance between frozen feature-stack
//!    activations at selected layers, each normalized by its activation
//!    volume and weighted.
//! 4. **Structural** — `1 − SSIM` with Gaussian-weighted sliding windows.
//! 5. **Spectral** — L1 distance between real-FFT magnitude spectra.
//!
//! Every term is non-negative, exactly zero at `x̂₀ = x₀`, and implemented
//! as a tape operation so gradients flow to the reconstruction. Each term
//! can be toggled independently; [`cdc_total`] adds the enabled terms and
//! reports a per-term breakdown for logging and ablations.

mod extractor;
#[cfg(test)]
mod tests;

pub use extractor::{ConvStackExtractor, FeatureExtractor};

use ndarray::{Array2, Array3};

use crate::autodiff::{rfft2_magnitude, Tape, Var};
use crate::error::{Error, Result};

/// Term toggles, scale/layer selections, and SSIM constants.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Downsampling factors for the multi-scale term, each in (0, 1).
    pub scales: Vec<f64>,
    /// Feature-stack layer ids for the perceptual term.
    pub feature_layers: Vec<usize>,
    /// One non-negative weight per entry of `feature_layers`.
    pub layer_weights: Vec<f64>,
    /// Enables the plain pixel L1 term.
    pub use_pixel: bool,
    /// Enables the multi-scale L1 term.
    pub use_multiscale: bool,
    /// Enables the perceptual feature term.
    pub use_perceptual: bool,
    /// Enables the structural (1 − SSIM) term.
    pub use_ssim: bool,
    /// Enables the spectral magnitude term.
    pub use_fft: bool,
    /// SSIM window side length (odd, ≥ 3).
    pub ssim_window: usize,
    /// Standard deviation of the SSIM window weights.
    pub ssim_sigma: f64,
    /// SSIM luminance stabilizer, (0.01)² for [0, 1] data.
    pub ssim_c1: f64,
    /// SSIM contrast stabilizer, (0.03)² for [0, 1] data.
    pub ssim_c2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            scales: vec![0.5, 0.25],
            feature_layers: vec![2, 7, 16],
            layer_weights: vec![1.0, 1.0, 1.0],
            use_pixel: true,
            use_multiscale: true,
            use_perceptual: true,
            use_ssim: true,
            use_fft: true,
            ssim_window: 11,
            ssim_sigma: 1.5,
            ssim_c1: 1e-4,
            ssim_c2: 9e-4,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for &s in &self.scales {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::param(format!("scale {s} must lie in (0, 1)")));
            }
        }
        if self.feature_layers.len() != self.layer_weights.len() {
            return Err(Error::param(format!(
                "{} feature layers but {} layer weights",
                self.feature_layers.len(),
                self.layer_weights.len()
            )));
        }
        if self.layer_weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::param("layer weights must be >= 0".to_string()));
        }
        if self.ssim_window < 3 || self.ssim_window % 2 == 0 {
            return Err(Error::param(format!(
                "ssim_window must be odd and >= 3, got {}",
                self.ssim_window
            )));
        }
        if !(self.ssim_sigma > 0.0) {
            return Err(Error::param(format!(
                "ssim_sigma must be positive, got {}",
                self.ssim_sigma
            )));
        }
        if !(self.ssim_c1 > 0.0) || !(self.ssim_c2 > 0.0) {
            return Err(Error::param(
                "ssim stabilizer constants must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Per-term values of the most recent loss evaluation, for logs and
/// ablation reports. Disabled terms report 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    /// Combined pixel + multi-scale L1 value.
    pub pixel: f64,
    pub perceptual: f64,
    pub ssim: f64,
    pub fft: f64,
    pub total: f64,
}

fn check_pair(tape: &Tape, x_hat: Var, x0: &Array3<f64>) -> Result<(usize, usize, usize)> {
    let shape = tape.value(x_hat).shape().to_vec();
    let (c, h, w) = x0.dim();
    if shape != [c, h, w] {
        return Err(Error::dim(format!(
            "loss operands disagree: reconstruction {shape:?} vs reference [{c}, {h}, {w}]"
        )));
    }
    Ok((c, h, w))
}

/// Pixel-space L1 bracket: the plain term plus one rescaled term per
/// configured scale. Each scale term is normalized so that it, too, is a
/// mean per-pixel absolute difference — a constant offset `d` contributes
/// `d` once per enabled comparison.
pub fn pixel_multiscale_l1(
    tape: &mut Tape,
    x_hat: Var,
    x0: &Array3<f64>,
    config: &LossConfig,
) -> Result<Var> {
    config.validate()?;
    let (_, h, w) = check_pair(tape, x_hat, x0)?;
    let target = tape.constant(x0.clone().into_dyn());
    let mut terms = Vec::new();
    if config.use_pixel {
        terms.push(tape.mean_abs_diff(x_hat, target));
    }
    if config.use_multiscale {
        for &s in &config.scales {
            let hs = (s * h as f64).floor() as usize;
            let ws = (s * w as f64).floor() as usize;
            if hs == 0 || ws == 0 {
                return Err(Error::param(format!(
                    "scale {s} collapses a {h}x{w} image to zero size"
                )));
            }
            let rx = tape.resize_bilinear(x_hat, hs, ws);
            let rt = tape.resize_bilinear(target, hs, ws);
            terms.push(tape.mean_abs_diff(rx, rt));
        }
    }
    Ok(sum_terms(tape, terms))
}

/// Perceptual term: `Σ_l w_l / (H_l W_l C_l) · ‖φ_l(x̂₀) − φ_l(x₀)‖₂²`
/// over the configured feature layers.
pub fn perceptual_loss(
    tape: &mut Tape,
    x_hat: Var,
    x0: &Array3<f64>,
    extractor: &dyn FeatureExtractor,
    config: &LossConfig,
) -> Result<Var> {
    config.validate()?;
    check_pair(tape, x_hat, x0)?;
    let target = tape.constant(x0.clone().into_dyn());
    let feats_hat = extractor.features(tape, x_hat, &config.feature_layers)?;
    let feats_ref = extractor.features(tape, target, &config.feature_layers)?;
    let mut terms = Vec::new();
    for ((fh, fr), &wl) in feats_hat
        .iter()
        .zip(feats_ref.iter())
        .zip(config.layer_weights.iter())
    {
        // Mean squared difference already divides by the activation volume.
        let mse = tape.mean_sq_diff(*fh, *fr);
        terms.push(tape.scale(mse, wl));
    }
    Ok(sum_terms(tape, terms))
}

/// Structural term: `1 − mean SSIM` over valid Gaussian-weighted windows,
/// averaged across channels. Lies in `[0, 2]`.
pub fn ssim_loss(
    tape: &mut Tape,
    x_hat: Var,
    x0: &Array3<f64>,
    config: &LossConfig,
) -> Result<Var> {
    config.validate()?;
    let (_, h, w) = check_pair(tape, x_hat, x0)?;
    if h < config.ssim_window || w < config.ssim_window {
        return Err(Error::dim(format!(
            "{h}x{w} image is smaller than the {0}x{0} SSIM window",
            config.ssim_window
        )));
    }
    let kernel = gaussian_window(config.ssim_window, config.ssim_sigma);
    let (c1, c2) = (config.ssim_c1, config.ssim_c2);
    let target = tape.constant(x0.clone().into_dyn());

    let mu_x = tape.depthwise_valid(x_hat, kernel.clone());
    let mu_y = tape.depthwise_valid(target, kernel.clone());
    let xx = tape.square(x_hat);
    let yy = tape.square(target);
    let xy = tape.mul(x_hat, target);
    let e_xx = tape.depthwise_valid(xx, kernel.clone());
    let e_yy = tape.depthwise_valid(yy, kernel.clone());
    let e_xy = tape.depthwise_valid(xy, kernel);
    let mu_x2 = tape.square(mu_x);
    let mu_y2 = tape.square(mu_y);
    let mu_xy = tape.mul(mu_x, mu_y);
    let var_x = tape.sub(e_xx, mu_x2);
    let var_y = tape.sub(e_yy, mu_y2);
    let cov = tape.sub(e_xy, mu_xy);

    let lum = {
        let t = tape.scale(mu_xy, 2.0);
        tape.add_scalar(t, c1)
    };
    let st = {
        let t = tape.scale(cov, 2.0);
        tape.add_scalar(t, c2)
    };
    let num = tape.mul(lum, st);
    let den_l = {
        let t = tape.add(mu_x2, mu_y2);
        tape.add_scalar(t, c1)
    };
    let den_s = {
        let t = tape.add(var_x, var_y);
        tape.add_scalar(t, c2)
    };
    let den = tape.mul(den_l, den_s);
    let inv = tape.recip(den);
    let ssim_map = tape.mul(num, inv);
    let mean = tape.mean(ssim_map);
    let neg = tape.neg(mean);
    Ok(tape.add_scalar(neg, 1.0))
}

/// Spectral term: mean L1 distance between real-FFT magnitude spectra
/// over the `h × (⌊w/2⌋+1)` half-spectrum, channel-averaged.
pub fn fft_magnitude_loss(tape: &mut Tape, x_hat: Var, x0: &Array3<f64>) -> Result<Var> {
    check_pair(tape, x_hat, x0)?;
    let target_mag = rfft2_magnitude(x0);
    Ok(tape.fft_mag_l1(x_hat, &target_mag))
}

/// Sum of the enabled terms plus the per-term breakdown.
///
/// Errors if no term is enabled — an all-off configuration almost always
/// indicates a mistake rather than an intentional zero objective.
pub fn cdc_total(
    tape: &mut Tape,
    x_hat: Var,
    x0: &Array3<f64>,
    extractor: &dyn FeatureExtractor,
    config: &LossConfig,
) -> Result<(Var, LossBreakdown)> {
    config.validate()?;
    let mut breakdown = LossBreakdown::default();
    let mut terms = Vec::new();
    if config.use_pixel || config.use_multiscale {
        let v = pixel_multiscale_l1(tape, x_hat, x0, config)?;
        breakdown.pixel = tape.scalar_value(v);
        terms.push(v);
    }
    if config.use_perceptual {
        let v = perceptual_loss(tape, x_hat, x0, extractor, config)?;
        breakdown.perceptual = tape.scalar_value(v);
        terms.push(v);
    }
    if config.use_ssim {
        let v = ssim_loss(tape, x_hat, x0, config)?;
        breakdown.ssim = tape.scalar_value(v);
        terms.push(v);
    }
    if config.use_fft {
        let v = fft_magnitude_loss(tape, x_hat, x0)?;
        breakdown.fft = tape.scalar_value(v);
        terms.push(v);
    }
    if terms.is_empty() {
        return Err(Error::param(
            "no loss terms enabled in this configuration".to_string(),
        ));
    }
    let total = sum_terms(tape, terms);
    breakdown.total = tape.scalar_value(total);
    Ok((total, breakdown))
}

fn sum_terms(tape: &mut Tape, terms: Vec<Var>) -> Var {
    match terms.split_first() {
        None => tape.constant(ndarray::arr0(0.0).into_dyn()),
        Some((&first, rest)) => {
            let mut acc = first;
            for &t in rest {
                acc = tape.add(acc, t);
            }
            acc
        }
    }
}

/// Normalized 2-D Gaussian window (shared with the SSIM metric).
pub(crate) fn gaussian_window(size: usize, sigma: f64) -> Array2<f64> {
    let r = (size - 1) as f64 / 2.0;
    let mut g = Array2::from_shape_fn((size, size), |(i, j)| {
        let di = i as f64 - r;
        let dj = j as f64 - r;
        (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp()
    });
    let s = g.sum();
    g.mapv_inplace(|v| v / s);
    g
}
