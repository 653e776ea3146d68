//! Image quality metrics: full-reference PSNR and SSIM, and the
//! no-reference underwater measures UIQM and UCIQE.
//!
//! All functions are pure and operate on `[0, 1]` images.
//!
//! The UIQM/UCIQE coefficient sets come from their original published
//! definitions: UCIQE weighs Lab chroma spread, luminance contrast, and
//! saturation with (0.4680, 0.2745, 0.2576); UIQM combines colorfulness
//! (UICM), sharpness (UISM), and contrast (UIConM) with
//! (0.0282, 0.2953, 3.5753). Conventions fixed here and mirrored by the
//! bundled reference script (`tools/oracle/metrics_ref.py`):
//!
//! - Lab chroma and luminance are normalized by 100 so every UCIQE
//!   component is dimensionless and roughly unit-scale;
//! - percentiles use linear interpolation over the sorted samples;
//! - UICM trims `⌊0.1·N⌋` samples from each tail of the sorted channel
//!   differences for its means and uses all samples for the variances;
//! - UISM applies a 3×3 Sobel operator with symmetric boundary
//!   reflection, multiplies the magnitude with the channel itself, and
//!   scores it with EME over 8×8 blocks: `(2/K)·Σ ln(max/min)`, where
//!   blocks touching a zero value contribute 0 (the log-ratio limit);
//! - UIConM scores Michelson contrast `w = (max−min)/(max+min)` over 8×8
//!   blocks spanning all three channels as `−(1/K)·Σ w·ln w`, again with
//!   degenerate blocks contributing 0;
//! - partial blocks at the right/bottom edges are ignored.

use crate::error::{Error, Result};
use crate::imaging::{rgb_to_lab, Image};
use crate::loss::gaussian_window;

/// UCIQE component coefficients (chroma spread, luminance contrast,
/// saturation).
pub const UCIQE_COEFFS: [f64; 3] = [0.4680, 0.2745, 0.2576];
/// UIQM component coefficients (UICM, UISM, UIConM).
pub const UIQM_COEFFS: [f64; 3] = [0.0282, 0.2953, 3.5753];
/// Block side length for the EME / logAMEE statistics.
pub const BLOCK: usize = 8;

const EPS: f64 = 1e-12;

fn check_same_dims(x: &Image, reference: &Image) -> Result<()> {
    if (x.height(), x.width(), x.channels())
        != (reference.height(), reference.width(), reference.channels())
    {
        return Err(Error::dim(format!(
            "metric operands disagree: {}x{}x{} vs {}x{}x{}",
            x.height(),
            x.width(),
            x.channels(),
            reference.height(),
            reference.width(),
            reference.channels()
        )));
    }
    Ok(())
}

fn check_rgb(x: &Image) -> Result<()> {
    if x.channels() != 3 {
        return Err(Error::dim(format!(
            "no-reference underwater metrics need a 3-channel image, got {} channels",
            x.channels()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB against a peak of 1.0, capped at
/// 99 dB (identical images would otherwise diverge).
pub fn psnr(x: &Image, reference: &Image) -> Result<f64> {
    check_same_dims(x, reference)?;
    let mse: f64 = x
        .data()
        .iter()
        .zip(reference.data().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.data().len() as f64;
    if mse == 0.0 {
        return Ok(99.0);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(99.0))
}

/// Mean SSIM over valid Gaussian-weighted 11×11 windows (σ = 1.5,
/// C1 = 0.01², C2 = 0.03²), averaged across channels. 1.0 iff identical.
pub fn ssim_metric(x: &Image, reference: &Image) -> Result<f64> {
    ssim_with(x, reference, 11, 1.5, 1e-4, 9e-4)
}

/// SSIM with explicit window parameters.
pub fn ssim_with(
    x: &Image,
    reference: &Image,
    window: usize,
    sigma: f64,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    check_same_dims(x, reference)?;
    let (h, w) = (x.height(), x.width());
    if h < window || w < window {
        return Err(Error::dim(format!(
            "{h}x{w} image is smaller than the {window}x{window} SSIM window"
        )));
    }
    let win = gaussian_window(window, sigma);
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..x.channels() {
        for i in 0..=(h - window) {
            for j in 0..=(w - window) {
                let (mut mx, mut my) = (0.0, 0.0);
                let (mut exx, mut eyy, mut exy) = (0.0, 0.0, 0.0);
                for a in 0..window {
                    for b in 0..window {
                        let wv = win[(a, b)];
                        let xv = x.get(i + a, j + b, c);
                        let rv = reference.get(i + a, j + b, c);
                        mx += wv * xv;
                        my += wv * rv;
                        exx += wv * xv * xv;
                        eyy += wv * rv * rv;
                        exy += wv * xv * rv;
                    }
                }
                let vx = exx - mx * mx;
                let vy = eyy - my * my;
                let cov = exy - mx * my;
                let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
                let den = (mx * mx + my * my + c1) * (vx + vy + c2);
                total += num / den;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// Linear-interpolated percentile of the samples, `q` in `[0, 1]`.
fn percentile_linear(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    if i >= v.len() - 1 {
        return v[v.len() - 1];
    }
    let frac = pos - i as f64;
    v[i] + frac * (v[i + 1] - v[i])
}

/// Underwater color image quality evaluation: weighted sum of Lab chroma
/// spread, 1%–99% luminance contrast, and mean saturation.
pub fn uciqe(x: &Image) -> Result<f64> {
    check_rgb(x)?;
    let lab = rgb_to_lab(x)?;
    let n = lab.l.len();
    let mut chroma = Vec::with_capacity(n);
    let mut lum = Vec::with_capacity(n);
    let mut sat_sum = 0.0;
    for idx in 0..n {
        let (a, b) = (lab.a_star[idx], lab.b_star[idx]);
        chroma.push((a * a + b * b).sqrt() / 100.0);
        lum.push(lab.l[idx] / 100.0);
    }
    for y in 0..x.height() {
        for xx in 0..x.width() {
            let (r, g, b) = (x.get(y, xx, 0), x.get(y, xx, 1), x.get(y, xx, 2));
            let mx = r.max(g).max(b);
            let mn = r.min(g).min(b);
            sat_sum += if mx <= 0.0 { 0.0 } else { (mx - mn) / mx };
        }
    }
    let mu_c = chroma.iter().sum::<f64>() / n as f64;
    let sigma_c = (chroma.iter().map(|c| (c - mu_c) * (c - mu_c)).sum::<f64>() / n as f64).sqrt();
    let con_l = percentile_linear(&lum, 0.99) - percentile_linear(&lum, 0.01);
    let mu_s = sat_sum / n as f64;
    Ok(UCIQE_COEFFS[0] * sigma_c + UCIQE_COEFFS[1] * con_l + UCIQE_COEFFS[2] * mu_s)
}

fn alpha_trimmed_mean(values: &[f64], alpha: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let k = (alpha * v.len() as f64).floor() as usize;
    let kept = &v[k..v.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Colorfulness component of UIQM.
pub fn uicm(x: &Image) -> Result<f64> {
    check_rgb(x)?;
    let n = x.height() * x.width();
    let mut rg = Vec::with_capacity(n);
    let mut yb = Vec::with_capacity(n);
    for y in 0..x.height() {
        for xx in 0..x.width() {
            let (r, g, b) = (x.get(y, xx, 0), x.get(y, xx, 1), x.get(y, xx, 2));
            rg.push(r - g);
            yb.push((r + g) / 2.0 - b);
        }
    }
    let mu_rg = alpha_trimmed_mean(&rg, 0.1);
    let mu_yb = alpha_trimmed_mean(&yb, 0.1);
    let var_rg = rg.iter().map(|v| (v - mu_rg) * (v - mu_rg)).sum::<f64>() / n as f64;
    let var_yb = yb.iter().map(|v| (v - mu_yb) * (v - mu_yb)).sum::<f64>() / n as f64;
    Ok(-0.0268 * (mu_rg * mu_rg + mu_yb * mu_yb).sqrt() + 0.1586 * (var_rg + var_yb).sqrt())
}

/// 3×3 Sobel gradient magnitude with symmetric boundary reflection.
fn sobel_magnitude(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mirror = |i: isize, n: usize| -> usize {
        if i < 0 {
            (-i - 1) as usize
        } else if i as usize >= n {
            2 * n - i as usize - 1
        } else {
            i as usize
        }
    };
    let at = |i: isize, j: isize| plane[mirror(i, h) * w + mirror(j, w)];
    let mut out = vec![0.0; h * w];
    for i in 0..h as isize {
        for j in 0..w as isize {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for (a, row) in [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]
                .iter()
                .enumerate()
            {
                for (b, &kx) in row.iter().enumerate() {
                    let v = at(i + a as isize - 1, j + b as isize - 1);
                    gx += kx * v;
                    // gy kernel is the transpose of gx's.
                    let ky = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]][a][b];
                    gy += ky * v;
                }
            }
            out[i as usize * w + j as usize] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

/// EME log-contrast over full 8×8 blocks; blocks containing values at or
/// below zero contribute 0.
fn eme(plane: &[f64], h: usize, w: usize) -> f64 {
    let (k1, k2) = (h / BLOCK, w / BLOCK);
    if k1 == 0 || k2 == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for bi in 0..k1 {
        for bj in 0..k2 {
            let mut mx = f64::NEG_INFINITY;
            let mut mn = f64::INFINITY;
            for i in bi * BLOCK..(bi + 1) * BLOCK {
                for j in bj * BLOCK..(bj + 1) * BLOCK {
                    let v = plane[i * w + j];
                    mx = mx.max(v);
                    mn = mn.min(v);
                }
            }
            if mn > EPS && mx > EPS {
                total += (mx / mn).ln();
            }
        }
    }
    2.0 / (k1 * k2) as f64 * total
}

/// Sharpness component of UIQM: luminance-weighted EME of the
/// Sobel-enhanced channels.
pub fn uism(x: &Image) -> Result<f64> {
    check_rgb(x)?;
    let (h, w) = (x.height(), x.width());
    let weights = [0.299, 0.587, 0.114];
    let mut total = 0.0;
    for c in 0..3 {
        let plane = x.channel(c);
        let mag = sobel_magnitude(&plane, h, w);
        let enhanced: Vec<f64> = plane.iter().zip(mag.iter()).map(|(p, m)| p * m).collect();
        total += weights[c] * eme(&enhanced, h, w);
    }
    Ok(total)
}

/// Contrast component of UIQM: Michelson-entropy over 8×8 blocks spanning
/// all channels.
pub fn uiconm(x: &Image) -> Result<f64> {
    check_rgb(x)?;
    let (h, w) = (x.height(), x.width());
    let (k1, k2) = (h / BLOCK, w / BLOCK);
    if k1 == 0 || k2 == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for bi in 0..k1 {
        for bj in 0..k2 {
            let mut mx = f64::NEG_INFINITY;
            let mut mn = f64::INFINITY;
            for i in bi * BLOCK..(bi + 1) * BLOCK {
                for j in bj * BLOCK..(bj + 1) * BLOCK {
                    for c in 0..3 {
                        let v = x.get(i, j, c);
                        mx = mx.max(v);
                        mn = mn.min(v);
                    }
                }
            }
            let top = mx - mn;
            let bot = mx + mn;
            if top > EPS && bot > EPS {
                let wgt = top / bot;
                total += wgt * wgt.ln();
            }
        }
    }
    Ok(-total / (k1 * k2) as f64)
}

/// Underwater image quality measure: weighted sum of UICM, UISM, UIConM.
pub fn uiqm(x: &Image) -> Result<f64> {
    let (c, s, m) = uiqm_components(x)?;
    Ok(UIQM_COEFFS[0] * c + UIQM_COEFFS[1] * s + UIQM_COEFFS[2] * m)
}

/// The three UIQM components `(uicm, uism, uiconm)`.
pub fn uiqm_components(x: &Image) -> Result<(f64, f64, f64)> {
    Ok((uicm(x)?, uism(x)?, uiconm(x)?))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::autodiff::Tape;
    use crate::loss::{ssim_loss, LossConfig};

    // Deterministic formula images mirrored in tools/oracle/metrics_ref.py.

    fn ramp16() -> Image {
        Image::from_fn(16, 16, 3, |i, j, c| match c {
            0 => i as f64 / 15.0,
            1 => j as f64 / 15.0,
            _ => (i + j) as f64 / 30.0,
        })
    }

    fn checker16() -> Image {
        Image::from_fn(16, 16, 3, |i, j, c| {
            let v = if ((i / 8) + (j / 8)) % 2 == 1 { 0.9 } else { 0.2 };
            [v, 0.8 * v, 0.6 * v][c]
        })
    }

    fn halfhalf16() -> Image {
        Image::from_fn(16, 16, 3, |_, j, c| {
            if j < 8 {
                [0.9, 0.2, 0.1][c]
            } else {
                [0.1, 0.3, 0.8][c]
            }
        })
    }

    fn sin32() -> Image {
        use std::f64::consts::PI;
        Image::from_fn(32, 32, 3, |i, j, c| match c {
            0 => 0.5 + 0.5 * (2.0 * PI * i as f64 / 8.0).sin(),
            1 => 0.5 + 0.5 * (2.0 * PI * j as f64 / 8.0).cos(),
            _ => 0.5,
        })
    }

    fn hash16() -> Image {
        Image::from_fn(16, 16, 3, |i, j, c| {
            let t = (((c * 256 + i * 16 + j + 1) as f64) * 12.9898).sin() * 43758.5453;
            t - t.floor()
        })
    }

    fn anti_pair16() -> (Image, Image) {
        use std::f64::consts::PI;
        let f = |i: usize, j: usize| (2.0 * PI * (i + j) as f64 / 8.0).sin();
        (
            Image::from_fn(16, 16, 1, |i, j, _| 0.5 + 0.4 * f(i, j)),
            Image::from_fn(16, 16, 1, |i, j, _| 0.5 - 0.4 * f(i, j)),
        )
    }

    fn flip_h(x: &Image) -> Image {
        Image::from_fn(x.height(), x.width(), x.channels(), |i, j, c| {
            x.get(i, x.width() - 1 - j, c)
        })
    }

    fn flip_v(x: &Image) -> Image {
        Image::from_fn(x.height(), x.width(), x.channels(), |i, j, c| {
            x.get(x.height() - 1 - i, j, c)
        })
    }

    // ------------------------------------------------------------- psnr

    #[test]
    fn psnr_identical_hits_the_cap() {
        let x = ramp16();
        assert_eq!(psnr(&x, &x).unwrap(), 99.0);
    }

    #[test]
    fn psnr_constant_offset_is_twenty_db() {
        let base = Image::from_fn(16, 16, 3, |i, j, c| 0.8 * ramp16().get(i, j, c));
        let mut off = base.clone();
        for v in off.data_mut() {
            *v += 0.1;
        }
        assert_abs_diff_eq!(psnr(&base, &off).unwrap(), 20.0, epsilon = 1e-9);
        assert_abs_diff_eq!(psnr(&off, &base).unwrap(), 20.0, epsilon = 1e-9);
    }

    #[test]
    fn psnr_rejects_dim_mismatch() {
        assert!(psnr(&ramp16(), &sin32()).is_err());
    }

    // ------------------------------------------------------------- ssim

    #[test]
    fn ssim_identity_is_one() {
        let x = ramp16();
        assert_abs_diff_eq!(ssim_metric(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ssim_constant_images_match_luminance_closed_form() {
        let a = Image::constant(16, 16, 1, 0.5);
        let b = Image::constant(16, 16, 1, 0.6);
        let c1 = 1e-4;
        let expected = (2.0 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
        assert_abs_diff_eq!(ssim_metric(&a, &b).unwrap(), expected, epsilon = 1e-9);
    }

    #[test]
    fn ssim_matches_reference_oracle() {
        assert_abs_diff_eq!(
            ssim_metric(&ramp16(), &checker16()).unwrap(),
            0.027190540230,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            ssim_metric(&hash16(), &ramp16()).unwrap(),
            0.010786978556,
            epsilon = 1e-6
        );
    }

    #[test]
    fn ssim_goes_negative_for_anticorrelated_patterns() {
        let (a, b) = anti_pair16();
        let v = ssim_metric(&a, &b).unwrap();
        assert!(v < 0.0, "anti-correlated SSIM should be negative, got {v}");
        assert_abs_diff_eq!(v, -0.949792335908, epsilon = 1e-9);
    }

    #[test]
    fn ssim_is_symmetric_in_its_arguments() {
        // Algebraically symmetric; `(2μ₁)·μ₂` rounds differently from
        // `(2μ₂)·μ₁`, so allow float noise.
        let (a, b) = (hash16(), ramp16());
        assert_abs_diff_eq!(
            ssim_metric(&a, &b).unwrap(),
            ssim_metric(&b, &a).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn ssim_rejects_window_larger_than_image() {
        let x = Image::constant(8, 8, 1, 0.5);
        assert!(ssim_metric(&x, &x).is_err());
    }

    #[test]
    fn ssim_metric_agrees_with_the_loss_term() {
        // Independent implementations: the metric runs plain loops, the
        // loss runs tape ops. 1 − loss must equal the metric.
        let x = hash16();
        let r = ramp16();
        let cfg = LossConfig::default();
        let mut tape = Tape::new();
        let v = tape.leaf(x.to_chw().into_dyn(), false);
        let loss = ssim_loss(&mut tape, v, &r.to_chw(), &cfg).unwrap();
        let via_loss = 1.0 - tape.scalar_value(loss);
        assert_abs_diff_eq!(via_loss, ssim_metric(&x, &r).unwrap(), epsilon = 1e-12);
    }

    // ------------------------------------------------------------ uciqe

    #[test]
    fn uciqe_matches_reference_oracle() {
        assert_abs_diff_eq!(uciqe(&ramp16()).unwrap(), 0.502788420641, epsilon = 1e-9);
        assert_abs_diff_eq!(uciqe(&checker16()).unwrap(), 0.321314051379, epsilon = 1e-9);
        assert_abs_diff_eq!(uciqe(&halfhalf16()).unwrap(), 0.284887349640, epsilon = 1e-9);
        assert_abs_diff_eq!(uciqe(&sin32()).unwrap(), 0.508830701524, epsilon = 1e-9);
        assert_abs_diff_eq!(uciqe(&hash16()).unwrap(), 0.493652724112, epsilon = 1e-6);
    }

    #[test]
    fn uciqe_constant_gray_is_zero() {
        let x = Image::constant(16, 16, 3, 0.5);
        assert_abs_diff_eq!(uciqe(&x).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn uciqe_grows_with_chroma_spread() {
        // Two-tone images: the strong pair is far apart in a*/b*, the weak
        // pair nearly neutral; luminance/saturation differences are minor
        // by construction.
        let weak = Image::from_fn(16, 16, 3, |_, j, c| {
            if j < 8 {
                [0.55, 0.45, 0.48][c]
            } else {
                [0.45, 0.5, 0.52][c]
            }
        });
        assert!(uciqe(&halfhalf16()).unwrap() > uciqe(&weak).unwrap());
    }

    #[test]
    fn uciqe_rejects_gray_input() {
        let x = Image::constant(16, 16, 1, 0.5);
        assert!(uciqe(&x).is_err());
    }

    #[test]
    fn uciqe_is_flip_invariant() {
        for img in [ramp16(), hash16()] {
            let v = uciqe(&img).unwrap();
            assert_abs_diff_eq!(uciqe(&flip_h(&img)).unwrap(), v, epsilon = 1e-9);
            assert_abs_diff_eq!(uciqe(&flip_v(&img)).unwrap(), v, epsilon = 1e-9);
        }
    }

    // ------------------------------------------------------------- uiqm

    #[test]
    fn uiqm_matches_reference_oracle() {
        assert_abs_diff_eq!(uiqm(&ramp16()).unwrap(), 0.539757531655, epsilon = 1e-9);
        assert_abs_diff_eq!(uiqm(&checker16()).unwrap(), 1.239519092606, epsilon = 1e-9);
        assert_abs_diff_eq!(uiqm(&halfhalf16()).unwrap(), 0.671443576118, epsilon = 1e-9);
        assert_abs_diff_eq!(uiqm(&sin32()).unwrap(), 0.002500214688, epsilon = 1e-9);
        assert_abs_diff_eq!(uiqm(&hash16()).unwrap(), 3.349762772054, epsilon = 1e-6);
    }

    #[test]
    fn uiqm_components_match_reference_oracle() {
        let (c, s, m) = uiqm_components(&ramp16()).unwrap();
        assert_abs_diff_eq!(c, 0.068929700098, epsilon = 1e-9);
        assert_abs_diff_eq!(s, 0.725386942472, epsilon = 1e-9);
        assert_abs_diff_eq!(m, 0.090511831175, epsilon = 1e-9);
    }

    #[test]
    fn uiconm_checker_matches_closed_form() {
        // Each aligned 8x8 block is constant (v, 0.8v, 0.6v): Michelson
        // contrast (v − 0.6v)/(v + 0.6v) = 1/4, so every block contributes
        // −(1/4)·ln(1/4) = ln(4)/4.
        let expected = 4.0_f64.ln() / 4.0;
        assert_abs_diff_eq!(uiconm(&checker16()).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn uiqm_constant_image_degenerates_to_zero_components() {
        let x = Image::constant(16, 16, 3, 0.5);
        let (c, s, m) = uiqm_components(&x).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(s, 0.0);
        assert_eq!(m, 0.0);
        assert_eq!(uiqm(&x).unwrap(), 0.0);
    }

    #[test]
    fn adding_edges_increases_uism() {
        let flat = Image::constant(16, 16, 3, 0.5);
        assert_eq!(uism(&flat).unwrap(), 0.0);
        // A textured image whose Sobel response is nonzero everywhere.
        assert!(uism(&ramp16()).unwrap() > 0.0);
    }

    #[test]
    fn uiqm_is_flip_invariant() {
        for img in [ramp16(), hash16()] {
            let v = uiqm(&img).unwrap();
            assert_abs_diff_eq!(uiqm(&flip_h(&img)).unwrap(), v, epsilon = 1e-9);
            assert_abs_diff_eq!(uiqm(&flip_v(&img)).unwrap(), v, epsilon = 1e-9);
        }
    }

    #[test]
    fn uiqm_rejects_gray_input() {
        let x = Image::constant(16, 16, 1, 0.5);
        assert!(uiqm(&x).is_err());
    }

    #[test]
    fn small_images_have_zero_block_statistics() {
        let tiny = Image::from_fn(6, 6, 3, |i, j, c| (i + j + c) as f64 / 20.0);
        assert_eq!(uism(&tiny).unwrap(), 0.0);
        assert_eq!(uiconm(&tiny).unwrap(), 0.0);
        // UICM still applies — it needs no blocks.
        assert!(uicm(&tiny).unwrap().is_finite());
    }
}
