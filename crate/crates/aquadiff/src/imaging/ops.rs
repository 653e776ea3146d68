//! Grayscale, Gaussian filtering, and bilinear resizing.

use super::Image;
use crate::error::{Error, Result};

/// ITU-R BT.601 luma weights.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Collapses a 3-channel image to single-channel luminance. Single-channel
/// input passes through unchanged.
pub fn to_grayscale(img: &Image) -> Result<Image> {
    if img.channels() == 1 {
        return Ok(img.clone());
    }
    if img.channels() != 3 {
        return Err(Error::dim(format!(
            "to_grayscale needs 1 or 3 channels, got {}",
            img.channels()
        )));
    }
    Ok(Image::from_fn(img.height(), img.width(), 1, |y, x, _| {
        LUMA[0] * img.get(y, x, 0) + LUMA[1] * img.get(y, x, 1) + LUMA[2] * img.get(y, x, 2)
    }))
}

/// Normalized 1-D Gaussian kernel truncated at radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64) * (i as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

// Symmetric (edge-duplicating) reflection: ...2,1,0 | 0,1,2...
#[inline]
fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

fn blur_plane(plane: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as i64;
    // Horizontal pass.
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let sx = reflect(x as i64 + ki as i64 - radius, w as i64);
                acc += kv * plane[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let sy = reflect(y as i64 + ki as i64 - radius, h as i64);
                acc += kv * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Separable Gaussian blur with reflective borders, applied per channel.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma > 0.0) {
        return Err(Error::param(format!("blur sigma must be > 0, got {sigma}")));
    }
    let kernel = gaussian_kernel(sigma);
    let planes: Vec<Vec<f64>> = (0..img.channels())
        .map(|c| blur_plane(&img.channel(c), img.height(), img.width(), &kernel))
        .collect();
    Image::from_planes(img.height(), img.width(), &planes)
}

/// Blurs a bare `H x W` plane; used by mask construction and chroma planes
/// that are not `[0, 1]` images.
pub fn blur_plane_raw(plane: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    blur_plane(plane, h, w, &gaussian_kernel(sigma))
}

/// Source coordinate and interpolation weights for one output index under
/// the half-pixel-center convention with edge clamping.
#[inline]
pub(crate) fn bilinear_axis(dst: usize, src_len: usize, scale: f64) -> (usize, usize, f64) {
    let s = (dst as f64 + 0.5) * scale - 0.5;
    let s = s.max(0.0).min(src_len as f64 - 1.0);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear resampling with edge clamping. Output values stay inside the
/// input min/max hull.
pub fn resize(img: &Image, new_h: usize, new_w: usize) -> Result<Image> {
    if new_h == 0 || new_w == 0 {
        return Err(Error::param("resize target dims must be >= 1".to_string()));
    }
    let sy = img.height() as f64 / new_h as f64;
    let sx = img.width() as f64 / new_w as f64;
    Ok(Image::from_fn(new_h, new_w, img.channels(), |y, x, c| {
        let (y0, y1, fy) = bilinear_axis(y, img.height(), sy);
        let (x0, x1, fx) = bilinear_axis(x, img.width(), sx);
        let top = (1.0 - fx) * img.get(y0, x0, c) + fx * img.get(y0, x1, c);
        let bot = (1.0 - fx) * img.get(y1, x0, c) + fx * img.get(y1, x1, c);
        (1.0 - fy) * top + fy * bot
    }))
}
