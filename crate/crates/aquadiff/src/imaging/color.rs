//! sRGB <-> CIELAB conversion (D65 white point) and grayscale weighting.
//!
//! Conversions use the standard sRGB transfer function and the D65-referenced
//! CIELAB definition: sRGB -> linear RGB -> XYZ -> L*a*b*, and back.

use super::Image;
use crate::error::{Error, Result};

// D65 reference white for the 2-degree observer.
const XN: f64 = 0.95047;
const YN: f64 = 1.0;
const ZN: f64 = 1.08883;

// CIE f(t) breakpoints.
const DELTA: f64 = 6.0 / 29.0;

/// A CIELAB image stored as planar channels. `l` lives in `[0, 100]` for
/// in-gamut input; `a_star` / `b_star` are signed chroma planes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub height: usize,
    pub width: usize,
    pub l: Vec<f64>,
    pub a_star: Vec<f64>,
    pub b_star: Vec<f64>,
}

impl LabImage {
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }
}

#[inline]
fn srgb_to_linear(u: f64) -> f64 {
    if u <= 0.04045 {
        u / 12.92
    } else {
        ((u + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(u: f64) -> f64 {
    if u <= 0.0031308 {
        12.92 * u
    } else {
        1.055 * u.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

#[inline]
fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

/// Converts a single sRGB pixel to (L*, a*, b*).
pub(crate) fn pixel_rgb_to_lab(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let rl = srgb_to_linear(r);
    let gl = srgb_to_linear(g);
    let bl = srgb_to_linear(b);
    let x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    let y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    let z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
    let fx = lab_f(x / XN);
    let fy = lab_f(y / YN);
    let fz = lab_f(z / ZN);
    (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// Converts a single (L*, a*, b*) pixel back to sRGB, clamped to `[0, 1]`.
pub(crate) fn pixel_lab_to_rgb(l: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let x = XN * lab_f_inv(fx);
    let y = YN * lab_f_inv(fy);
    let z = ZN * lab_f_inv(fz);
    let rl = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    let gl = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    let bl = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
    (
        linear_to_srgb(rl.max(0.0)).clamp(0.0, 1.0),
        linear_to_srgb(gl.max(0.0)).clamp(0.0, 1.0),
        linear_to_srgb(bl.max(0.0)).clamp(0.0, 1.0),
    )
}

/// RGB -> CIELAB (D65). Errors on non-3-channel input.
pub fn rgb_to_lab(img: &Image) -> Result<LabImage> {
    if img.channels() != 3 {
        return Err(Error::dim(format!(
            "rgb_to_lab needs 3 channels, got {}",
            img.channels()
        )));
    }
    let n = img.height() * img.width();
    let mut l = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (li, ai, bi) = pixel_rgb_to_lab(img.get(y, x, 0), img.get(y, x, 1), img.get(y, x, 2));
            l.push(li);
            a.push(ai);
            b.push(bi);
        }
    }
    Ok(LabImage {
        height: img.height(),
        width: img.width(),
        l,
        a_star: a,
        b_star: b,
    })
}

/// CIELAB -> RGB. Out-of-gamut values clamp to `[0, 1]`; never NaN.
pub fn lab_to_rgb(lab: &LabImage) -> Image {
    Image::from_fn(lab.height, lab.width, 3, |y, x, c| {
        let i = y * lab.width + x;
        let (r, g, b) = pixel_lab_to_rgb(lab.l[i], lab.a_star[i], lab.b_star[i]);
        [r, g, b][c]
    })
}
