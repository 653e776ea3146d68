//! Chromatic compensation of the conditioning image.
//!
//! Underwater color casts live almost entirely in the chroma planes: the
//! a* / b* channels of CIELAB drift toward green and blue while lightness
//! stays informative. Compensation therefore estimates the low-frequency
//! cast with a wide Gaussian blur of each chroma plane and subtracts a
//! fraction of it back:
//!
//! ```text
//! y = Lab^-1( L,  a* - kappa  * M . G[a*],  b* - lambda * M . G[b*] )
//! ```
//!
//! `G` is the blur, `.` is the elementwise product, and `M` is a soft mask
//! that protects naturally bright regions (sand, artificial light) from
//! overcorrection: pixels brighter than a threshold get mask value 0, all
//! others 1, and the binary map is smoothed so corrections fade in gradually
//! near bright boundaries.
//!
//! With `kappa = lambda = 0` or an all-zero mask the operation reduces to a
//! Lab round trip of the input; a uniform cast of strength `a*` shrinks to
//! `(1 - kappa) * a*`.

use crate::error::{Error, Result};
use crate::imaging::ops::blur_plane_raw;
use crate::imaging::{lab_to_rgb, rgb_to_lab, to_grayscale, Image};

/// Strengths and mask shape for chromatic compensation.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationParams {
    /// Fraction of the estimated a* cast to remove, in `[0, 2]`.
    pub kappa: f64,
    /// Fraction of the estimated b* cast to remove, in `[0, 2]`.
    pub lambda: f64,
    /// Grayscale level above which pixels count as naturally bright, in `(0, 1)`.
    pub mask_threshold: f64,
    /// Gaussian sigma for the cast estimate `G` on the chroma planes.
    pub blur_sigma_channels: f64,
    /// Gaussian sigma for smoothing the binary brightness mask.
    pub mask_smooth_sigma: f64,
}

impl Default for CompensationParams {
    fn default() -> Self {
        Self {
            kappa: 0.7,
            lambda: 0.7,
            mask_threshold: 0.85,
            blur_sigma_channels: 10.0,
            mask_smooth_sigma: 5.0,
        }
    }
}

impl CompensationParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.kappa) || !self.kappa.is_finite() {
            return Err(Error::param(format!("kappa must be in [0, 2], got {}", self.kappa)));
        }
        if !(0.0..=2.0).contains(&self.lambda) || !self.lambda.is_finite() {
            return Err(Error::param(format!("lambda must be in [0, 2], got {}", self.lambda)));
        }
        if !(self.mask_threshold > 0.0 && self.mask_threshold < 1.0) {
            return Err(Error::param(format!(
                "mask_threshold must be in (0, 1), got {}",
                self.mask_threshold
            )));
        }
        if !(self.blur_sigma_channels > 0.0) || !(self.mask_smooth_sigma > 0.0) {
            return Err(Error::param(
                "blur sigmas must be positive and finite".to_string(),
            ));
        }
        Ok(())
    }
}

/// Soft brightness-protection mask with values in `[0, 1]`; 1 means "apply
/// full compensation", 0 means "leave the pixel's chroma alone".
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Mask {
    /// An all-one mask (compensate everywhere).
    pub fn ones(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![1.0; height * width],
        }
    }

    /// An all-zero mask (compensation disabled everywhere).
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Thresholds grayscale brightness and smooths the result into a soft mask.
pub fn build_mask(img: &Image, params: &CompensationParams) -> Result<Mask> {
    params.validate()?;
    let gray = to_grayscale(img)?;
    let binary: Vec<f64> = gray
        .data()
        .iter()
        .map(|&v| if v > params.mask_threshold { 0.0 } else { 1.0 })
        .collect();
    let smooth = blur_plane_raw(
        &binary,
        img.height(),
        img.width(),
        params.mask_smooth_sigma,
    );
    Ok(Mask {
        height: img.height(),
        width: img.width(),
        values: smooth.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    })
}

/// Applies chroma compensation under an explicit mask. The L channel passes
/// through untouched; output RGB is clamped to `[0, 1]`.
pub fn compensate_channels(
    img: &Image,
    mask: &Mask,
    params: &CompensationParams,
) -> Result<Image> {
    params.validate()?;
    if mask.height() != img.height() || mask.width() != img.width() {
        return Err(Error::dim(format!(
            "mask {}x{} does not match image {}x{}",
            mask.height(),
            mask.width(),
            img.height(),
            img.width()
        )));
    }
    let lab = rgb_to_lab(img)?;
    let (h, w) = (img.height(), img.width());
    let blur_a = blur_plane_raw(&lab.a_star, h, w, params.blur_sigma_channels);
    let blur_b = blur_plane_raw(&lab.b_star, h, w, params.blur_sigma_channels);
    let mut out = lab.clone();
    for i in 0..h * w {
        let m = mask.values()[i];
        out.a_star[i] = lab.a_star[i] - params.kappa * m * blur_a[i];
        out.b_star[i] = lab.b_star[i] - params.lambda * m * blur_b[i];
    }
    Ok(lab_to_rgb(&out))
}

/// Full preprocessing used on every conditioning image: build the brightness
/// mask, then compensate the chroma planes under it.
pub fn preprocess(img: &Image, params: &CompensationParams) -> Result<Image> {
    let mask = build_mask(img, params)?;
    compensate_channels(img, &mask, params)
}
