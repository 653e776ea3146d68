//! Pixel-level primitives shared by every other module: the [`Image`]
//! container, CIELAB conversion, grayscale, Gaussian filtering, bilinear
//! resizing, and 8-bit PNG I/O.
//!
//! All operations are pure functions over immutable inputs; none of them
//! keeps hidden state, so they are safe to call from any number of threads.

mod color;
mod io;
pub(crate) mod ops;

pub use color::{lab_to_rgb, rgb_to_lab, LabImage};
pub use io::{load_png, save_png};
pub use ops::{gaussian_blur, gaussian_kernel, resize, to_grayscale};

use crate::error::{Error, Result};

/// An `H x W x C` image with real-valued samples stored row-major
/// (channel-interleaved). RGB and grayscale data live in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Wraps raw row-major samples. Fails when the buffer length does not
    /// equal `height * width * channels` or any sample is non-finite.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::dim(format!("channels must be 1 or 3, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::dim(format!(
                "data length {} != {height}x{width}x{channels}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("image contains non-finite samples".to_string()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// All-zero image.
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::new(height, width, channels, vec![0.0; height * width * channels])
            .expect("zeros is always valid")
    }

    /// Builds an image from a per-pixel closure `(row, col, channel) -> value`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data).expect("from_fn produced invalid image")
    }

    /// Constant-valued image.
    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self::from_fn(height, width, channels, |_, _, _| value)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Extracts one channel as a planar `H x W` buffer.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        assert!(c < self.channels, "channel {c} out of range");
        let mut out = Vec::with_capacity(self.height * self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(self.get(y, x, c));
            }
        }
        out
    }

    /// Rebuilds an interleaved image from planar channel buffers.
    pub fn from_planes(height: usize, width: usize, planes: &[Vec<f64>]) -> Result<Self> {
        let channels = planes.len();
        for p in planes {
            if p.len() != height * width {
                return Err(Error::dim("plane size mismatch".to_string()));
            }
        }
        Ok(Self::from_fn(height, width, channels, |y, x, c| {
            planes[c][y * width + x]
        }))
    }

    /// Clamps every sample into `[0, 1]`.
    pub fn clamped(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    /// Converts to planar `[C, H, W]` layout (the network-side layout).
    pub fn to_chw(&self) -> ndarray::Array3<f64> {
        let mut out = ndarray::Array3::zeros((self.channels, self.height, self.width));
        for c in 0..self.channels {
            for y in 0..self.height {
                for x in 0..self.width {
                    out[[c, y, x]] = self.get(y, x, c);
                }
            }
        }
        out
    }

    /// Builds an image from planar `[C, H, W]` data.
    pub fn from_chw(a: &ndarray::Array3<f64>) -> Result<Self> {
        let (c, h, w) = a.dim();
        Ok(Self::from_fn(h, w, c, |y, x, ch| a[[ch, y, x]]))
    }
}

#[cfg(test)]
mod tests;
