//! 8-bit PNG read/write. Samples map to `[0, 1]` by `value / 255`.

use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

/// Loads an 8-bit PNG as RGB (3 channels) or grayscale (1 channel).
pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let dynimg = image::open(path).map_err(|e| Error::Codec {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    match dynimg {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Image::new(
                h as usize,
                w as usize,
                1,
                g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
            )
        }
        other => {
            let rgb = other.into_rgb8();
            let (w, h) = rgb.dimensions();
            Image::new(
                h as usize,
                w as usize,
                3,
                rgb.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
            )
        }
    }
}

/// Writes an image as 8-bit PNG. Values are clamped to `[0, 1]` and
/// quantized by rounding `v * 255`.
pub fn save_png(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let bytes: Vec<u8> = img.data().iter().copied().map(to_u8).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let result = match img.channels() {
        1 => image::GrayImage::from_raw(w, h, bytes)
            .expect("buffer size checked by Image invariant")
            .save(path),
        3 => image::RgbImage::from_raw(w, h, bytes)
            .expect("buffer size checked by Image invariant")
            .save(path),
        c => return Err(Error::dim(format!("cannot save {c}-channel image"))),
    };
    result.map_err(|e| Error::Codec {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
