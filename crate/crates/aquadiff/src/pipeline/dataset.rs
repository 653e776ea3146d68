//! Paired image datasets: in-memory pairs, directory loading, and
//! co-located patch cropping.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::imaging::{load_png, Image};
use crate::synth::SynthPair;

/// One degraded/clean training pair.
#[derive(Debug, Clone)]
pub struct ImagePair {
    pub name: String,
    pub degraded: Image,
    pub clean: Image,
}

impl ImagePair {
    pub fn new(name: impl Into<String>, degraded: Image, clean: Image) -> Result<Self> {
        if degraded.height() != clean.height()
            || degraded.width() != clean.width()
            || degraded.channels() != 3
            || clean.channels() != 3
        {
            return Err(Error::dim(format!(
                "pair images must be 3-channel and same size, got {}x{}x{} vs {}x{}x{}",
                degraded.height(),
                degraded.width(),
                degraded.channels(),
                clean.height(),
                clean.width(),
                clean.channels()
            )));
        }
        Ok(Self {
            name: name.into(),
            degraded,
            clean,
        })
    }
}

/// Adapts generated pairs, naming them by index.
pub fn pairs_from_synth(synth: &[SynthPair]) -> Result<Vec<ImagePair>> {
    synth
        .iter()
        .enumerate()
        .map(|(i, p)| ImagePair::new(format!("synth_{i:04}"), p.degraded.clone(), p.clean.clone()))
        .collect()
}

/// Lists PNG stems in a directory, sorted by name for determinism.
pub fn png_stems(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Loads pairs from two directories whose PNG filenames must match
/// one-to-one. Unpaired files on either side are an error, listed by name.
pub fn load_paired_dirs(degraded_dir: &Path, clean_dir: &Path) -> Result<Vec<ImagePair>> {
    let degraded_names = png_stems(degraded_dir)?;
    let clean_names = png_stems(clean_dir)?;
    let only_degraded: Vec<_> = degraded_names
        .iter()
        .filter(|n| !clean_names.contains(n))
        .cloned()
        .collect();
    let only_clean: Vec<_> = clean_names
        .iter()
        .filter(|n| !degraded_names.contains(n))
        .cloned()
        .collect();
    if !only_degraded.is_empty() || !only_clean.is_empty() {
        return Err(Error::Dataset(format!(
            "unpaired files: only in {degraded_dir:?}: {only_degraded:?}; only in {clean_dir:?}: {only_clean:?}"
        )));
    }
    if degraded_names.is_empty() {
        return Err(Error::Dataset(format!(
            "no .png files found in {degraded_dir:?}"
        )));
    }
    degraded_names
        .iter()
        .map(|name| {
            let d = load_png(&degraded_dir.join(format!("{name}.png")))?;
            let c = load_png(&clean_dir.join(format!("{name}.png")))?;
            ImagePair::new(name.clone(), d, c)
        })
        .collect()
}

/// Cuts a `size`-square patch starting at `(top, left)` from both images.
fn crop(img: &Image, top: usize, left: usize, size: usize) -> Image {
    Image::from_fn(size, size, img.channels(), |y, x, c| {
        img.get(top + y, left + x, c)
    })
}

/// Returns co-located square crops of a pair. When the images already
/// match `size` they are returned as-is; larger images get a random
/// offset from `rng`; smaller images are an error.
pub fn random_patch(
    pair: &ImagePair,
    size: usize,
    rng: &mut ChaCha20Rng,
) -> Result<(Image, Image)> {
    let (h, w) = (pair.degraded.height(), pair.degraded.width());
    if h < size || w < size {
        return Err(Error::dim(format!(
            "pair {:?} is {h}x{w}, smaller than the {size}-pixel patch",
            pair.name
        )));
    }
    if h == size && w == size {
        return Ok((pair.degraded.clone(), pair.clean.clone()));
    }
    let top = rng.gen_range(0..=h - size);
    let left = rng.gen_range(0..=w - size);
    Ok((
        crop(&pair.degraded, top, left, size),
        crop(&pair.clean, top, left, size),
    ))
}
