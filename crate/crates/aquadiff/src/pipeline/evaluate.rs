//! Batch quality assessment over directories of enhanced images.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{load_png, Image};
use crate::metrics::{psnr, ssim_metric, uciqe, uiqm};

use super::dataset::png_stems;

/// Metrics of one image: no-reference scores always, full-reference
/// scores when a reference was available.
#[derive(Debug, Clone)]
pub struct MetricRow {
    pub name: String,
    pub uiqm: f64,
    pub uciqe: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

/// Per-image rows plus their arithmetic mean.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub mean: MetricRow,
}

impl MetricReport {
    pub fn has_reference(&self) -> bool {
        self.mean.psnr.is_some()
    }

    /// CSV in UIQM, UCIQE, PSNR, SSIM column order; reference-dependent
    /// columns are omitted entirely when no reference was given. The last
    /// row is the aggregate mean.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.has_reference() {
            out.push_str("name,uiqm,uciqe,psnr,ssim\n");
        } else {
            out.push_str("name,uiqm,uciqe\n");
        }
        for row in self.rows.iter().chain(std::iter::once(&self.mean)) {
            out.push_str(&format!("{},{:.6},{:.6}", row.name, row.uiqm, row.uciqe));
            if let (Some(p), Some(s)) = (row.psnr, row.ssim) {
                out.push_str(&format!(",{p:.6},{s:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

fn mean_of(rows: &[MetricRow]) -> MetricRow {
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&MetricRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let with_ref = rows.iter().all(|r| r.psnr.is_some());
    MetricRow {
        name: "mean".into(),
        uiqm: mean(&|r| r.uiqm),
        uciqe: mean(&|r| r.uciqe),
        psnr: with_ref.then(|| mean(&|r| r.psnr.unwrap())),
        ssim: with_ref.then(|| mean(&|r| r.ssim.unwrap())),
    }
}

/// Scores in-memory images. Every entry needs a reference or none may.
pub fn evaluate_images(images: &[(String, Image, Option<Image>)]) -> Result<MetricReport> {
    if images.is_empty() {
        return Err(Error::Dataset("nothing to evaluate".into()));
    }
    let with_ref = images.iter().filter(|(_, _, r)| r.is_some()).count();
    if with_ref != 0 && with_ref != images.len() {
        return Err(Error::Dataset(format!(
            "{with_ref} of {} images have references; evaluation must be all-or-none",
            images.len()
        )));
    }
    let mut rows = Vec::with_capacity(images.len());
    for (name, img, reference) in images {
        let (p, s) = match reference {
            Some(r) => (Some(psnr(img, r)?), Some(ssim_metric(img, r)?)),
            None => (None, None),
        };
        rows.push(MetricRow {
            name: name.clone(),
            uiqm: uiqm(img)?,
            uciqe: uciqe(img)?,
            psnr: p,
            ssim: s,
        });
    }
    let mean = mean_of(&rows);
    Ok(MetricReport { rows, mean })
}

/// Scores every PNG in `enhanced_dir`, paired by filename against
/// `reference_dir` when given. Unpaired names on either side are an error.
pub fn evaluate_dirs(enhanced_dir: &Path, reference_dir: Option<&Path>) -> Result<MetricReport> {
    let stems = png_stems(enhanced_dir)?;
    if stems.is_empty() {
        return Err(Error::Dataset(format!(
            "no .png files found in {enhanced_dir:?}"
        )));
    }
    if let Some(ref_dir) = reference_dir {
        let ref_stems = png_stems(ref_dir)?;
        let missing: Vec<_> = stems.iter().filter(|s| !ref_stems.contains(s)).collect();
        let extra: Vec<_> = ref_stems.iter().filter(|s| !stems.contains(s)).collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::Dataset(format!(
                "unpaired files: no reference for {missing:?}; no enhanced image for {extra:?}"
            )));
        }
    }
    let mut images = Vec::with_capacity(stems.len());
    for stem in &stems {
        let img = load_png(&enhanced_dir.join(format!("{stem}.png")))?;
        let reference = match reference_dir {
            Some(dir) => Some(load_png(&dir.join(format!("{stem}.png")))?),
            None => None,
        };
        images.push((stem.clone(), img, reference));
    }
    evaluate_images(&images)
}
