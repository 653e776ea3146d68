//! Ablation harness: trains the four standard variants and scores them.
//!
//! The four rows isolate the two contributions — the consistency loss and
//! the enhanced backbone (residual-dense blocks, dense skips, attention,
//! cross-attended conditioning) — on top of a plain noise-prediction
//! baseline:
//!
//! | variant    | objective        | backbone |
//! |------------|------------------|----------|
//! | `baseline` | ε-MSE            | plain    |
//! | `+cdc`     | ε-MSE + CDC      | plain    |
//! | `+backbone`| ε-MSE            | enhanced |
//! | `full`     | ε-MSE + CDC      | enhanced |
//!
//! Every variant trains with the same seeds, data, schedule, and step
//! budget; only the two ablated factors change.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::denoiser::DenoiserConfig;
use crate::error::Result;
use crate::imaging::Image;

use super::configio::{LossMode, PipelineConfig};
use super::dataset::ImagePair;
use super::enhance::enhance_image;
use super::evaluate::evaluate_images;
use super::train::Trainer;

/// One of the four ablation arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub name: &'static str,
    pub cdc_loss: bool,
    pub enhanced_backbone: bool,
}

/// Table rows in presentation order.
pub const VARIANTS: [Variant; 4] = [
    Variant {
        name: "baseline",
        cdc_loss: false,
        enhanced_backbone: false,
    },
    Variant {
        name: "+cdc",
        cdc_loss: true,
        enhanced_backbone: false,
    },
    Variant {
        name: "+backbone",
        cdc_loss: false,
        enhanced_backbone: true,
    },
    Variant {
        name: "full",
        cdc_loss: true,
        enhanced_backbone: true,
    },
];

/// Strips the backbone additions, leaving a mirror-skip convolutional
/// U-Net conditioned by input concatenation.
fn plain_backbone(mut net: DenoiserConfig) -> DenoiserConfig {
    net.use_rdb = false;
    net.dense_skips = false;
    net.attention_resolutions.clear();
    net.use_cross_attention = false;
    net.concat_condition = true;
    net
}

/// Applies a variant to a base configuration.
pub fn variant_config(base: &PipelineConfig, variant: Variant, seed: u64) -> PipelineConfig {
    let mut cfg = base.clone();
    cfg.train.seed = seed;
    cfg.train.loss_mode = if variant.cdc_loss {
        LossMode::Both
    } else {
        LossMode::EpsMse
    };
    if !variant.enhanced_backbone {
        cfg.denoiser = plain_backbone(cfg.denoiser);
    }
    cfg
}

/// Scores of one (variant, seed) training run, averaged over the
/// training images enhanced with the final weights.
#[derive(Debug, Clone, Copy)]
pub struct SeedScores {
    pub seed: u64,
    pub psnr: f64,
    pub ssim: f64,
    pub uiqm: f64,
    pub uciqe: f64,
}

/// One table row: a variant with its per-seed and mean scores.
#[derive(Debug, Clone)]
pub struct VariantResult {
    pub variant: Variant,
    pub per_seed: Vec<SeedScores>,
}

impl VariantResult {
    fn mean(&self, f: impl Fn(&SeedScores) -> f64) -> f64 {
        self.per_seed.iter().map(&f).sum::<f64>() / self.per_seed.len() as f64
    }

    pub fn mean_psnr(&self) -> f64 {
        self.mean(|s| s.psnr)
    }

    pub fn mean_ssim(&self) -> f64 {
        self.mean(|s| s.ssim)
    }

    pub fn mean_uiqm(&self) -> f64 {
        self.mean(|s| s.uiqm)
    }

    pub fn mean_uciqe(&self) -> f64 {
        self.mean(|s| s.uciqe)
    }
}

/// The four-variant study.
#[derive(Debug, Clone)]
pub struct AblationReport {
    pub variants: Vec<VariantResult>,
}

impl AblationReport {
    pub fn get(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.variant.name == name)
    }

    /// Four-row CSV of seed-mean scores, one row per variant.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,psnr,ssim,uiqm,uciqe\n");
        for v in &self.variants {
            out.push_str(&format!(
                "{},{:.4},{:.4},{:.4},{:.4}\n",
                v.variant.name,
                v.mean_psnr(),
                v.mean_ssim(),
                v.mean_uiqm(),
                v.mean_uciqe()
            ));
        }
        out
    }
}

/// Trains one variant at one seed and scores the enhanced training set.
pub fn run_variant(
    base: &PipelineConfig,
    variant: Variant,
    seed: u64,
    pairs: &[ImagePair],
) -> Result<SeedScores> {
    let cfg = variant_config(base, variant, seed);
    let mut trainer = Trainer::new(cfg.clone())?;
    trainer.run(pairs, None)?;
    let mut scored: Vec<(String, Image, Option<Image>)> = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xAB1A_7E00);
        rng.set_stream(i as u64);
        let out = enhance_image(
            trainer.net(),
            trainer.schedule(),
            &cfg.compensation,
            cfg.clamp_x0,
            &pair.degraded,
            &mut rng,
        )?;
        scored.push((pair.name.clone(), out, Some(pair.clean.clone())));
    }
    let report = evaluate_images(&scored)?;
    Ok(SeedScores {
        seed,
        psnr: report.mean.psnr.expect("references were supplied"),
        ssim: report.mean.ssim.expect("references were supplied"),
        uiqm: report.mean.uiqm,
        uciqe: report.mean.uciqe,
    })
}

/// Runs all four variants over the given seeds.
pub fn run_ablation(
    base: &PipelineConfig,
    seeds: &[u64],
    pairs: &[ImagePair],
) -> Result<AblationReport> {
    let mut variants = Vec::with_capacity(VARIANTS.len());
    for variant in VARIANTS {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            per_seed.push(run_variant(base, variant, seed, pairs)?);
        }
        variants.push(VariantResult { variant, per_seed });
    }
    Ok(AblationReport { variants })
}
