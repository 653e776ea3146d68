//! End-to-end orchestration: configuration, datasets, training,
//! inference, evaluation, and the ablation study.
//!
//! Training walks the standard conditional-diffusion recipe. Each step
//! draws a uniform timestep and Gaussian noise, corrupts a clean patch
//! through the forward marginal, asks the network for the noise given the
//! compensated degraded image as conditioning, and optimizes either the
//! noise-prediction error, the cross-domain consistency terms on the
//! implied clean estimate, or their sum, with Adam. Inference reverses
//! the chain from pure noise with the conditioning held fixed at every
//! step. All randomness is ChaCha20-seeded, so runs are reproducible
//! bit for bit.

mod ablation;
mod configio;
mod dataset;
mod enhance;
mod evaluate;
mod train;

pub use ablation::{
    run_ablation, run_variant, variant_config, AblationReport, SeedScores, Variant, VariantResult,
    VARIANTS,
};
pub use configio::{LossMode, PipelineConfig, ScheduleConfig, TrainConfig};
pub use dataset::{load_paired_dirs, pairs_from_synth, png_stems, random_patch, ImagePair};
pub use enhance::{enhance_dir, enhance_image, restore_for_inference};
pub use evaluate::{evaluate_dirs, evaluate_images, MetricReport, MetricRow};
pub use train::{
    adam_update, log_row_csv, verify_config_digest, LogRow, StepLosses, TrainOutcome, TrainState,
    Trainer, ValRow, LOG_HEADER,
};

#[cfg(test)]
mod tests;
