//! Flat-text (de)serialization of the full pipeline configuration.
//!
//! One [`PipelineConfig`] gathers everything a run needs: noise schedule,
//! denoiser architecture, loss selection, compensation parameters, and
//! training hyperparameters. It round-trips through the `key = value`
//! format of [`crate::config::FlatConfig`] under namespaced keys
//! (`sched.*`, `net.*`, `loss.*`, `comp.*`, `train.*`), and its canonical
//! text is what checkpoint headers digest: two runs share a digest exactly
//! when they share a configuration.

use crate::autodiff::PadMode;
use crate::compensation::CompensationParams;
use crate::config::FlatConfig;
use crate::denoiser::DenoiserConfig;
use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::schedule::{linear_schedule, NoiseSchedule};

/// Linear noise-schedule specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub t_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleConfig {
    /// Short schedule for desk-scale runs. With 50 steps the variances
    /// must rise well past the usual long-schedule ceiling so that
    /// almost no signal survives at the terminal step; 1e-4 → 0.2 leaves
    /// a terminal noise fraction above 0.99.
    pub fn desk() -> Self {
        Self {
            t_steps: 50,
            beta_start: 1e-4,
            beta_end: 0.2,
        }
    }

    /// Long schedule matching common full-scale diffusion practice.
    pub fn paper() -> Self {
        Self {
            t_steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }

    pub fn build(&self) -> Result<NoiseSchedule> {
        linear_schedule(self.t_steps, self.beta_start, self.beta_end)
    }
}

/// How the training objective is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Noise-prediction mean squared error only.
    EpsMse,
    /// Cross-domain consistency terms on the clean estimate only.
    Cdc,
    /// Sum of both. This is the full training objective.
    Both,
}

impl LossMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossMode::EpsMse => "eps",
            LossMode::Cdc => "cdc",
            LossMode::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "eps" => Ok(LossMode::EpsMse),
            "cdc" => Ok(LossMode::Cdc),
            "both" => Ok(LossMode::Both),
            other => Err(Error::Config(format!(
                "unknown loss mode {other:?} (expected eps, cdc, or both)"
            ))),
        }
    }

    pub fn uses_eps(&self) -> bool {
        matches!(self, LossMode::EpsMse | LossMode::Both)
    }

    pub fn uses_cdc(&self) -> bool {
        matches!(self, LossMode::Cdc | LossMode::Both)
    }
}

/// Optimization hyperparameters and run bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub batch_size: usize,
    /// Square crop side; must equal the denoiser input size.
    pub patch_size: usize,
    pub seed: u64,
    pub loss_mode: LossMode,
    /// Log a CSV row every this many steps (step 1 is always logged).
    pub log_every: usize,
    /// Persist a checkpoint every this many steps (0 = only at the end).
    pub checkpoint_every: usize,
    /// Leading dataset pairs held out for validation; the checkpoint with
    /// the best validation PSNR is retained. 0 disables validation.
    pub val_pairs: usize,
}

impl TrainConfig {
    /// Desk-scale defaults sized for minute-scale smoke runs.
    pub fn desk() -> Self {
        Self {
            iterations: 200,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            batch_size: 1,
            patch_size: 32,
            seed: 0,
            loss_mode: LossMode::Both,
            log_every: 1,
            checkpoint_every: 0,
            val_pairs: 0,
        }
    }

    /// Full-scale settings: learning rate 3e-6, batch 1, 256-pixel
    /// patches, one million iterations, three validation pairs.
    pub fn paper() -> Self {
        Self {
            iterations: 1_000_000,
            learning_rate: 3e-6,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            batch_size: 1,
            patch_size: 256,
            seed: 0,
            loss_mode: LossMode::Both,
            log_every: 100,
            checkpoint_every: 10_000,
            val_pairs: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::param("iterations must be >= 1".to_string()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::param(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0 <= b && b < 1.0) {
                return Err(Error::param(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be >= 1".to_string()));
        }
        if self.log_every == 0 {
            return Err(Error::param("log_every must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Everything one run needs, serializable as flat `key = value` text.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub schedule: ScheduleConfig,
    pub denoiser: DenoiserConfig,
    pub loss: LossConfig,
    pub compensation: CompensationParams,
    pub train: TrainConfig,
    /// Seed of the frozen perceptual feature stack.
    pub extractor_seed: u64,
    /// Clamp the clean estimate to [-1, 1] before each reverse step.
    pub clamp_x0: bool,
}

impl PipelineConfig {
    pub fn desk() -> Self {
        Self {
            schedule: ScheduleConfig::desk(),
            denoiser: DenoiserConfig::desk(),
            loss: LossConfig::default(),
            compensation: CompensationParams::default(),
            train: TrainConfig::desk(),
            extractor_seed: 0,
            clamp_x0: true,
        }
    }

    pub fn paper() -> Self {
        Self {
            schedule: ScheduleConfig::paper(),
            denoiser: DenoiserConfig::paper(),
            loss: LossConfig::default(),
            compensation: CompensationParams::default(),
            train: TrainConfig::paper(),
            extractor_seed: 0,
            clamp_x0: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.build()?;
        self.denoiser.validate()?;
        self.loss.validate()?;
        self.compensation.validate()?;
        self.train.validate()?;
        if self.train.patch_size != self.denoiser.input_size {
            return Err(Error::param(format!(
                "patch_size {} must equal the denoiser input size {}",
                self.train.patch_size, self.denoiser.input_size
            )));
        }
        Ok(())
    }

    /// Reads a configuration from flat text, starting from desk defaults:
    /// every key is optional and overrides the default value.
    pub fn from_flat(cfg: &FlatConfig) -> Result<Self> {
        let d = Self::desk();
        let pad_mode = match cfg.string_or("net.pad_mode", pad_mode_str(d.denoiser.pad_mode)).as_str()
        {
            "zeros" => PadMode::Zeros,
            "circular" => PadMode::Circular,
            other => {
                return Err(Error::Config(format!(
                    "net.pad_mode: unknown mode {other:?} (expected zeros or circular)"
                )))
            }
        };
        let out = Self {
            schedule: ScheduleConfig {
                t_steps: cfg.usize_or("sched.t_steps", d.schedule.t_steps)?,
                beta_start: cfg.f64_or("sched.beta_start", d.schedule.beta_start)?,
                beta_end: cfg.f64_or("sched.beta_end", d.schedule.beta_end)?,
            },
            denoiser: DenoiserConfig {
                base_channels: cfg.usize_or("net.base_channels", d.denoiser.base_channels)?,
                channel_multipliers: cfg
                    .usize_list_or("net.channel_multipliers", &d.denoiser.channel_multipliers)?,
                num_res_blocks: cfg.usize_or("net.num_res_blocks", d.denoiser.num_res_blocks)?,
                attention_resolutions: cfg.usize_list_or(
                    "net.attention_resolutions",
                    &d.denoiser.attention_resolutions,
                )?,
                use_cross_attention: cfg
                    .bool_or("net.use_cross_attention", d.denoiser.use_cross_attention)?,
                use_rdb: cfg.bool_or("net.use_rdb", d.denoiser.use_rdb)?,
                dense_skips: cfg.bool_or("net.dense_skips", d.denoiser.dense_skips)?,
                concat_condition: cfg
                    .bool_or("net.concat_condition", d.denoiser.concat_condition)?,
                rdb_layers: cfg.usize_or("net.rdb_layers", d.denoiser.rdb_layers)?,
                rdb_growth: cfg.usize_or("net.rdb_growth", d.denoiser.rdb_growth)?,
                time_embed_dim: cfg.usize_or("net.time_embed_dim", d.denoiser.time_embed_dim)?,
                head_count: cfg.usize_or("net.head_count", d.denoiser.head_count)?,
                input_size: cfg.usize_or("net.input_size", d.denoiser.input_size)?,
                groups: cfg.usize_or("net.groups", d.denoiser.groups)?,
                pad_mode,
            },
            loss: LossConfig {
                scales: cfg.f64_list_or("loss.scales", &d.loss.scales)?,
                feature_layers: cfg.usize_list_or("loss.feature_layers", &d.loss.feature_layers)?,
                layer_weights: cfg.f64_list_or("loss.layer_weights", &d.loss.layer_weights)?,
                use_pixel: cfg.bool_or("loss.use_pixel", d.loss.use_pixel)?,
                use_multiscale: cfg.bool_or("loss.use_multiscale", d.loss.use_multiscale)?,
                use_perceptual: cfg.bool_or("loss.use_perceptual", d.loss.use_perceptual)?,
                use_ssim: cfg.bool_or("loss.use_ssim", d.loss.use_ssim)?,
                use_fft: cfg.bool_or("loss.use_fft", d.loss.use_fft)?,
                ssim_window: cfg.usize_or("loss.ssim_window", d.loss.ssim_window)?,
                ssim_sigma: cfg.f64_or("loss.ssim_sigma", d.loss.ssim_sigma)?,
                ssim_c1: cfg.f64_or("loss.ssim_c1", d.loss.ssim_c1)?,
                ssim_c2: cfg.f64_or("loss.ssim_c2", d.loss.ssim_c2)?,
            },
            compensation: CompensationParams {
                kappa: cfg.f64_or("comp.kappa", d.compensation.kappa)?,
                lambda: cfg.f64_or("comp.lambda", d.compensation.lambda)?,
                mask_threshold: cfg.f64_or("comp.mask_threshold", d.compensation.mask_threshold)?,
                blur_sigma_channels: cfg
                    .f64_or("comp.blur_sigma_channels", d.compensation.blur_sigma_channels)?,
                mask_smooth_sigma: cfg
                    .f64_or("comp.mask_smooth_sigma", d.compensation.mask_smooth_sigma)?,
            },
            train: TrainConfig {
                iterations: cfg.usize_or("train.iterations", d.train.iterations)?,
                learning_rate: cfg.f64_or("train.learning_rate", d.train.learning_rate)?,
                adam_beta1: cfg.f64_or("train.adam_beta1", d.train.adam_beta1)?,
                adam_beta2: cfg.f64_or("train.adam_beta2", d.train.adam_beta2)?,
                batch_size: cfg.usize_or("train.batch_size", d.train.batch_size)?,
                patch_size: cfg.usize_or("train.patch_size", d.train.patch_size)?,
                seed: cfg.u64_or("train.seed", d.train.seed)?,
                loss_mode: LossMode::parse(
                    &cfg.string_or("train.loss_mode", d.train.loss_mode.as_str()),
                )?,
                log_every: cfg.usize_or("train.log_every", d.train.log_every)?,
                checkpoint_every: cfg
                    .usize_or("train.checkpoint_every", d.train.checkpoint_every)?,
                val_pairs: cfg.usize_or("train.val_pairs", d.train.val_pairs)?,
            },
            extractor_seed: cfg.u64_or("extractor_seed", d.extractor_seed)?,
            clamp_x0: cfg.bool_or("clamp_x0", d.clamp_x0)?,
        };
        out.validate()?;
        Ok(out)
    }

    /// Canonical flat rendering; this text is digested into checkpoints.
    pub fn to_flat(&self) -> FlatConfig {
        let mut c = FlatConfig::new();
        c.set("sched.t_steps", self.schedule.t_steps);
        c.set("sched.beta_start", self.schedule.beta_start);
        c.set("sched.beta_end", self.schedule.beta_end);

        let n = &self.denoiser;
        c.set("net.base_channels", n.base_channels);
        c.set("net.channel_multipliers", join(&n.channel_multipliers));
        c.set("net.num_res_blocks", n.num_res_blocks);
        c.set("net.attention_resolutions", join(&n.attention_resolutions));
        c.set("net.use_cross_attention", n.use_cross_attention);
        c.set("net.use_rdb", n.use_rdb);
        c.set("net.dense_skips", n.dense_skips);
        c.set("net.concat_condition", n.concat_condition);
        c.set("net.rdb_layers", n.rdb_layers);
        c.set("net.rdb_growth", n.rdb_growth);
        c.set("net.time_embed_dim", n.time_embed_dim);
        c.set("net.head_count", n.head_count);
        c.set("net.input_size", n.input_size);
        c.set("net.groups", n.groups);
        c.set("net.pad_mode", pad_mode_str(n.pad_mode));

        let l = &self.loss;
        c.set("loss.scales", join(&l.scales));
        c.set("loss.feature_layers", join(&l.feature_layers));
        c.set("loss.layer_weights", join(&l.layer_weights));
        c.set("loss.use_pixel", l.use_pixel);
        c.set("loss.use_multiscale", l.use_multiscale);
        c.set("loss.use_perceptual", l.use_perceptual);
        c.set("loss.use_ssim", l.use_ssim);
        c.set("loss.use_fft", l.use_fft);
        c.set("loss.ssim_window", l.ssim_window);
        c.set("loss.ssim_sigma", l.ssim_sigma);
        c.set("loss.ssim_c1", l.ssim_c1);
        c.set("loss.ssim_c2", l.ssim_c2);

        let p = &self.compensation;
        c.set("comp.kappa", p.kappa);
        c.set("comp.lambda", p.lambda);
        c.set("comp.mask_threshold", p.mask_threshold);
        c.set("comp.blur_sigma_channels", p.blur_sigma_channels);
        c.set("comp.mask_smooth_sigma", p.mask_smooth_sigma);

        let t = &self.train;
        c.set("train.iterations", t.iterations);
        c.set("train.learning_rate", t.learning_rate);
        c.set("train.adam_beta1", t.adam_beta1);
        c.set("train.adam_beta2", t.adam_beta2);
        c.set("train.batch_size", t.batch_size);
        c.set("train.patch_size", t.patch_size);
        c.set("train.seed", t.seed);
        c.set("train.loss_mode", t.loss_mode.as_str());
        c.set("train.log_every", t.log_every);
        c.set("train.checkpoint_every", t.checkpoint_every);
        c.set("train.val_pairs", t.val_pairs);

        c.set("extractor_seed", self.extractor_seed);
        c.set("clamp_x0", self.clamp_x0);
        c
    }

    /// Canonical text of everything that defines the *model*: architecture,
    /// schedule, loss, compensation, and optimization hyperparameters.
    /// Run-control keys (iteration budget, logging and checkpoint cadence,
    /// validation reservation) are excluded so a checkpoint can be resumed
    /// with a longer budget or different logging without a digest clash.
    pub fn identity_flat(&self) -> FlatConfig {
        const RUN_CONTROL_KEYS: [&str; 4] = [
            "train.iterations",
            "train.log_every",
            "train.checkpoint_every",
            "train.val_pairs",
        ];
        let full = self.to_flat();
        let mut out = FlatConfig::new();
        for key in full.keys() {
            if !RUN_CONTROL_KEYS.contains(&key) {
                out.set(key, full.get(key).unwrap());
            }
        }
        out
    }
}

fn pad_mode_str(m: PadMode) -> &'static str {
    match m {
        PadMode::Zeros => "zeros",
        PadMode::Circular => "circular",
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}
