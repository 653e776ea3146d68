//! Training: per-step corruption, prediction, loss, and Adam updates,
//! plus the full loop with logging, checkpointing, and validation.
//!
//! Determinism contract: every random draw at optimization step `s` comes
//! from a ChaCha20 generator seeded with the run seed on stream `s + 1`
//! (stream 0 is left to weight initialization). Trajectories therefore
//! depend only on (seed, config, data), and resuming from a checkpoint
//! replays the exact noise sequence the uninterrupted run would have used.

use ndarray::{Array3, ArrayD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{ParamSet, Tape};
use crate::checkpoint::Checkpoint;
use crate::compensation::preprocess;
use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::loss::{cdc_total, ConvStackExtractor, LossBreakdown};
use crate::metrics::psnr;
use crate::schedule::{to_model_space, NoiseSchedule};

use super::configio::PipelineConfig;
use super::dataset::{random_patch, ImagePair};
use super::enhance::enhance_image;

/// Adam accumulators and counters for one run.
#[derive(Debug, Clone)]
pub struct TrainState {
    /// Completed optimization steps.
    pub step: u64,
    /// First-moment estimates, mirroring the weight shapes.
    pub m: ParamSet,
    /// Second-moment estimates, mirroring the weight shapes.
    pub v: ParamSet,
}

/// Scalar losses of one optimization step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepLosses {
    pub total: f64,
    pub eps_mse: f64,
    pub cdc: LossBreakdown,
}

/// One CSV log row.
#[derive(Debug, Clone, Copy)]
pub struct LogRow {
    pub step: u64,
    pub losses: StepLosses,
}

/// One validation measurement.
#[derive(Debug, Clone, Copy)]
pub struct ValRow {
    pub step: u64,
    pub mean_psnr: f64,
}

/// Everything a finished run reports back.
pub struct TrainOutcome {
    pub log: Vec<LogRow>,
    pub val: Vec<ValRow>,
    /// Step whose validation score was best (None without validation).
    pub best_step: Option<u64>,
}

pub const LOG_HEADER: &str = "step,total,eps_mse,cdc_total,cdc_pixel,cdc_perceptual,cdc_ssim,cdc_fft";

pub fn log_row_csv(row: &LogRow) -> String {
    let l = &row.losses;
    format!(
        "{},{:.8},{:.8},{:.8},{:.8},{:.8},{:.8},{:.8}",
        row.step, l.total, l.eps_mse, l.cdc.total, l.cdc.pixel, l.cdc.perceptual, l.cdc.ssim,
        l.cdc.fft
    )
}

/// In-place Adam update for one tensor. `step` is the 1-based count of
/// updates applied so far including this one; epsilon is 1e-8.
pub fn adam_update(
    param: &mut ArrayD<f64>,
    grad: &ArrayD<f64>,
    m: &mut ArrayD<f64>,
    v: &mut ArrayD<f64>,
    step: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
) {
    let bc1 = 1.0 - beta1.powi(step as i32);
    let bc2 = 1.0 - beta2.powi(step as i32);
    ndarray::Zip::from(param)
        .and(grad)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + 1e-8);
        });
}

fn zeros_like(params: &ParamSet) -> ParamSet {
    let mut out = ParamSet::new();
    for (name, value) in params.iter() {
        out.insert(name, ArrayD::zeros(value.raw_dim()));
    }
    out
}

fn standard_normal(rng: &mut ChaCha20Rng, shape: (usize, usize, usize)) -> Array3<f64> {
    Array3::from_shape_simple_fn(shape, || rng.sample(StandardNormal))
}

/// Owns the network, optimizer state, schedule, and frozen feature stack
/// for one training run.
pub struct Trainer {
    cfg: PipelineConfig,
    schedule: NoiseSchedule,
    extractor: Option<ConvStackExtractor>,
    net: Denoiser,
    state: TrainState,
}

impl Trainer {
    /// Fresh run: seeded weight initialization, zeroed moments, step 0.
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let schedule = cfg.schedule.build()?;
        let net = Denoiser::new(cfg.denoiser.clone(), cfg.train.seed)?;
        let extractor = cfg
            .train
            .loss_mode
            .uses_cdc()
            .then(|| ConvStackExtractor::new(cfg.extractor_seed));
        let state = TrainState {
            step: 0,
            m: zeros_like(net.params()),
            v: zeros_like(net.params()),
        };
        Ok(Self {
            cfg,
            schedule,
            extractor,
            net,
            state,
        })
    }

    /// Restores a run from a checkpoint produced by [`Self::to_checkpoint`].
    ///
    /// `cfg` is the caller's configuration for the resumed run; it must agree
    /// with the checkpoint on everything that defines the model (verified via
    /// [`verify_config_digest`]), while run-control settings such as the
    /// iteration budget may differ — that is how a run is extended.
    pub fn from_checkpoint(ckpt: &Checkpoint, cfg: PipelineConfig) -> Result<Self> {
        verify_config_digest(ckpt, &cfg)?;
        let mut trainer = Self::new(cfg)?;
        let step = ckpt.arrays.get("state.step")?;
        if step.len() != 1 {
            return Err(Error::Checkpoint(format!(
                "state.step must hold one element, found {}",
                step.len()
            )));
        }
        trainer.state.step = step[0] as u64;
        let mut weights = ParamSet::new();
        let mut m = ParamSet::new();
        let mut v = ParamSet::new();
        for i in 0..trainer.net.params().len() {
            let name = trainer.net.params().name_at(i).to_string();
            weights.insert(&name, ckpt.arrays.get(&name)?.clone());
            m.insert(&name, ckpt.arrays.get(&format!("opt.m.{name}"))?.clone());
            v.insert(&name, ckpt.arrays.get(&format!("opt.v.{name}"))?.clone());
        }
        trainer.net = Denoiser::from_parts(trainer.cfg.denoiser.clone(), weights)?;
        trainer.net.params().compatible_with(&m)?;
        trainer.net.params().compatible_with(&v)?;
        trainer.state.m = m;
        trainer.state.v = v;
        Ok(trainer)
    }

    /// Bundles config, weights, Adam moments, and the step counter.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut arrays = ParamSet::new();
        arrays.insert(
            "state.step",
            ArrayD::from_shape_vec(ndarray::IxDyn(&[1]), vec![self.state.step as f64]).unwrap(),
        );
        for (name, value) in self.net.params().iter() {
            arrays.insert(name, value.clone());
        }
        for (name, value) in self.state.m.iter() {
            arrays.insert(format!("opt.m.{name}"), value.clone());
        }
        for (name, value) in self.state.v.iter() {
            arrays.insert(format!("opt.v.{name}"), value.clone());
        }
        Checkpoint::new(self.cfg.to_flat(), arrays)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn net(&self) -> &Denoiser {
        &self.net
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    /// Loss and gradients for one (degraded, clean) patch at one drawn
    /// timestep. The clean estimate for the consistency terms is formed on
    /// the tape so its gradient flows through the noise prediction.
    fn pair_loss_and_grads(
        &self,
        degraded: &Image,
        clean: &Image,
        rng: &mut ChaCha20Rng,
    ) -> Result<(StepLosses, Vec<ArrayD<f64>>)> {
        let t_steps = self.schedule.t_steps();
        let y01 = preprocess(degraded, &self.cfg.compensation)?;
        let y = to_model_space(&y01.to_chw());
        let x0 = to_model_space(&clean.to_chw());
        let t = rng.gen_range(1..=t_steps);
        let eps = standard_normal(rng, x0.dim());
        let x_t = self.schedule.q_sample(&x0, t, &eps)?;

        let mut tape = Tape::new();
        let bound = self.net.bind(&mut tape, true);
        let xt_var = tape.constant(x_t.into_dyn());
        let y_var = tape.constant(y.into_dyn());
        let eps_hat = self.net.forward_vars(&mut tape, &bound, xt_var, y_var, t)?;

        let mut losses = StepLosses::default();
        let mode = self.cfg.train.loss_mode;
        let mut terms = Vec::new();
        if mode.uses_eps() {
            let eps_const = tape.constant(eps.into_dyn());
            let term = tape.mean_sq_diff(eps_hat, eps_const);
            losses.eps_mse = tape.scalar_value(term);
            terms.push(term);
        }
        if mode.uses_cdc() {
            let g = self.schedule.gamma(t);
            // x0_hat = (x_t - sqrt(1-g) eps_hat) / sqrt(g), then mapped to
            // [0, 1] where the consistency terms are defined.
            let shifted = tape.add_scaled(xt_var, eps_hat, -(1.0 - g).sqrt());
            let x0_hat = tape.scale(shifted, 1.0 / g.sqrt());
            let half = tape.scale(x0_hat, 0.5);
            let x0_01 = tape.add_scalar(half, 0.5);
            let extractor = self.extractor.as_ref().expect("extractor set for CDC modes");
            let (term, breakdown) =
                cdc_total(&mut tape, x0_01, &clean.to_chw(), extractor, &self.cfg.loss)?;
            losses.cdc = breakdown;
            terms.push(term);
        }
        let total = match terms.len() {
            1 => terms[0],
            2 => tape.add(terms[0], terms[1]),
            _ => unreachable!("loss mode always enables at least one term"),
        };
        losses.total = tape.scalar_value(total);
        if !losses.total.is_finite() {
            return Err(Error::param(format!(
                "non-finite training loss {} at step {}",
                losses.total,
                self.state.step + 1
            )));
        }

        let grads = tape.backward(total);
        let ordered = bound.ordered(self.net.params());
        let grad_arrays = ordered
            .iter()
            .enumerate()
            .map(|(i, &var)| {
                grads
                    .get(var)
                    .cloned()
                    .unwrap_or_else(|| ArrayD::zeros(self.net.params().value_at(i).raw_dim()))
            })
            .collect();
        Ok((losses, grad_arrays))
    }

    /// One optimization step over `batch_size` round-robin pairs.
    pub fn step(&mut self, pairs: &[ImagePair]) -> Result<StepLosses> {
        if pairs.is_empty() {
            return Err(Error::Dataset(
                "training requires at least one image pair".into(),
            ));
        }
        let t = &self.cfg.train;
        let step_index = self.state.step; // 0-based index of this step
        let mut rng = ChaCha20Rng::seed_from_u64(t.seed);
        rng.set_stream(step_index + 1);

        let mut mean_losses = StepLosses::default();
        let mut grad_sum: Option<Vec<ArrayD<f64>>> = None;
        for b in 0..t.batch_size {
            let pair = &pairs[(step_index as usize * t.batch_size + b) % pairs.len()];
            let (degraded, clean) = random_patch(pair, t.patch_size, &mut rng)?;
            let (losses, grads) = self.pair_loss_and_grads(&degraded, &clean, &mut rng)?;
            mean_losses.total += losses.total;
            mean_losses.eps_mse += losses.eps_mse;
            mean_losses.cdc.pixel += losses.cdc.pixel;
            mean_losses.cdc.perceptual += losses.cdc.perceptual;
            mean_losses.cdc.ssim += losses.cdc.ssim;
            mean_losses.cdc.fft += losses.cdc.fft;
            mean_losses.cdc.total += losses.cdc.total;
            match &mut grad_sum {
                None => grad_sum = Some(grads),
                Some(sum) => {
                    for (s, g) in sum.iter_mut().zip(&grads) {
                        *s += g;
                    }
                }
            }
        }
        let scale = 1.0 / t.batch_size as f64;
        mean_losses.total *= scale;
        mean_losses.eps_mse *= scale;
        mean_losses.cdc.pixel *= scale;
        mean_losses.cdc.perceptual *= scale;
        mean_losses.cdc.ssim *= scale;
        mean_losses.cdc.fft *= scale;
        mean_losses.cdc.total *= scale;

        self.state.step += 1;
        let adam_step = self.state.step;
        let (lr, b1, b2) = (t.learning_rate, t.adam_beta1, t.adam_beta2);
        let grads = grad_sum.expect("batch_size >= 1");
        for (i, mut grad) in grads.into_iter().enumerate() {
            grad *= scale;
            adam_update(
                self.net.params_mut().value_at_mut(i),
                &grad,
                self.state.m.value_at_mut(i),
                self.state.v.value_at_mut(i),
                adam_step,
                lr,
                b1,
                b2,
            );
        }
        Ok(mean_losses)
    }

    /// Mean PSNR of enhanced validation inputs against their references.
    fn validation_psnr(&self, val: &[ImagePair]) -> Result<f64> {
        let mut sum = 0.0;
        for (i, pair) in val.iter().enumerate() {
            let mut rng = ChaCha20Rng::seed_from_u64(self.cfg.train.seed);
            rng.set_stream(u64::MAX - i as u64); // away from training streams
            let out = enhance_image(
                &self.net,
                &self.schedule,
                &self.cfg.compensation,
                self.cfg.clamp_x0,
                &pair.degraded,
                &mut rng,
            )?;
            sum += psnr(&out, &pair.clean)?;
        }
        Ok(sum / val.len() as f64)
    }

    /// Runs the configured number of iterations over `pairs`. The first
    /// `val_pairs` entries are held out for validation; the rest rotate
    /// through training. With an output directory, writes `train_log.csv`,
    /// `val_log.csv`, periodic `ckpt_step*.aqdf`, `final.aqdf`, and
    /// `best.aqdf` (best validation PSNR).
    pub fn run(
        &mut self,
        pairs: &[ImagePair],
        out_dir: Option<&std::path::Path>,
    ) -> Result<TrainOutcome> {
        let t = self.cfg.train.clone();
        if pairs.len() <= t.val_pairs {
            return Err(Error::Dataset(format!(
                "dataset has {} pairs but {} are reserved for validation",
                pairs.len(),
                t.val_pairs
            )));
        }
        let (val_set, train_set) = pairs.split_at(t.val_pairs);
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }

        let mut log = Vec::new();
        let mut val = Vec::new();
        let mut best: Option<(f64, u64, Checkpoint)> = None;
        let start = self.state.step;
        for _ in start..t.iterations as u64 {
            let losses = self.step(train_set)?;
            let step = self.state.step;
            if step == 1 || step % t.log_every as u64 == 0 || step == t.iterations as u64 {
                log.push(LogRow { step, losses });
            }
            let at_checkpoint = t.checkpoint_every > 0 && step % t.checkpoint_every as u64 == 0;
            let at_end = step == t.iterations as u64;
            if at_checkpoint || at_end {
                let ckpt = self.to_checkpoint();
                if let Some(dir) = out_dir {
                    if at_checkpoint {
                        ckpt.save(dir.join(format!("ckpt_step{step}.aqdf")))?;
                    }
                }
                if !val_set.is_empty() {
                    let score = self.validation_psnr(val_set)?;
                    val.push(ValRow {
                        step,
                        mean_psnr: score,
                    });
                    let better = best.as_ref().map_or(true, |(b, _, _)| score > *b);
                    if better {
                        best = Some((score, step, ckpt));
                    }
                }
            }
        }

        if let Some(dir) = out_dir {
            self.to_checkpoint().save(dir.join("final.aqdf"))?;
            if let Some((_, _, ckpt)) = &best {
                ckpt.save(dir.join("best.aqdf"))?;
            }
            let mut csv = String::from(LOG_HEADER);
            csv.push('\n');
            for row in &log {
                csv.push_str(&log_row_csv(row));
                csv.push('\n');
            }
            let log_path = dir.join("train_log.csv");
            std::fs::write(&log_path, csv).map_err(|e| Error::io(&log_path, e))?;
            if !val.is_empty() {
                let mut csv = String::from("step,mean_psnr\n");
                for row in &val {
                    csv.push_str(&format!("{},{:.6}\n", row.step, row.mean_psnr));
                }
                let val_path = dir.join("val_log.csv");
                std::fs::write(&val_path, csv).map_err(|e| Error::io(&val_path, e))?;
            }
        }
        Ok(TrainOutcome {
            log,
            val,
            best_step: best.map(|(_, s, _)| s),
        })
    }
}

/// Verifies that a checkpoint's model identity — architecture, schedule,
/// loss, compensation, and optimization hyperparameters — matches the
/// expected configuration, comparing canonical-identity digests.
/// Run-control settings (iteration budget, logging cadence) may differ.
pub fn verify_config_digest(ckpt: &Checkpoint, expected: &PipelineConfig) -> Result<()> {
    let stored = PipelineConfig::from_flat(&ckpt.config)?;
    let stored_digest = crate::checkpoint::config_digest(&stored.identity_flat().to_text());
    let expected_digest = crate::checkpoint::config_digest(&expected.identity_flat().to_text());
    if stored_digest != expected_digest {
        return Err(Error::Checkpoint(format!(
            "configuration mismatch: checkpoint identity digest {} but expected {}",
            crate::checkpoint::digest_hex(&stored_digest),
            crate::checkpoint::digest_hex(&expected_digest)
        )));
    }
    Ok(())
}
