//! AquaDiff: conditional-diffusion enhancement of underwater images.
//!
//! Underwater photographs suffer wavelength-dependent attenuation (red light
//! dies first) and backscatter, producing the familiar blue-green, low
//! contrast look. This crate restores such images with a denoising diffusion
//! model that is *conditioned* on the degraded photo: instead of editing the
//! input directly, it learns the distribution of clean images given their
//! degraded counterparts and samples from it.
//!
//! The pieces, bottom to top:
//!
//! - [`imaging`] — image container, CIELAB color, Gaussian blur, resize, PNG I/O.
//! - [`compensation`] — chromatic compensation that pre-corrects the color
//!   cast of the conditioning image in Lab space.
//! - [`synth`] — physical degradation model for generating paired training
//!   data from clean images.
//! - [`schedule`] — forward/reverse diffusion in closed form: noise
//!   schedules, posterior statistics, ancestral sampling steps.
//! - [`autodiff`] — tape-based reverse-mode differentiation engine the
//!   network and losses are built on.
//! - [`denoiser`] — conditional U-Net with residual dense blocks, dense skip
//!   connections, and self-/cross-attention.
//! - [`loss`] — cross-domain consistency loss: pixel, multi-scale,
//!   perceptual, structural, and spectral terms.
//! - [`metrics`] — PSNR, SSIM, UIQM, UCIQE.
//! - [`gradcheck`] — finite-difference verification of analytic gradients.
//! - [`checkpoint`] — versioned binary weight serialization.
//! - [`pipeline`] — training loop, sampler-based enhancement, evaluation,
//!   and the key-value config format used by the CLI.

pub mod autodiff;
pub mod checkpoint;
pub mod compensation;
pub mod config;
pub mod denoiser;
pub mod error;
pub mod gradcheck;
pub mod guide;
pub mod imaging;
pub mod loss;
pub mod metrics;
pub mod pipeline;
pub mod schedule;
pub mod synth;

pub use error::{Error, Result};
