//! Conditional U-Net noise estimator.
//!
//! The network predicts the noise component of a diffused image `x_t` given
//! the timestep `t` and a compensated degraded image `y`. Architecturally it
//! is a U-Net whose encoder halves resolution with strided convolutions and
//! whose decoder restores it with nearest-neighbor upsampling, with three
//! additions over the plain backbone:
//!
//! - **Residual dense blocks** (RDBs): inside each block, every 3x3 conv
//!   sees the concatenation of all previous features of that block, and a
//!   1x1 fusion projects back to the trunk width.
//! - **Dense skip connections**: a decoder level concatenates *all*
//!   same-resolution encoder features, not just the mirror one, before a
//!   1x1 fusion.
//! - **Multi-resolution attention**: at configured resolutions each level
//!   runs self-attention followed by cross-attention against features of
//!   `y`, so conditioning acts globally instead of only through local
//!   convolution. `y` is encoded once per forward pass by a small strided
//!   conv pyramid.
//!
//! Timesteps enter through a sinusoidal embedding, a two-layer MLP, and
//! per-block affine (scale/shift) modulation of normalized activations.
//!
//! Setting [`DenoiserConfig::use_rdb`], [`DenoiserConfig::dense_skips`], and
//! attention options off and [`DenoiserConfig::concat_condition`] on yields
//! the conventional concatenation-conditioned U-Net used as the ablation
//! baseline.

mod attention;
mod embed;
mod network;

pub use attention::{cross_attention, AttentionWeights};
pub use embed::timestep_embedding;
pub use network::{Denoiser, DenoiserConfig};
