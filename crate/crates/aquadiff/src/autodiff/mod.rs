//! Tape-based reverse-mode automatic differentiation over `f64` tensors.
//!
//! A [`Tape`] records every operation applied to [`Var`] handles; calling
//! [`Tape::backward`] on a scalar node walks the recording in reverse and
//! accumulates gradients for every leaf created with `requires_grad`.
//!
//! The op set is exactly what the denoiser and the training losses need:
//! elementwise arithmetic and activations, reductions, matrix products with
//! row softmax (attention), 2-D convolution with zero or circular padding,
//! group normalization, nearest-neighbor upsampling, bilinear resizing,
//! depthwise filtering with fixed kernels, and a spectral-magnitude loss.
//! Scalar outputs are rank-0 arrays.
//!
//! Evaluation order is fixed by construction, so gradients are bit-identical
//! across runs for identical inputs.

mod conv;
mod matrix;
mod norm;
mod params;
mod spectral;
mod tape;


pub use params::ParamSet;
pub use spectral::rfft2_magnitude;
pub use tape::{Grads, PadMode, Tape, Var};
