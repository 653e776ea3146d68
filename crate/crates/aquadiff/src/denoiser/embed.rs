//! Sinusoidal timestep embeddings.

use ndarray::Array1;

use crate::error::{Error, Result};

/// Transformer-style sinusoidal embedding of a diffusion timestep.
///
/// For an even `dim = 2k`, frequency `i` (0-based) is
/// `f_i = exp(-ln(10000) * i / (k - 1))`, spanning periods from `2 pi` up to
/// `2 pi * 10000`, and the embedding is `[sin(t f_0) .. sin(t f_{k-1}),
/// cos(t f_0) .. cos(t f_{k-1})]`. At `t = 0` the sine half is all zeros and
/// the cosine half all ones.
pub fn timestep_embedding(t: usize, dim: usize) -> Result<Array1<f64>> {
    if dim < 4 || dim % 2 != 0 {
        return Err(Error::param(format!(
            "embedding dim must be even and >= 4, got {dim}"
        )));
    }
    let half = dim / 2;
    let t = t as f64;
    let mut out = Array1::zeros(dim);
    for i in 0..half {
        let freq = (-(10_000f64).ln() * i as f64 / (half - 1) as f64).exp();
        out[i] = (t * freq).sin();
        out[half + i] = (t * freq).cos();
    }
    Ok(out)
}
