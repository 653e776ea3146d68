//! Scaled dot-product attention over spatial positions.
//!
//! Feature maps `[c, h, w]` are flattened to `n = h * w` position vectors.
//! Self-attention lets every position attend to every other position of the
//! same map; cross-attention draws keys and values from the conditioning
//! branch instead, which is how information from the degraded image enters
//! the denoiser at each attended resolution.

use ndarray::{Array2, Array3};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Projection matrices for one attention module. Shapes: `wq: [c_q, d]`,
/// `wk/wv: [c_kv, d]`, `wo: [d, c_q]`, with `d` divisible by the head count.
#[derive(Debug, Clone)]
pub struct AttentionWeights {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
}

/// Multi-head scaled dot-product attention on already-registered tape nodes.
/// `q_input` is `[n, c_q]`; `kv_input` is `[m, c_kv]`. Returns `[n, c_q]`.
pub(crate) fn attention_on_tape(
    tape: &mut Tape,
    q_input: Var,
    kv_input: Var,
    wq: Var,
    wk: Var,
    wv: Var,
    wo: Var,
    heads: usize,
) -> Var {
    let d = tape.value(wq).shape()[1];
    assert!(heads >= 1 && d % heads == 0, "head count {heads} must divide width {d}");
    let dk = d / heads;
    let q = tape.matmul(q_input, wq);
    let k = tape.matmul(kv_input, wk);
    let v = tape.matmul(kv_input, wv);
    let mut outputs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = tape.slice_cols(q, h * dk, dk);
        let kh = tape.slice_cols(k, h * dk, dk);
        let vh = tape.slice_cols(v, h * dk, dk);
        let kt = tape.transpose2(kh);
        let scores = tape.matmul(qh, kt);
        let scaled = tape.scale(scores, 1.0 / (dk as f64).sqrt());
        let attn = tape.softmax_rows(scaled);
        outputs.push(tape.matmul(attn, vh));
    }
    let joined = if heads == 1 {
        outputs[0]
    } else {
        tape.concat_cols(&outputs)
    };
    tape.matmul(joined, wo)
}

fn flatten_positions(x: &Array3<f64>) -> Array2<f64> {
    let (c, h, w) = x.dim();
    let mut out = Array2::zeros((h * w, c));
    for ch in 0..c {
        for y in 0..h {
            for xx in 0..w {
                out[[y * w + xx, ch]] = x[[ch, y, xx]];
            }
        }
    }
    out
}

/// Standalone cross-attention: queries from `x`, keys/values from `y`,
/// no normalization or residual. Exposed for direct inspection and tests;
/// the network wraps this same computation with group norm and a residual
/// connection.
pub fn cross_attention(
    x: &Array3<f64>,
    y: &Array3<f64>,
    weights: &AttentionWeights,
    heads: usize,
) -> Result<Array3<f64>> {
    let (cx, h, w) = x.dim();
    let (cy, hy, wy) = y.dim();
    if (h, w) != (hy, wy) {
        return Err(Error::dim(format!(
            "cross_attention spatial mismatch: {h}x{w} vs {hy}x{wy}"
        )));
    }
    if weights.wq.nrows() != cx || weights.wk.nrows() != cy || weights.wv.nrows() != cy {
        return Err(Error::dim("attention weight rows do not match channels".to_string()));
    }
    let d = weights.wq.ncols();
    if weights.wk.ncols() != d || weights.wv.ncols() != d || weights.wo.nrows() != d {
        return Err(Error::dim("attention widths disagree".to_string()));
    }
    if weights.wo.ncols() != cx {
        return Err(Error::dim("output projection must map back to query channels".to_string()));
    }
    if heads == 0 || d % heads != 0 {
        return Err(Error::param(format!("head count {heads} must divide width {d}")));
    }

    let mut tape = Tape::new();
    let q_in = tape.constant(flatten_positions(x).into_dyn());
    let kv_in = tape.constant(flatten_positions(y).into_dyn());
    let wq = tape.constant(weights.wq.clone().into_dyn());
    let wk = tape.constant(weights.wk.clone().into_dyn());
    let wv = tape.constant(weights.wv.clone().into_dyn());
    let wo = tape.constant(weights.wo.clone().into_dyn());
    let out = attention_on_tape(&mut tape, q_in, kv_in, wq, wk, wv, wo, heads);
    let flat = tape
        .value(out)
        .clone()
        .into_dimensionality::<ndarray::Ix2>()
        .expect("rank-2 attention output");
    let mut result = Array3::zeros((cx, h, w));
    for ch in 0..cx {
        for yy in 0..h {
            for xx in 0..w {
                result[[ch, yy, xx]] = flat[[yy * w + xx, ch]];
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2, Array3};

    use super::*;

    fn identity(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn two_position_case_matches_hand_calculation() {
        // One channel, two positions. With identity projections:
        //   q = x = [1, 0]^T (column per position), k = v = y = [2, 1]^T
        //   scores/sqrt(1): [[2, 1], [0, 0]]
        //   softmax rows: [[e^2, e] / (e^2 + e), [0.5, 0.5]]
        //   out = attn . v
        let x = Array3::from_shape_vec((1, 1, 2), vec![1.0, 0.0]).unwrap();
        let y = Array3::from_shape_vec((1, 1, 2), vec![2.0, 1.0]).unwrap();
        let w = AttentionWeights {
            wq: identity(1),
            wk: identity(1),
            wv: identity(1),
            wo: identity(1),
        };
        let out = cross_attention(&x, &y, &w, 1).unwrap();
        let e2 = 2f64.exp();
        let e1 = 1f64.exp();
        let p = e2 / (e2 + e1);
        let want0 = p * 2.0 + (1.0 - p) * 1.0;
        let want1 = 0.5 * 2.0 + 0.5 * 1.0;
        assert_abs_diff_eq!(out[[0, 0, 0]], want0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[[0, 0, 1]], want1, epsilon = 1e-12);
    }

    #[test]
    fn constant_values_attend_to_constant() {
        // Whatever the attention pattern, convex combinations of identical
        // value vectors reproduce that vector.
        let x = Array3::from_shape_fn((2, 2, 2), |(c, y, xx)| {
            0.3 * c as f64 + 0.1 * y as f64 - 0.2 * xx as f64
        });
        let y = Array3::from_elem((2, 2, 2), 0.7);
        let w = AttentionWeights {
            wq: identity(2),
            wk: identity(2),
            wv: identity(2),
            wo: identity(2),
        };
        let out = cross_attention(&x, &y, &w, 1).unwrap();
        for v in out.iter() {
            assert_abs_diff_eq!(*v, 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn self_attention_special_case_runs() {
        let x = Array3::from_shape_fn((2, 2, 2), |(c, y, xx)| {
            ((c + 2 * y + 3 * xx) as f64 * 0.37).sin()
        });
        let w = AttentionWeights {
            wq: array![[0.2, -0.1], [0.05, 0.3]],
            wk: array![[0.1, 0.0], [-0.2, 0.25]],
            wv: array![[0.3, 0.1], [0.0, -0.15]],
            wo: array![[1.0, 0.0], [0.0, 1.0]],
        };
        let out = cross_attention(&x, &x, &w, 2).unwrap();
        assert_eq!(out.dim(), (2, 2, 2));
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let x = Array3::<f64>::zeros((2, 2, 2));
        let y = Array3::<f64>::zeros((2, 2, 3));
        let w = AttentionWeights {
            wq: identity(2),
            wk: identity(2),
            wv: identity(2),
            wo: identity(2),
        };
        assert!(cross_attention(&x, &y, &w, 1).is_err());
        let y = Array3::<f64>::zeros((3, 2, 2));
        assert!(cross_attention(&x, &y, &w, 1).is_err(), "wk rows must match y channels");
        let y = Array3::<f64>::zeros((2, 2, 2));
        assert!(cross_attention(&x, &y, &w, 3).is_err(), "heads must divide width");
    }
}
