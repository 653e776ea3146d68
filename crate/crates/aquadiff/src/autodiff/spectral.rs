//! Spectral-magnitude loss op.
//!
//! The forward pass takes the 2-D DFT of each channel, keeps the
//! non-redundant half spectrum (`w' = w/2 + 1` columns), and measures the
//! mean L1 distance between the magnitudes and a fixed target. Because only
//! magnitudes are compared, the loss is invariant to circular translation of
//! either argument.
//!
//! The gradient of `|X_k|` with respect to the real input is the real part
//! of the unnormalized inverse DFT of `X_k / |X_k|` placed at the retained
//! frequencies; bins with near-zero magnitude contribute a zero subgradient.

use ndarray::{Array2, Array3, ArrayD, Ix3, IxDyn};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::tape::{Op, Tape, Var};

const MAG_EPS: f64 = 1e-12;

fn as3(v: &ArrayD<f64>) -> ndarray::ArrayView3<'_, f64> {
    v.view()
        .into_dimensionality::<Ix3>()
        .expect("rank-3 tensor expected")
}

/// In-place 2-D FFT over a complex matrix; `inverse` selects direction.
/// No normalization is applied in either direction.
fn fft2_inplace(data: &mut Array2<Complex<f64>>, inverse: bool) {
    let (h, w) = data.dim();
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    for mut row in data.rows_mut() {
        let slice = row.as_slice_mut().expect("contiguous row");
        row_fft.process(slice);
    }
    let mut scratch = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            scratch[y] = data[[y, x]];
        }
        col_fft.process(&mut scratch);
        for y in 0..h {
            data[[y, x]] = scratch[y];
        }
    }
}

/// Full complex spectrum of one real plane.
fn spectrum(plane: ndarray::ArrayView2<'_, f64>) -> Array2<Complex<f64>> {
    let mut data = plane.mapv(|v| Complex::new(v, 0.0));
    fft2_inplace(&mut data, false);
    data
}

/// Per-channel half-spectrum magnitudes `[c, h, w/2 + 1]` of a `[c, h, w]`
/// real tensor.
pub fn rfft2_magnitude(x: &Array3<f64>) -> Array3<f64> {
    let (c, h, w) = x.dim();
    let wh = w / 2 + 1;
    let mut out = Array3::<f64>::zeros((c, h, wh));
    for ch in 0..c {
        let spec = spectrum(x.index_axis(ndarray::Axis(0), ch));
        for k1 in 0..h {
            for k2 in 0..wh {
                out[[ch, k1, k2]] = spec[[k1, k2]].norm();
            }
        }
    }
    out
}

impl Tape {
    /// Mean L1 distance between half-spectrum magnitudes of `x` and a fixed
    /// `target`, normalized by `h * (w/2 + 1)` per channel and averaged over
    /// channels. Returns a rank-0 node.
    pub fn fft_mag_l1(&mut self, x: Var, target: &Array3<f64>) -> Var {
        let vx = as3(&self.values[x.0]);
        let (c, h, w) = vx.dim();
        let wh = w / 2 + 1;
        assert_eq!(
            target.dim(),
            (c, h, wh),
            "spectral target shape mismatch: {:?} vs ({c}, {h}, {wh})",
            target.dim()
        );
        let mags = rfft2_magnitude(&vx.to_owned());
        let norm = (h * wh) as f64 * c as f64;
        let loss: f64 = mags
            .iter()
            .zip(target.iter())
            .map(|(m, t)| (m - t).abs())
            .sum::<f64>()
            / norm;
        let needs = self.needs[x.0];
        self.push(
            ArrayD::from_elem(IxDyn(&[]), loss),
            Op::FftMagL1 {
                x: x.0,
                target: target.clone().into_dyn(),
            },
            needs,
        )
    }
}

pub(super) fn backward(
    tape: &Tape,
    id: usize,
    gout: &ArrayD<f64>,
    grads: &mut Vec<Option<ArrayD<f64>>>,
) {
    let Op::FftMagL1 { x, target } = &tape.ops[id] else {
        unreachable!("spectral backward on wrong op")
    };
    let g = *gout.iter().next().expect("scalar grad");
    let vx = as3(&tape.values[*x]);
    let target = as3(target);
    let (c, h, w) = vx.dim();
    let wh = w / 2 + 1;
    let coeff = g / ((h * wh) as f64 * c as f64);
    let mut gx = Array3::<f64>::zeros((c, h, w));
    for ch in 0..c {
        let spec = spectrum(vx.index_axis(ndarray::Axis(0), ch));
        let mut gspec = Array2::<Complex<f64>>::zeros((h, w));
        for k1 in 0..h {
            for k2 in 0..wh {
                let val = spec[[k1, k2]];
                let mag = val.norm();
                if mag < MAG_EPS {
                    continue;
                }
                let sign = if mag >= target[[ch, k1, k2]] { 1.0 } else { -1.0 };
                gspec[[k1, k2]] = val * (coeff * sign / mag);
            }
        }
        fft2_inplace(&mut gspec, true);
        for y in 0..h {
            for xx in 0..w {
                gx[[ch, y, xx]] += gspec[[y, xx]].re;
            }
        }
    }
    tape.acc(grads, *x, gx.into_dyn());
}
