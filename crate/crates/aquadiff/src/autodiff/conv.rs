//! Spatial ops on the tape. Tensors are `[C, H, W]` unless noted.
//!
//! Convolution lowers each input patch to a row (im2col) and uses a matrix
//! product, which is where nearly all training time goes; the backward pass
//! rebuilds the same patch matrix and scatters gradients back through the
//! padding.

use ndarray::{Array2, Array3, ArrayD, Ix1, Ix2, Ix3};

use crate::imaging::ops::bilinear_axis;

use super::tape::{Op, PadMode, Tape, Var};

fn as3(v: &ArrayD<f64>) -> ndarray::ArrayView3<'_, f64> {
    v.view()
        .into_dimensionality::<Ix3>()
        .expect("rank-3 tensor expected")
}

/// Output length of a padded strided correlation along one axis.
fn out_len(n: usize, k: usize, pad: usize, stride: usize) -> usize {
    assert!(
        n + 2 * pad >= k,
        "kernel size {k} exceeds padded extent {}",
        n + 2 * pad
    );
    (n + 2 * pad - k) / stride + 1
}

/// Maps a padded coordinate back to a source coordinate, or `None` when the
/// tap falls on zero padding.
#[inline]
fn unpad(i: i64, n: i64, mode: PadMode) -> Option<usize> {
    match mode {
        PadMode::Zeros => {
            if i >= 0 && i < n {
                Some(i as usize)
            } else {
                None
            }
        }
        PadMode::Circular => Some(i.rem_euclid(n) as usize),
    }
}

/// Patch matrix `[ho * wo, cin * kh * kw]` for correlation.
fn im2col(
    x: &ndarray::ArrayView3<'_, f64>,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    mode: PadMode,
) -> Array2<f64> {
    let (cin, h, w) = x.dim();
    let ho = out_len(h, kh, pad, stride);
    let wo = out_len(w, kw, pad, stride);
    let mut cols = Array2::<f64>::zeros((ho * wo, cin * kh * kw));
    for oy in 0..ho {
        for ox in 0..wo {
            let row = oy * wo + ox;
            let mut col = 0;
            for c in 0..cin {
                for u in 0..kh {
                    let iy = (oy * stride + u) as i64 - pad as i64;
                    for v in 0..kw {
                        let ix = (ox * stride + v) as i64 - pad as i64;
                        if let (Some(sy), Some(sx)) =
                            (unpad(iy, h as i64, mode), unpad(ix, w as i64, mode))
                        {
                            cols[[row, col]] = x[[c, sy, sx]];
                        }
                        col += 1;
                    }
                }
            }
        }
    }
    cols
}

impl Tape {
    /// 2-D correlation: input `[cin, h, w]`, weight `[cout, cin, kh, kw]`,
    /// optional bias `[cout]`, square stride, symmetric padding.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
        mode: PadMode,
    ) -> Var {
        assert!(stride >= 1, "conv2d stride must be >= 1");
        let vx = as3(&self.values[x.0]);
        let vw = self.values[w.0]
            .view()
            .into_dimensionality::<ndarray::Ix4>()
            .expect("conv2d weight must be rank-4");
        let (cout, cin, kh, kw) = vw.dim();
        assert_eq!(vx.dim().0, cin, "conv2d channel mismatch");
        let (_, h, wd) = vx.dim();
        let ho = out_len(h, kh, pad, stride);
        let wo = out_len(wd, kw, pad, stride);

        let cols = im2col(&vx, kh, kw, stride, pad, mode);
        let wmat = vw
            .into_shape_with_order((cout, cin * kh * kw))
            .expect("weight reshape");
        // [n, k] x [k, cout]
        let mut out_mat = cols.dot(&wmat.t());
        if let Some(bv) = b {
            let vb = self.values[bv.0]
                .view()
                .into_dimensionality::<Ix1>()
                .expect("conv2d bias must be rank-1");
            assert_eq!(vb.len(), cout, "conv2d bias length mismatch");
            out_mat += &vb;
        }
        let mut out = Array3::<f64>::zeros((cout, ho, wo));
        for c in 0..cout {
            for oy in 0..ho {
                for ox in 0..wo {
                    out[[c, oy, ox]] = out_mat[[oy * wo + ox, c]];
                }
            }
        }
        let mut ids = vec![x.0, w.0];
        if let Some(bv) = b {
            ids.push(bv.0);
        }
        let needs = self.needs_any(&ids);
        self.push(
            out.into_dyn(),
            Op::Conv2d {
                x: x.0,
                w: w.0,
                b: b.map(|v| v.0),
                stride,
                pad,
                mode,
            },
            needs,
        )
    }

    /// Depthwise correlation with a fixed (non-learned) rank-2 kernel and
    /// valid padding: every channel is filtered independently.
    pub fn depthwise_valid(&mut self, x: Var, kernel: Array2<f64>) -> Var {
        let vx = as3(&self.values[x.0]);
        let (c, h, w) = vx.dim();
        let (kh, kw) = kernel.dim();
        assert!(h >= kh && w >= kw, "depthwise kernel larger than input");
        let (ho, wo) = (h - kh + 1, w - kw + 1);
        let mut out = Array3::<f64>::zeros((c, ho, wo));
        for ch in 0..c {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for u in 0..kh {
                        for v in 0..kw {
                            acc += kernel[[u, v]] * vx[[ch, oy + u, ox + v]];
                        }
                    }
                    out[[ch, oy, ox]] = acc;
                }
            }
        }
        let needs = self.needs[x.0];
        self.push(
            out.into_dyn(),
            Op::DepthwiseValid {
                x: x.0,
                kernel: kernel.into_dyn(),
            },
            needs,
        )
    }

    /// Concatenates rank-3 tensors along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_channels of zero tensors");
        let first = as3(&self.values[parts[0].0]).dim();
        let mut total_c = 0;
        for p in parts {
            let d = as3(&self.values[p.0]).dim();
            assert_eq!(
                (d.1, d.2),
                (first.1, first.2),
                "concat_channels spatial mismatch"
            );
            total_c += d.0;
        }
        let mut out = Array3::<f64>::zeros((total_c, first.1, first.2));
        let mut offset = 0;
        for p in parts {
            let v = as3(&self.values[p.0]);
            let c = v.dim().0;
            out.slice_mut(ndarray::s![offset..offset + c, .., ..])
                .assign(&v);
            offset += c;
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let needs = self.needs_any(&ids);
        self.push(out.into_dyn(), Op::ConcatChannels(ids), needs)
    }

    /// Nearest-neighbor 2x upsampling.
    pub fn upsample_nearest2(&mut self, x: Var) -> Var {
        let v = as3(&self.values[x.0]);
        let (c, h, w) = v.dim();
        let mut out = Array3::<f64>::zeros((c, 2 * h, 2 * w));
        for ch in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    let val = v[[ch, y, xx]];
                    out[[ch, 2 * y, 2 * xx]] = val;
                    out[[ch, 2 * y, 2 * xx + 1]] = val;
                    out[[ch, 2 * y + 1, 2 * xx]] = val;
                    out[[ch, 2 * y + 1, 2 * xx + 1]] = val;
                }
            }
        }
        let needs = self.needs[x.0];
        self.push(out.into_dyn(), Op::UpsampleNearest2(x.0), needs)
    }

    /// Bilinear resize with the same half-pixel/edge-clamp convention as the
    /// image-domain resampler.
    pub fn resize_bilinear(&mut self, x: Var, out_h: usize, out_w: usize) -> Var {
        assert!(out_h >= 1 && out_w >= 1, "resize target dims must be >= 1");
        let v = as3(&self.values[x.0]);
        let (c, h, w) = v.dim();
        let sy = h as f64 / out_h as f64;
        let sx = w as f64 / out_w as f64;
        let mut out = Array3::<f64>::zeros((c, out_h, out_w));
        for ch in 0..c {
            for y in 0..out_h {
                let (y0, y1, fy) = bilinear_axis(y, h, sy);
                for xx in 0..out_w {
                    let (x0, x1, fx) = bilinear_axis(xx, w, sx);
                    let top = (1.0 - fx) * v[[ch, y0, x0]] + fx * v[[ch, y0, x1]];
                    let bot = (1.0 - fx) * v[[ch, y1, x0]] + fx * v[[ch, y1, x1]];
                    out[[ch, y, xx]] = (1.0 - fy) * top + fy * bot;
                }
            }
        }
        let needs = self.needs[x.0];
        self.push(
            out.into_dyn(),
            Op::ResizeBilinear {
                x: x.0,
                out_h,
                out_w,
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
    match &tape.ops[id] {
        Op::ConcatChannels(ids) => {
            let g = as3(gout);
            let mut offset = 0;
            for &pid in ids {
                let c = as3(&tape.values[pid]).dim().0;
                let part = g
                    .slice(ndarray::s![offset..offset + c, .., ..])
                    .as_standard_layout()
                    .to_owned();
                tape.acc(grads, pid, part.into_dyn());
                offset += c;
            }
        }
        Op::Conv2d {
            x,
            w,
            b,
            stride,
            pad,
            mode,
        } => {
            let vx = as3(&tape.values[*x]);
            let vw = tape.values[*w]
                .view()
                .into_dimensionality::<ndarray::Ix4>()
                .expect("rank-4 weight");
            let (cout, cin, kh, kw) = vw.dim();
            let (_, h, wd) = vx.dim();
            let g = as3(gout);
            let (_, ho, wo) = g.dim();
            // [n, cout] layout of the output gradient.
            let mut gmat = Array2::<f64>::zeros((ho * wo, cout));
            for c in 0..cout {
                for oy in 0..ho {
                    for ox in 0..wo {
                        gmat[[oy * wo + ox, c]] = g[[c, oy, ox]];
                    }
                }
            }
            if tape.needs[*w] {
                let cols = im2col(&vx, kh, kw, *stride, *pad, *mode);
                let gw = gmat.t().dot(&cols); // [cout, k]
                let gw = gw
                    .into_shape_with_order((cout, cin, kh, kw))
                    .expect("weight grad reshape");
                tape.acc(grads, *w, gw.into_dyn());
            }
            if let Some(bid) = b {
                if tape.needs[*bid] {
                    let gb = gmat.sum_axis(ndarray::Axis(0));
                    tape.acc(grads, *bid, gb.into_dyn());
                }
            }
            if tape.needs[*x] {
                let wmat = vw
                    .into_shape_with_order((cout, cin * kh * kw))
                    .expect("weight reshape");
                let gcols = gmat.dot(&wmat); // [n, k]
                let mut gx = Array3::<f64>::zeros((cin, h, wd));
                for oy in 0..ho {
                    for ox in 0..wo {
                        let row = oy * wo + ox;
                        let mut col = 0;
                        for c in 0..cin {
                            for u in 0..kh {
                                let iy = (oy * stride + u) as i64 - *pad as i64;
                                for v in 0..kw {
                                    let ix = (ox * stride + v) as i64 - *pad as i64;
                                    if let (Some(sy), Some(sx)) =
                                        (unpad(iy, h as i64, *mode), unpad(ix, wd as i64, *mode))
                                    {
                                        gx[[c, sy, sx]] += gcols[[row, col]];
                                    }
                                    col += 1;
                                }
                            }
                        }
                    }
                }
                tape.acc(grads, *x, gx.into_dyn());
            }
        }
        Op::DepthwiseValid { x, kernel } => {
            let k = kernel
                .view()
                .into_dimensionality::<Ix2>()
                .expect("rank-2 kernel");
            let (kh, kw) = k.dim();
            let g = as3(gout);
            let (c, ho, wo) = g.dim();
            let vx = as3(&tape.values[*x]);
            let mut gx = Array3::<f64>::zeros(vx.raw_dim());
            for ch in 0..c {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let go = g[[ch, oy, ox]];
                        for u in 0..kh {
                            for v in 0..kw {
                                gx[[ch, oy + u, ox + v]] += go * k[[u, v]];
                            }
                        }
                    }
                }
            }
            tape.acc(grads, *x, gx.into_dyn());
        }
        Op::UpsampleNearest2(x) => {
            let g = as3(gout);
            let (c, h2, w2) = g.dim();
            let mut gx = Array3::<f64>::zeros((c, h2 / 2, w2 / 2));
            for ch in 0..c {
                for y in 0..h2 {
                    for xx in 0..w2 {
                        gx[[ch, y / 2, xx / 2]] += g[[ch, y, xx]];
                    }
                }
            }
            tape.acc(grads, *x, gx.into_dyn());
        }
        Op::ResizeBilinear { x, out_h, out_w } => {
            let vx = as3(&tape.values[*x]);
            let (c, h, w) = vx.dim();
            let g = as3(gout);
            let sy = h as f64 / *out_h as f64;
            let sx = w as f64 / *out_w as f64;
            let mut gx = Array3::<f64>::zeros((c, h, w));
            for ch in 0..c {
                for y in 0..*out_h {
                    let (y0, y1, fy) = bilinear_axis(y, h, sy);
                    for xx in 0..*out_w {
                        let (x0, x1, fx) = bilinear_axis(xx, w, sx);
                        let go = g[[ch, y, xx]];
                        gx[[ch, y0, x0]] += go * (1.0 - fy) * (1.0 - fx);
                        gx[[ch, y0, x1]] += go * (1.0 - fy) * fx;
                        gx[[ch, y1, x0]] += go * fy * (1.0 - fx);
                        gx[[ch, y1, x1]] += go * fy * fx;
                    }
                }
            }
            tape.acc(grads, *x, gx.into_dyn());
        }
        other => unreachable!("conv backward on {other:?}"),
    }
}
