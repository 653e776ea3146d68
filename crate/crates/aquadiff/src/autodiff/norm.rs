//! Normalization ops: group normalization and the per-channel affine used to
//! inject timestep embeddings.

use ndarray::{Array1, Array3, ArrayD, Ix1, Ix3};

use super::tape::{Op, Tape, Var};

fn as3(v: &ArrayD<f64>) -> ndarray::ArrayView3<'_, f64> {
    v.view()
        .into_dimensionality::<Ix3>()
        .expect("rank-3 tensor expected")
}

fn as1(v: &ArrayD<f64>) -> ndarray::ArrayView1<'_, f64> {
    v.view()
        .into_dimensionality::<Ix1>()
        .expect("rank-1 tensor expected")
}

/// Per-group mean and reciprocal standard deviation.
fn group_stats(
    x: &ndarray::ArrayView3<'_, f64>,
    groups: usize,
    eps: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (c, h, w) = x.dim();
    let cg = c / groups;
    let m = (cg * h * w) as f64;
    let mut means = Vec::with_capacity(groups);
    let mut istds = Vec::with_capacity(groups);
    for g in 0..groups {
        let slab = x.slice(ndarray::s![g * cg..(g + 1) * cg, .., ..]);
        let mean = slab.sum() / m;
        let var = slab.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m;
        means.push(mean);
        istds.push(1.0 / (var + eps).sqrt());
    }
    (means, istds)
}

impl Tape {
    /// Group normalization over `[c, h, w]` with per-channel gain and bias.
    /// Channel count must be divisible by `groups`.
    pub fn group_norm(&mut self, x: Var, gain: Var, bias: Var, groups: usize, eps: f64) -> Var {
        let vx = as3(&self.values[x.0]);
        let (c, h, w) = vx.dim();
        assert!(groups >= 1 && c % groups == 0, "channels {c} not divisible by {groups} groups");
        assert_eq!(as1(&self.values[gain.0]).len(), c, "gain length mismatch");
        assert_eq!(as1(&self.values[bias.0]).len(), c, "bias length mismatch");
        let (means, istds) = group_stats(&vx, groups, eps);
        let vgain = as1(&self.values[gain.0]);
        let vbias = as1(&self.values[bias.0]);
        let cg = c / groups;
        let mut out = Array3::<f64>::zeros((c, h, w));
        for ch in 0..c {
            let g = ch / cg;
            let (mu, istd) = (means[g], istds[g]);
            let (gn, bs) = (vgain[ch], vbias[ch]);
            for y in 0..h {
                for xx in 0..w {
                    out[[ch, y, xx]] = gn * (vx[[ch, y, xx]] - mu) * istd + bs;
                }
            }
        }
        let needs = self.needs_any(&[x.0, gain.0, bias.0]);
        self.push(
            out.into_dyn(),
            Op::GroupNorm {
                x: x.0,
                gain: gain.0,
                bias: bias.0,
                groups,
                eps,
            },
            needs,
        )
    }

    /// Timestep conditioning: `y[c, :, :] = x[c, :, :] * (1 + scale[c]) + shift[c]`.
    pub fn channel_affine(&mut self, x: Var, scale: Var, shift: Var) -> Var {
        let vx = as3(&self.values[x.0]);
        let (c, h, w) = vx.dim();
        let vs = as1(&self.values[scale.0]);
        let vb = as1(&self.values[shift.0]);
        assert_eq!(vs.len(), c, "scale length mismatch");
        assert_eq!(vb.len(), c, "shift length mismatch");
        let mut out = Array3::<f64>::zeros((c, h, w));
        for ch in 0..c {
            let (s, b) = (1.0 + vs[ch], vb[ch]);
            for y in 0..h {
                for xx in 0..w {
                    out[[ch, y, xx]] = vx[[ch, y, xx]] * s + b;
                }
            }
        }
        let needs = self.needs_any(&[x.0, scale.0, shift.0]);
        self.push(
            out.into_dyn(),
            Op::ChannelAffine {
                x: x.0,
                scale: scale.0,
                shift: shift.0,
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
        Op::GroupNorm {
            x,
            gain,
            bias,
            groups,
            eps,
        } => {
            let vx = as3(&tape.values[*x]);
            let vgain = as1(&tape.values[*gain]);
            let g = as3(gout);
            let (c, h, w) = vx.dim();
            let cg = c / groups;
            let m = (cg * h * w) as f64;
            let (means, istds) = group_stats(&vx, *groups, *eps);

            if tape.needs[*gain] || tape.needs[*bias] {
                let mut ggain = Array1::<f64>::zeros(c);
                let mut gbias = Array1::<f64>::zeros(c);
                for ch in 0..c {
                    let grp = ch / cg;
                    let (mu, istd) = (means[grp], istds[grp]);
                    for y in 0..h {
                        for xx in 0..w {
                            let xhat = (vx[[ch, y, xx]] - mu) * istd;
                            ggain[ch] += g[[ch, y, xx]] * xhat;
                            gbias[ch] += g[[ch, y, xx]];
                        }
                    }
                }
                tape.acc(grads, *gain, ggain.into_dyn());
                tape.acc(grads, *bias, gbias.into_dyn());
            }

            if tape.needs[*x] {
                let mut gx = Array3::<f64>::zeros((c, h, w));
                for grp in 0..*groups {
                    let (mu, istd) = (means[grp], istds[grp]);
                    // dxhat = g * gain; dx = istd * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
                    let mut sum1 = 0.0;
                    let mut sum2 = 0.0;
                    for ch in grp * cg..(grp + 1) * cg {
                        for y in 0..h {
                            for xx in 0..w {
                                let dxhat = g[[ch, y, xx]] * vgain[ch];
                                let xhat = (vx[[ch, y, xx]] - mu) * istd;
                                sum1 += dxhat;
                                sum2 += dxhat * xhat;
                            }
                        }
                    }
                    let (mean1, mean2) = (sum1 / m, sum2 / m);
                    for ch in grp * cg..(grp + 1) * cg {
                        for y in 0..h {
                            for xx in 0..w {
                                let dxhat = g[[ch, y, xx]] * vgain[ch];
                                let xhat = (vx[[ch, y, xx]] - mu) * istd;
                                gx[[ch, y, xx]] = istd * (dxhat - mean1 - xhat * mean2);
                            }
                        }
                    }
                }
                tape.acc(grads, *x, gx.into_dyn());
            }
        }
        Op::ChannelAffine { x, scale, shift } => {
            let vx = as3(&tape.values[*x]);
            let vs = as1(&tape.values[*scale]);
            let g = as3(gout);
            let (c, h, w) = vx.dim();
            if tape.needs[*x] {
                let mut gx = Array3::<f64>::zeros((c, h, w));
                for ch in 0..c {
                    let s = 1.0 + vs[ch];
                    for y in 0..h {
                        for xx in 0..w {
                            gx[[ch, y, xx]] = g[[ch, y, xx]] * s;
                        }
                    }
                }
                tape.acc(grads, *x, gx.into_dyn());
            }
            if tape.needs[*scale] || tape.needs[*shift] {
                let mut gs = Array1::<f64>::zeros(c);
                let mut gb = Array1::<f64>::zeros(c);
                for ch in 0..c {
                    for y in 0..h {
                        for xx in 0..w {
                            gs[ch] += g[[ch, y, xx]] * vx[[ch, y, xx]];
                            gb[ch] += g[[ch, y, xx]];
                        }
                    }
                }
                tape.acc(grads, *scale, gs.into_dyn());
                tape.acc(grads, *shift, gb.into_dyn());
            }
        }
        other => unreachable!("norm backward on {other:?}"),
    }
}
