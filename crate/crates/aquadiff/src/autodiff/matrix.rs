//! Matrix ops on the tape: transpose, matmul, row softmax, column
//! slicing/concatenation, and a dense layer on vectors. These are the
//! building blocks of the attention modules and the timestep MLP.

use ndarray::{Array2, ArrayD, Axis, Ix1, Ix2};

use super::tape::{Op, Tape, Var};

fn as2(v: &ArrayD<f64>) -> ndarray::ArrayView2<'_, f64> {
    v.view()
        .into_dimensionality::<Ix2>()
        .expect("rank-2 tensor expected")
}

impl Tape {
    /// Transpose of a rank-2 tensor.
    pub fn transpose2(&mut self, a: Var) -> Var {
        let out = as2(&self.values[a.0]).t().as_standard_layout().to_owned();
        let needs = self.needs[a.0];
        self.push(out.into_dyn(), Op::Transpose2(a.0), needs)
    }

    /// Matrix product of rank-2 tensors `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (as2(&self.values[a.0]), as2(&self.values[b.0]));
        assert_eq!(
            va.ncols(),
            vb.nrows(),
            "matmul inner dims differ: {:?} x {:?}",
            va.shape(),
            vb.shape()
        );
        let out = va.dot(&vb);
        let needs = self.needs_any(&[a.0, b.0]);
        self.push(out.into_dyn(), Op::MatMul(a.0, b.0), needs)
    }

    /// Numerically stable softmax along each row of a rank-2 tensor.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = as2(&self.values[a.0]);
        let mut out = v.to_owned();
        for mut row in out.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - max).exp());
            let sum: f64 = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        let needs = self.needs[a.0];
        self.push(out.into_dyn(), Op::SoftmaxRows(a.0), needs)
    }

    /// Columns `start..start + len` of a rank-2 tensor.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = as2(&self.values[a.0]);
        assert!(
            start + len <= v.ncols(),
            "column slice {}..{} out of range for {} columns",
            start,
            start + len,
            v.ncols()
        );
        let out = v
            .slice(ndarray::s![.., start..start + len])
            .as_standard_layout()
            .to_owned();
        let needs = self.needs[a.0];
        self.push(out.into_dyn(), Op::SliceCols { x: a.0, start, len }, needs)
    }

    /// Concatenates rank-2 tensors along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols of zero tensors");
        let views: Vec<_> = parts.iter().map(|p| as2(&self.values[p.0])).collect();
        let out = ndarray::concatenate(
            Axis(1),
            &views.iter().map(|v| v.view()).collect::<Vec<_>>(),
        )
        .expect("concat_cols shape mismatch");
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let needs = self.needs_any(&ids);
        self.push(
            out.as_standard_layout().to_owned().into_dyn(),
            Op::ConcatCols(ids),
            needs,
        )
    }

    /// Dense layer on a rank-1 input: `y = x W + b` with `W: [k, n]`.
    pub fn linear_vec(&mut self, x: Var, w: Var, b: Var) -> Var {
        let vx = self.values[x.0]
            .view()
            .into_dimensionality::<Ix1>()
            .expect("linear_vec input must be rank-1");
        let vw = as2(&self.values[w.0]);
        let vb = self.values[b.0]
            .view()
            .into_dimensionality::<Ix1>()
            .expect("linear_vec bias must be rank-1");
        assert_eq!(vx.len(), vw.nrows(), "linear_vec input/weight mismatch");
        assert_eq!(vw.ncols(), vb.len(), "linear_vec weight/bias mismatch");
        let out = vx.dot(&vw) + &vb;
        let needs = self.needs_any(&[x.0, w.0, b.0]);
        self.push(
            out.into_dyn(),
            Op::LinearVec {
                x: x.0,
                w: w.0,
                b: b.0,
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
        Op::Transpose2(a) => {
            let g = as2(gout).t().as_standard_layout().to_owned();
            tape.acc(grads, *a, g.into_dyn());
        }
        Op::MatMul(a, b) => {
            let g = as2(gout);
            let (va, vb) = (as2(&tape.values[*a]), as2(&tape.values[*b]));
            if tape.needs[*a] {
                tape.acc(grads, *a, g.dot(&vb.t()).into_dyn());
            }
            if tape.needs[*b] {
                tape.acc(grads, *b, va.t().dot(&g).into_dyn());
            }
        }
        Op::SoftmaxRows(a) => {
            let y = as2(&tape.values[id]);
            let g = as2(gout);
            let mut gx = Array2::<f64>::zeros(y.raw_dim());
            for (i, (yrow, grow)) in y.rows().into_iter().zip(g.rows()).enumerate() {
                let dot: f64 = yrow.iter().zip(grow.iter()).map(|(y, g)| y * g).sum();
                for (j, slot) in gx.row_mut(i).iter_mut().enumerate() {
                    *slot = yrow[j] * (grow[j] - dot);
                }
            }
            tape.acc(grads, *a, gx.into_dyn());
        }
        Op::SliceCols { x, start, len } => {
            let src = as2(&tape.values[*x]);
            let mut gx = Array2::<f64>::zeros(src.raw_dim());
            gx.slice_mut(ndarray::s![.., *start..*start + *len])
                .assign(&as2(gout));
            tape.acc(grads, *x, gx.into_dyn());
        }
        Op::ConcatCols(ids) => {
            let g = as2(gout);
            let mut offset = 0;
            for &pid in ids {
                let w = as2(&tape.values[pid]).ncols();
                let part = g
                    .slice(ndarray::s![.., offset..offset + w])
                    .as_standard_layout()
                    .to_owned();
                tape.acc(grads, pid, part.into_dyn());
                offset += w;
            }
        }
        Op::LinearVec { x, w, b } => {
            let g = gout
                .view()
                .into_dimensionality::<Ix1>()
                .expect("rank-1 grad");
            let vx = tape.values[*x]
                .view()
                .into_dimensionality::<Ix1>()
                .expect("rank-1 input");
            let vw = as2(&tape.values[*w]);
            if tape.needs[*x] {
                tape.acc(grads, *x, vw.dot(&g).into_dyn());
            }
            if tape.needs[*w] {
                let mut gw = Array2::<f64>::zeros(vw.raw_dim());
                for (i, &xi) in vx.iter().enumerate() {
                    for (j, &gj) in g.iter().enumerate() {
                        gw[[i, j]] = xi * gj;
                    }
                }
                tape.acc(grads, *w, gw.into_dyn());
            }
            if tape.needs[*b] {
                tape.acc(grads, *b, g.to_owned().into_dyn());
            }
        }
        other => unreachable!("matrix backward on {other:?}"),
    }
}
