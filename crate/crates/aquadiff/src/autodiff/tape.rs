//! Core tape structure, elementwise/reduction ops, and the backward driver.

use ndarray::{ArrayD, IxDyn};

use super::{conv, matrix, norm, spectral};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Boundary handling for spatial convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PadMode {
    /// Pad with zeros.
    Zeros,
    /// Wrap around (periodic boundary); makes convolution shift-equivariant.
    Circular,
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    AddScalar(usize),
    Recip(usize),
    Abs(usize),
    Square(usize),
    Sqrt(usize),
    Silu(usize),
    Relu(usize),
    Sum(usize),
    Mean(usize),
    AddScaled(usize, usize, f64),
    Reshape(usize),
    Transpose2(usize),
    MatMul(usize, usize),
    SoftmaxRows(usize),
    SliceCols {
        x: usize,
        start: usize,
        len: usize,
    },
    ConcatCols(Vec<usize>),
    ConcatChannels(Vec<usize>),
    Conv2d {
        x: usize,
        w: usize,
        b: Option<usize>,
        stride: usize,
        pad: usize,
        mode: PadMode,
    },
    DepthwiseValid {
        x: usize,
        kernel: ArrayD<f64>,
    },
    GroupNorm {
        x: usize,
        gain: usize,
        bias: usize,
        groups: usize,
        eps: f64,
    },
    ChannelAffine {
        x: usize,
        scale: usize,
        shift: usize,
    },
    UpsampleNearest2(usize),
    ResizeBilinear {
        x: usize,
        out_h: usize,
        out_w: usize,
    },
    LinearVec {
        x: usize,
        w: usize,
        b: usize,
    },
    FftMagL1 {
        x: usize,
        target: ArrayD<f64>,
    },
}

/// Recording of a computation over `f64` tensors.
#[derive(Default)]
pub struct Tape {
    pub(crate) values: Vec<ArrayD<f64>>,
    pub(crate) ops: Vec<Op>,
    pub(crate) needs: Vec<bool>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Grads {
    inner: Vec<Option<ArrayD<f64>>>,
}

impl Grads {
    /// Gradient of the loss with respect to `v`, if it was tracked.
    pub fn get(&self, v: Var) -> Option<&ArrayD<f64>> {
        self.inner[v.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Registers an input tensor. Gradients are accumulated for it only when
    /// `requires_grad` is set.
    pub fn leaf(&mut self, value: ArrayD<f64>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Registers a constant (no gradient tracking).
    pub fn constant(&mut self, value: ArrayD<f64>) -> Var {
        self.leaf(value, false)
    }

    /// Registers a rank-0 constant.
    pub fn scalar(&mut self, value: f64) -> Var {
        let arr = ArrayD::from_elem(IxDyn(&[]), value);
        self.constant(arr)
    }

    /// Value currently stored at `v`.
    pub fn value(&self, v: Var) -> &ArrayD<f64> {
        &self.values[v.0]
    }

    /// Extracts a rank-0 node as a plain scalar.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let val = &self.values[v.0];
        assert!(
            val.ndim() == 0 || val.len() == 1,
            "scalar_value on non-scalar node of shape {:?}",
            val.shape()
        );
        *val.iter().next().expect("non-empty value")
    }

    pub(crate) fn push(&mut self, value: ArrayD<f64>, op: Op, needs: bool) -> Var {
        self.values.push(value);
        self.ops.push(op);
        self.needs.push(needs);
        Var(self.values.len() - 1)
    }

    pub(crate) fn needs_any(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.needs[i])
    }

    fn binary_elementwise(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        assert_eq!(
            va.shape(),
            vb.shape(),
            "elementwise op on mismatched shapes {:?} vs {:?}",
            va.shape(),
            vb.shape()
        );
        let mut out = va.clone();
        out.zip_mut_with(vb, |x, &y| *x = f(*x, y));
        let needs = self.needs_any(&[a.0, b.0]);
        self.push(out, op, needs)
    }

    fn unary_elementwise(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.values[a.0].mapv(f);
        let needs = self.needs[a.0];
        self.push(out, op, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, |x, y| x - y, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, |x, y| x * y, Op::Mul(a.0, b.0))
    }

    /// `a + c * b` in one node.
    pub fn add_scaled(&mut self, a: Var, b: Var, c: f64) -> Var {
        self.binary_elementwise(a, b, |x, y| x + c * y, Op::AddScaled(a.0, b.0, c))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary_elementwise(a, |x| -x, Op::Neg(a.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary_elementwise(a, |x| c * x, Op::Scale(a.0, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary_elementwise(a, |x| x + c, Op::AddScalar(a.0))
    }

    /// Elementwise reciprocal.
    pub fn recip(&mut self, a: Var) -> Var {
        self.unary_elementwise(a, |x| 1.0 / x, Op::Recip(a.0))
    }

    /// Elementwise absolute value. The subgradient at zero is taken as zero.
    pub fn abs(&mut self, a: Var) -> Var {
        self.unary_elementwise(a, f64::abs, Op::Abs(a.0))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary_elementwise(a, |x| x * x, Op::Square(a.0))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary_elementwise(a, f64::sqrt, Op::Sqrt(a.0))
    }

    /// SiLU activation `x * sigmoid(x)`.
    pub fn silu(&mut self, a: Var) -> Var {
        self.unary_elementwise(a, |x| x * sigmoid(x), Op::Silu(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary_elementwise(a, |x| x.max(0.0), Op::Relu(a.0))
    }

    /// Sum of all elements; returns a rank-0 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.values[a.0].sum();
        let needs = self.needs[a.0];
        self.push(ArrayD::from_elem(IxDyn(&[]), s), Op::Sum(a.0), needs)
    }

    /// Mean of all elements; returns a rank-0 node.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.values[a.0].len();
        assert!(n > 0, "mean of empty tensor");
        let s = self.values[a.0].sum() / n as f64;
        let needs = self.needs[a.0];
        self.push(ArrayD::from_elem(IxDyn(&[]), s), Op::Mean(a.0), needs)
    }

    /// Mean absolute difference `mean(|a - b|)`.
    pub fn mean_abs_diff(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        let d = self.abs(d);
        self.mean(d)
    }

    /// Mean squared difference `mean((a - b)^2)`.
    pub fn mean_sq_diff(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        let d = self.square(d);
        self.mean(d)
    }

    /// Reshapes to `shape`; element count must be preserved.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let v = &self.values[a.0];
        let count: usize = shape.iter().product();
        assert_eq!(
            v.len(),
            count,
            "reshape from {:?} to {:?} changes element count",
            v.shape(),
            shape
        );
        let out = v
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .expect("validated reshape");
        let needs = self.needs[a.0];
        self.push(out, Op::Reshape(a.0), needs)
    }

    /// Runs reverse-mode accumulation from the rank-0 node `loss`.
    pub fn backward(&self, loss: Var) -> Grads {
        let seed = &self.values[loss.0];
        assert!(
            seed.len() == 1,
            "backward seed must be scalar, got shape {:?}",
            seed.shape()
        );
        let mut grads: Vec<Option<ArrayD<f64>>> = vec![None; self.values.len()];
        grads[loss.0] = Some(ArrayD::from_elem(seed.raw_dim(), 1.0));
        for id in (0..=loss.0).rev() {
            if matches!(self.ops[id], Op::Leaf) {
                continue;
            }
            let Some(gout) = grads[id].take() else {
                continue;
            };
            self.dispatch(id, &gout, &mut grads);
        }
        Grads { inner: grads }
    }

    fn dispatch(&self, id: usize, gout: &ArrayD<f64>, grads: &mut Vec<Option<ArrayD<f64>>>) {
        match &self.ops[id] {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.acc(grads, *a, gout.clone());
                self.acc(grads, *b, gout.clone());
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, gout.clone());
                self.acc(grads, *b, gout.mapv(|g| -g));
            }
            Op::Mul(a, b) => {
                self.acc(grads, *a, gout * &self.values[*b]);
                self.acc(grads, *b, gout * &self.values[*a]);
            }
            Op::AddScaled(a, b, c) => {
                self.acc(grads, *a, gout.clone());
                self.acc(grads, *b, gout.mapv(|g| c * g));
            }
            Op::Neg(a) => self.acc(grads, *a, gout.mapv(|g| -g)),
            Op::Scale(a, c) => self.acc(grads, *a, gout.mapv(|g| c * g)),
            Op::AddScalar(a) => self.acc(grads, *a, gout.clone()),
            Op::Recip(a) => {
                let x = &self.values[*a];
                let mut g = gout.clone();
                g.zip_mut_with(x, |g, &x| *g *= -1.0 / (x * x));
                self.acc(grads, *a, g);
            }
            Op::Abs(a) => {
                let x = &self.values[*a];
                let mut g = gout.clone();
                g.zip_mut_with(x, |g, &x| {
                    *g *= if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                });
                self.acc(grads, *a, g);
            }
            Op::Square(a) => {
                let x = &self.values[*a];
                let mut g = gout.clone();
                g.zip_mut_with(x, |g, &x| *g *= 2.0 * x);
                self.acc(grads, *a, g);
            }
            Op::Sqrt(a) => {
                let y = &self.values[id];
                let mut g = gout.clone();
                g.zip_mut_with(y, |g, &y| *g *= 0.5 / y);
                self.acc(grads, *a, g);
            }
            Op::Silu(a) => {
                let x = &self.values[*a];
                let mut g = gout.clone();
                g.zip_mut_with(x, |g, &x| {
                    let s = sigmoid(x);
                    *g *= s * (1.0 + x * (1.0 - s));
                });
                self.acc(grads, *a, g);
            }
            Op::Relu(a) => {
                let x = &self.values[*a];
                let mut g = gout.clone();
                g.zip_mut_with(x, |g, &x| *g *= if x > 0.0 { 1.0 } else { 0.0 });
                self.acc(grads, *a, g);
            }
            Op::Sum(a) => {
                let g = *gout.iter().next().expect("scalar grad");
                self.acc(grads, *a, ArrayD::from_elem(self.values[*a].raw_dim(), g));
            }
            Op::Mean(a) => {
                let g = *gout.iter().next().expect("scalar grad");
                let n = self.values[*a].len() as f64;
                self.acc(grads, *a, ArrayD::from_elem(self.values[*a].raw_dim(), g / n));
            }
            Op::Reshape(a) => {
                let g = gout
                    .clone()
                    .into_shape_with_order(self.values[*a].raw_dim())
                    .expect("reshape grad");
                self.acc(grads, *a, g);
            }
            Op::Transpose2(_)
            | Op::MatMul(..)
            | Op::SoftmaxRows(_)
            | Op::SliceCols { .. }
            | Op::ConcatCols(_)
            | Op::LinearVec { .. } => matrix::backward(self, id, gout, grads),
            Op::ConcatChannels(_)
            | Op::Conv2d { .. }
            | Op::DepthwiseValid { .. }
            | Op::UpsampleNearest2(_)
            | Op::ResizeBilinear { .. } => conv::backward(self, id, gout, grads),
            Op::GroupNorm { .. } | Op::ChannelAffine { .. } => {
                norm::backward(self, id, gout, grads)
            }
            Op::FftMagL1 { .. } => spectral::backward(self, id, gout, grads),
        }
    }

    pub(crate) fn acc(
        &self,
        grads: &mut [Option<ArrayD<f64>>],
        idx: usize,
        contribution: ArrayD<f64>,
    ) {
        if !self.needs[idx] {
            return;
        }
        match &mut grads[idx] {
            Some(existing) => *existing += &contribution,
            slot @ None => *slot = Some(contribution),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
