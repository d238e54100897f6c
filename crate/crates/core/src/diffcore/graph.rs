//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! The op set is closed: dense affine layers, scalar affine maps, tanh, GeLU,
//! broadcasting add/mul, elementwise power, reductions, Euclidean pairwise
//! distances and row-wise log-sum-exp. Every loss in the crate is expressed
//! with these, which keeps the finite-difference oracle tractable.

use super::{DiffError, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug)]
enum Broadcast {
    Same,
    Row,
    Col,
    Scalar,
}

impl Broadcast {
    fn resolve(lhs: (usize, usize), rhs: (usize, usize), op: &str) -> Result<Self, DiffError> {
        if lhs == rhs {
            Ok(Broadcast::Same)
        } else if rhs == (1, 1) {
            Ok(Broadcast::Scalar)
        } else if rhs.0 == 1 && rhs.1 == lhs.1 {
            Ok(Broadcast::Row)
        } else if rhs.1 == 1 && rhs.0 == lhs.0 {
            Ok(Broadcast::Col)
        } else {
            Err(DiffError::Shape(format!(
                "{op}: cannot broadcast {}x{} onto {}x{}",
                rhs.0, rhs.1, lhs.0, lhs.1
            )))
        }
    }

    #[inline]
    fn index(self, i: usize, j: usize, rhs_cols: usize) -> usize {
        match self {
            Broadcast::Same => i * rhs_cols + j,
            Broadcast::Row => j,
            Broadcast::Col => i,
            Broadcast::Scalar => 0,
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Dense { x: Var, w: Var, b: Var },
    ScaleShift { x: Var, scale: f64 },
    Add { a: Var, b: Var, bc: Broadcast },
    Mul { a: Var, b: Var, bc: Broadcast },
    Tanh(Var),
    Gelu(Var),
    Pow { x: Var, p: f64 },
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    PairwiseDist { a: Var, b: Var },
    LogSumExpRows(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`; zero-filled tensors are
    /// returned as `None` when `v` does not influence the root.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

/// GeLU, tanh approximation.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x)).tanh())
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x)
}

/// A single-use computation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Trainable input; gradients are tracked.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Fixed input; no gradient flows into it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// `x · wᵀ + b` with `x: n×in`, `w: out×in`, `b: 1×out`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var, DiffError> {
        let (n, inp) = self.shape(x);
        let (out, win) = self.shape(w);
        if inp != win {
            return Err(DiffError::Shape(format!(
                "dense: input has {inp} features but weight is {out}x{win}"
            )));
        }
        if self.shape(b) != (1, out) {
            let (br, bcn) = self.shape(b);
            return Err(DiffError::Shape(format!(
                "dense: bias is {br}x{bcn}, expected 1x{out}"
            )));
        }
        let xv = &self.nodes[x.0].value;
        let wv = &self.nodes[w.0].value;
        let bv = &self.nodes[b.0].value;
        let mut y = Tensor::zeros(n, out);
        for i in 0..n {
            let xi = xv.row_slice(i);
            let yi = y.row_slice_mut(i);
            for (o, yo) in yi.iter_mut().enumerate() {
                let wo = wv.row_slice(o);
                let mut acc = bv.data()[o];
                for k in 0..inp {
                    acc += xi[k] * wo[k];
                }
                *yo = acc;
            }
        }
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(y, Op::Dense { x, w, b }, ng))
    }

    /// `scale · x + shift`, elementwise.
    pub fn scale_shift(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let y = self.nodes[x.0].value.map(|v| scale * v + shift);
        let ng = self.needs(x);
        self.push(y, Op::ScaleShift { x, scale }, ng)
    }

    pub fn scale(&mut self, x: Var, scale: f64) -> Var {
        self.scale_shift(x, scale, 0.0)
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(Tensor, Broadcast), DiffError> {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let bc = Broadcast::resolve(av.shape(), bv.shape(), name)?;
        let bcols = bv.cols();
        let out = Tensor::from_fn(av.rows(), av.cols(), |i, j| {
            f(av.get(i, j), bv.data()[bc.index(i, j, bcols)])
        });
        Ok((out, bc))
    }

    /// `a + b`; `b` may be a row, column or scalar broadcast onto `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (y, bc) = self.binary(a, b, "add", |p, q| p + q)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(y, Op::Add { a, b, bc }, ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let nb = self.scale(b, -1.0);
        self.add(a, nb)
    }

    /// `a ⊙ b`; `b` may be a row, column or scalar broadcast onto `a`.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (y, bc) = self.binary(a, b, "mul", |p, q| p * q)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(y, Op::Mul { a, b, bc }, ng))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let y = self.nodes[x.0].value.map(f64::tanh);
        let ng = self.needs(x);
        self.push(y, Op::Tanh(x), ng)
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let y = self.nodes[x.0].value.map(gelu);
        let ng = self.needs(x);
        self.push(y, Op::Gelu(x), ng)
    }

    /// Elementwise `x^p`. Defined for `x > 0`, or any `x` when `p` is a
    /// non-negative integer.
    pub fn pow(&mut self, x: Var, p: f64) -> Var {
        let y = self.nodes[x.0].value.map(|v| powf(v, p));
        let ng = self.needs(x);
        self.push(y, Op::Pow { x, p }, ng)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.nodes[x.0].value.data().iter().sum();
        let ng = self.needs(x);
        self.push(Tensor::scalar(s), Op::Sum(x), ng)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = &self.nodes[x.0].value;
        let s: f64 = t.data().iter().sum::<f64>() / t.len().max(1) as f64;
        let ng = self.needs(x);
        self.push(Tensor::scalar(s), Op::Mean(x), ng)
    }

    /// Row sums, `n×m → n×1`.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let t = &self.nodes[x.0].value;
        let y = Tensor::from_fn(t.rows(), 1, |i, _| t.row_slice(i).iter().sum());
        let ng = self.needs(x);
        self.push(y, Op::SumRows(x), ng)
    }

    /// Euclidean distances between the rows of `a: n×d` and `b: m×d`.
    pub fn pairwise_dist(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        if av.cols() != bv.cols() {
            return Err(DiffError::Shape(format!(
                "pairwise_dist: {}x{} rows vs {}x{} rows",
                av.rows(),
                av.cols(),
                bv.rows(),
                bv.cols()
            )));
        }
        let y = Tensor::from_fn(av.rows(), bv.rows(), |i, j| {
            euclidean(av.row_slice(i), bv.row_slice(j))
        });
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(y, Op::PairwiseDist { a, b }, ng))
    }

    /// Numerically stable `log Σ_j exp(x_ij)`, `n×m → n×1`.
    pub fn log_sum_exp_rows(&mut self, x: Var) -> Var {
        let t = &self.nodes[x.0].value;
        let y = Tensor::from_fn(t.rows(), 1, |i, _| log_sum_exp(t.row_slice(i)));
        let ng = self.needs(x);
        self.push(y, Op::LogSumExpRows(x), ng)
    }

    /// Reverse sweep from a `1 × 1` root.
    pub fn backward(&self, root: Var) -> Result<Gradients, DiffError> {
        let shape = self.shape(root);
        if shape != (1, 1) {
            return Err(DiffError::NonScalarRoot(shape.0, shape.1));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Dense { x, w, b } => {
                    let xv = self.value(*x);
                    let wv = self.value(*w);
                    let (n, inp) = xv.shape();
                    let out = wv.rows();
                    if self.needs(*x) {
                        let mut dx = Tensor::zeros(n, inp);
                        for i in 0..n {
                            let gi = g.row_slice(i);
                            let dxi = dx.row_slice_mut(i);
                            for (o, &go) in gi.iter().enumerate() {
                                if go == 0.0 {
                                    continue;
                                }
                                let wo = wv.row_slice(o);
                                for k in 0..inp {
                                    dxi[k] += go * wo[k];
                                }
                            }
                        }
                        accumulate(&mut grads, *x, dx);
                    }
                    if self.needs(*w) {
                        let mut dw = Tensor::zeros(out, inp);
                        for i in 0..n {
                            let gi = g.row_slice(i);
                            let xi = xv.row_slice(i);
                            for (o, &go) in gi.iter().enumerate() {
                                if go == 0.0 {
                                    continue;
                                }
                                let dwo = dw.row_slice_mut(o);
                                for k in 0..inp {
                                    dwo[k] += go * xi[k];
                                }
                            }
                        }
                        accumulate(&mut grads, *w, dw);
                    }
                    if self.needs(*b) {
                        let db = Tensor::from_fn(1, out, |_, o| (0..n).map(|i| g.get(i, o)).sum());
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::ScaleShift { x, scale } => {
                    let s = *scale;
                    accumulate(&mut grads, *x, g.map(|v| v * s));
                }
                Op::Add { a, b, bc } => {
                    if self.needs(*b) {
                        let db = reduce_broadcast(&g, self.shape(*b), *bc, |i, j| g.get(i, j));
                        accumulate(&mut grads, *b, db);
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Mul { a, b, bc } => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let bcols = bv.cols();
                    if self.needs(*b) {
                        let db = reduce_broadcast(&g, bv.shape(), *bc, |i, j| {
                            g.get(i, j) * av.get(i, j)
                        });
                        accumulate(&mut grads, *b, db);
                    }
                    if self.needs(*a) {
                        let da = Tensor::from_fn(g.rows(), g.cols(), |i, j| {
                            g.get(i, j) * bv.data()[bc.index(i, j, bcols)]
                        });
                        accumulate(&mut grads, *a, da);
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    let dx = Tensor::from_fn(g.rows(), g.cols(), |i, j| {
                        let t = y.get(i, j);
                        g.get(i, j) * (1.0 - t * t)
                    });
                    accumulate(&mut grads, *x, dx);
                }
                Op::Gelu(x) => {
                    let xv = self.value(*x);
                    let dx = Tensor::from_fn(g.rows(), g.cols(), |i, j| {
                        g.get(i, j) * gelu_grad(xv.get(i, j))
                    });
                    accumulate(&mut grads, *x, dx);
                }
                Op::Pow { x, p } => {
                    let xv = self.value(*x);
                    let p = *p;
                    let dx = Tensor::from_fn(g.rows(), g.cols(), |i, j| {
                        let v = xv.get(i, j);
                        let d = if p == 0.0 { 0.0 } else { p * powf(v, p - 1.0) };
                        g.get(i, j) * d
                    });
                    accumulate(&mut grads, *x, dx);
                }
                Op::Sum(x) => {
                    let (r, c) = self.shape(*x);
                    accumulate(&mut grads, *x, Tensor::filled(r, c, g.item()));
                }
                Op::Mean(x) => {
                    let (r, c) = self.shape(*x);
                    let n = (r * c).max(1) as f64;
                    accumulate(&mut grads, *x, Tensor::filled(r, c, g.item() / n));
                }
                Op::SumRows(x) => {
                    let (r, c) = self.shape(*x);
                    accumulate(&mut grads, *x, Tensor::from_fn(r, c, |i, _| g.get(i, 0)));
                }
                Op::PairwiseDist { a, b } => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let d = &node.value;
                    let dim = av.cols();
                    let mut da = Tensor::zeros(av.rows(), dim);
                    let mut db = Tensor::zeros(bv.rows(), dim);
                    for i in 0..av.rows() {
                        let ai = av.row_slice(i);
                        for j in 0..bv.rows() {
                            let dij = d.get(i, j);
                            let gij = g.get(i, j);
                            // Subgradient 0 at coincident points.
                            if dij <= 0.0 || gij == 0.0 {
                                continue;
                            }
                            let bj = bv.row_slice(j);
                            let s = gij / dij;
                            for k in 0..dim {
                                let u = s * (ai[k] - bj[k]);
                                da.row_slice_mut(i)[k] += u;
                                db.row_slice_mut(j)[k] -= u;
                            }
                        }
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, da);
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::LogSumExpRows(x) => {
                    let xv = self.value(*x);
                    let y = &node.value;
                    let dx = Tensor::from_fn(xv.rows(), xv.cols(), |i, j| {
                        g.get(i, 0) * (xv.get(i, j) - y.get(i, 0)).exp()
                    });
                    accumulate(&mut grads, *x, dx);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn reduce_broadcast(
    g: &Tensor,
    shape: (usize, usize),
    bc: Broadcast,
    term: impl Fn(usize, usize) -> f64,
) -> Tensor {
    let mut out = Tensor::zeros(shape.0, shape.1);
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let k = bc.index(i, j, shape.1);
            out.data_mut()[k] += term(i, j);
        }
    }
    out
}

#[inline]
fn powf(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v * v
    } else if p.fract() == 0.0 && p.abs() < 64.0 {
        v.powi(p as i32)
    } else {
        v.powf(p)
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
