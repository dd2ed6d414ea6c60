//! Reverse-mode differentiation over a linear tape of matrix operations.
//!
//! A forward pass records every intermediate on a [`Tape`]. Calling
//! [`Tape::backward`] on a scalar node walks the tape in reverse and
//! returns the gradient of that scalar with respect to every node that
//! depends on a parameter leaf.

use super::kernels;
use super::matrix::Matrix;
use super::param::ParamTensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param,
    Affine { x: Var, w: Var, b: Var },
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Scale(Var, f64),
    SoftmaxRows(Var),
    Relu(Var),
    SelectRow(Var, usize),
    SquaredError { pred: Var, target: Matrix },
    Sum(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Matrix,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

/// Gradients of a scalar with respect to the tape's nodes.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, or zeros of its shape when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Matrix {
        match self.get(v) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Matrix, needs_grad: bool) -> Var {
        self.backward_done = false;
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(Op::Input, m, false)
    }

    /// Trainable leaf bound to a parameter's current values.
    pub fn param(&mut self, p: &ParamTensor) -> Var {
        self.push(Op::Param, p.as_matrix(), true)
    }

    /// Trainable leaf from a raw matrix.
    pub fn param_matrix(&mut self, m: Matrix) -> Var {
        self.push(Op::Param, m, true)
    }

    /// `x·W + b`, with `b` a `1 × W.cols` row broadcast over rows of `x`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let value = kernels::affine(self.value(x), self.value(w), self.value(b))?;
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(Op::Affine { x, w, b }, value, ng))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::MatMul(a, b), value, ng))
    }

    /// `a·bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_t(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::MatMulT(a, b), value, ng))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|v| v * s);
        let ng = self.needs(a);
        self.push(Op::Scale(a, s), value, ng)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = kernels::softmax_rows(self.value(a));
        let ng = self.needs(a);
        self.push(Op::SoftmaxRows(a), value, ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = kernels::relu(self.value(a));
        let ng = self.needs(a);
        self.push(Op::Relu(a), value, ng)
    }

    /// Row `r` of `a` as a `1 × cols` matrix.
    pub fn select_row(&mut self, a: Var, r: usize) -> Result<Var> {
        let src = self.value(a);
        if r >= src.rows() {
            return Err(Error::dim("select_row", src.shape_str(), format!("row {r}")));
        }
        let value = Matrix::row_vector(src.row(r).to_vec());
        let ng = self.needs(a);
        Ok(self.push(Op::SelectRow(a, r), value, ng))
    }

    /// `softmax_rows(Q·Kᵀ/√d_k)·V`.
    pub fn scaled_dot_attention(&mut self, q: Var, k: Var, v: Var, d_k: usize) -> Result<Var> {
        let (qs, ks, vs) = (self.value(q).shape(), self.value(k).shape(), self.value(v).shape());
        if qs.1 != d_k || ks.1 != d_k {
            return Err(Error::dim(
                "scaled_dot_attention",
                format!("Q {}x{}, K {}x{}", qs.0, qs.1, ks.0, ks.1),
                format!("d_k = {d_k}"),
            ));
        }
        if ks.0 != vs.0 {
            return Err(Error::dim(
                "scaled_dot_attention",
                format!("K {}x{}", ks.0, ks.1),
                format!("V {}x{}", vs.0, vs.1),
            ));
        }
        let scores = self.matmul_t(q, k)?;
        let scaled = self.scale(scores, 1.0 / (d_k as f64).sqrt());
        let weights = self.softmax_rows(scaled);
        self.matmul(weights, v)
    }

    /// `Σ (pred − target)²` as a `1 × 1` node.
    pub fn squared_error(&mut self, pred: Var, target: &Matrix) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() {
            return Err(Error::dim("squared_error", p.shape_str(), target.shape_str()));
        }
        let sse: f64 = p.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        let ng = self.needs(pred);
        Ok(self.push(
            Op::SquaredError {
                pred,
                target: target.clone(),
            },
            Matrix::scalar(sse),
            ng,
        ))
    }

    /// Elementwise sum of same-shaped nodes.
    pub fn sum(&mut self, vars: &[Var]) -> Result<Var> {
        let first = vars
            .first()
            .ok_or_else(|| Error::Contract("sum of zero nodes".into()))?;
        let mut acc = self.value(*first).clone();
        for v in &vars[1..] {
            acc.add_assign(self.value(*v))?;
        }
        let ng = vars.iter().any(|v| self.needs(*v));
        Ok(self.push(Op::Sum(vars.to_vec()), acc, ng))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    ///
    /// Fails if `loss` is not `1 × 1`, or if backward already ran and no
    /// operation has been recorded since.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.backward_done {
            return Err(Error::State("backward called twice without a new forward pass".into()));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::State(format!("node {} is not on this tape", loss.0)));
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::dim("backward", self.value(loss).shape_str(), "1x1 scalar"));
        }
        self.backward_done = true;

        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                grads[idx] = Some(g);
                continue;
            }
            match &node.op {
                Op::Input | Op::Param => {}
                Op::Affine { x, w, b } => {
                    let (x, w, b) = (*x, *w, *b);
                    if self.needs(x) {
                        let dx = g.matmul_t(self.value(w))?;
                        accumulate(&mut grads, x, dx)?;
                    }
                    if self.needs(w) {
                        let dw = self.value(x).t_matmul(&g)?;
                        accumulate(&mut grads, w, dw)?;
                    }
                    if self.needs(b) {
                        let mut db = Matrix::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (d, v) in db.data_mut().iter_mut().zip(g.row(r)) {
                                *d += v;
                            }
                        }
                        accumulate(&mut grads, b, db)?;
                    }
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        let da = g.matmul_t(self.value(b))?;
                        accumulate(&mut grads, a, da)?;
                    }
                    if self.needs(b) {
                        let db = self.value(a).t_matmul(&g)?;
                        accumulate(&mut grads, b, db)?;
                    }
                }
                Op::MatMulT(a, b) => {
                    // C = A·Bᵀ ⇒ dA = G·B, dB = Gᵀ·A
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        let da = g.matmul(self.value(b))?;
                        accumulate(&mut grads, a, da)?;
                    }
                    if self.needs(b) {
                        let db = g.t_matmul(self.value(a))?;
                        accumulate(&mut grads, b, db)?;
                    }
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    accumulate(&mut grads, *a, g.map(|v| v * s))?;
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut da = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let inner: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for (d, (p, q)) in da.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                            *d = p * (q - inner);
                        }
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::Relu(a) => {
                    let a = *a;
                    let input = self.value(a);
                    let mut da = g.clone();
                    for (d, x) in da.data_mut().iter_mut().zip(input.data()) {
                        if *x <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, a, da)?;
                }
                Op::SelectRow(a, r) => {
                    let a = *a;
                    let (rows, cols) = self.value(a).shape();
                    let mut da = Matrix::zeros(rows, cols);
                    da.row_mut(*r).copy_from_slice(g.row(0));
                    accumulate(&mut grads, a, da)?;
                }
                Op::SquaredError { pred, target } => {
                    let scale = 2.0 * g.get(0, 0);
                    let p = self.value(*pred);
                    let data = p
                        .data()
                        .iter()
                        .zip(target.data())
                        .map(|(a, b)| scale * (a - b))
                        .collect();
                    let dp = Matrix::new(p.rows(), p.cols(), data)?;
                    accumulate(&mut grads, *pred, dp)?;
                }
                Op::Sum(vars) => {
                    for v in vars.clone() {
                        if self.needs(v) {
                            accumulate(&mut grads, v, g.clone())?;
                        }
                    }
                }
            }
            grads[idx] = Some(g);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        grads.resize(self.nodes.len(), None);
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) -> Result<()> {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}
