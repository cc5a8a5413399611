//! Reverse-mode differentiation over the handful of primitives the fusion
//! models need.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and the backward sweep is a single reverse pass.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::softmax_rows;
use crate::{Error, Result, Tensor2};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    /// Output value is the softmax itself; the mask only shapes the forward.
    Softmax(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    /// Mean squared error against a constant target.
    Mse(Var, Tensor2),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor2,
}

/// Single-writer recording of one forward computation.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every node on the tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
}

impl Gradients {
    /// Gradient for `var`; `None` if the loss does not depend on it.
    pub fn get(&self, var: Var) -> Option<&Tensor2> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Like [`get`](Self::get) but yields a zero tensor of the right shape.
    pub fn get_or_zeros(&self, tape: &Tape, var: Var) -> Tensor2 {
        self.get(var).cloned().unwrap_or_else(|| {
            let (r, c) = tape.value(var).shape();
            Tensor2::zeros(r, c)
        })
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

    pub fn value(&self, var: Var) -> &Tensor2 {
        &self.nodes[var.0].value
    }

    /// Indices of all leaves, in creation order.
    pub fn leaves(&self) -> impl Iterator<Item = Var> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.op, Op::Leaf))
            .map(|(i, _)| Var(i))
    }

    fn push(&mut self, op: Op, value: Tensor2) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor2) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul_t(self.value(b))?;
        Ok(self.push(Op::MatMulT(a, b), v))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let v = self.value(a).scale(factor);
        self.push(Op::Scale(a, factor), v)
    }

    /// Row softmax with an optional additive `0 / -inf` mask.
    pub fn softmax_rows(&mut self, a: Var, mask: Option<&Tensor2>) -> Result<Var> {
        let v = softmax_rows(self.value(a), mask)?;
        Ok(self.push(Op::Softmax(a), v))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).relu();
        self.push(Op::Relu(a), v)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor2> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Tensor2::concat_cols(&values)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), v))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value(a).slice_cols(start, end)?;
        Ok(self.push(Op::SliceCols(a, start), v))
    }

    /// Rows `start..end`; the `Split` of a concatenated sequence.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value(a).slice_rows(start, end)?;
        Ok(self.push(Op::SliceRows(a, start), v))
    }

    pub fn select_last_row(&mut self, a: Var) -> Result<Var> {
        let rows = self.value(a).rows();
        if rows == 0 {
            return Err(Error::Shape {
                op: "select_last_row",
                lhs: self.value(a).shape(),
                rhs: (1, 0),
            });
        }
        self.slice_rows(a, rows - 1, rows)
    }

    pub fn mse(&mut self, a: Var, target: &Tensor2) -> Result<Var> {
        let diff = self.value(a).sub(target)?;
        let n = diff.len().max(1) as f64;
        let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
        Ok(self.push(Op::Mse(a, target.clone()), Tensor2::filled(1, 1, loss)))
    }

    /// Back-propagates from a 1×1 loss node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let (rows, cols) = self.value(loss).shape();
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarLoss { rows, cols });
        }
        let mut grads: Vec<Option<Tensor2>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor2::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            // Interior gradients are consumed; only leaves keep theirs.
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let da = upstream.matmul_t(self.value(*b))?;
                    let db = self.value(*a).transpose().matmul(&upstream)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::MatMulT(a, b) => {
                    // out = a bᵀ: da = g b, db = gᵀ a
                    let da = upstream.matmul(self.value(*b))?;
                    let db = upstream.transpose().matmul(self.value(*a))?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, upstream.clone())?;
                    accumulate(&mut grads, *b, upstream)?;
                }
                Op::Scale(a, factor) => {
                    accumulate(&mut grads, *a, upstream.scale(*factor))?;
                }
                Op::Softmax(a) => {
                    let s = &node.value;
                    let mut dx = Tensor2::zeros(s.rows(), s.cols());
                    for r in 0..s.rows() {
                        let dot: f64 = s.row(r).iter().zip(upstream.row(r)).map(|(p, g)| p * g).sum();
                        for ((o, p), g) in dx.row_mut(r).iter_mut().zip(s.row(r)).zip(upstream.row(r)) {
                            *o = p * (g - dot);
                        }
                    }
                    accumulate(&mut grads, *a, dx)?;
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let mut dx = upstream;
                    for (g, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
                        if xv <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    accumulate(&mut grads, *a, dx)?;
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let width = self.value(p).cols();
                        accumulate(&mut grads, p, upstream.slice_cols(start, start + width)?)?;
                        start += width;
                    }
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut dx = Tensor2::zeros(src.rows(), src.cols());
                    for r in 0..upstream.rows() {
                        for c in 0..upstream.cols() {
                            dx[(r, start + c)] = upstream[(r, c)];
                        }
                    }
                    accumulate(&mut grads, *a, dx)?;
                }
                Op::SliceRows(a, start) => {
                    let src = self.value(*a);
                    let mut dx = Tensor2::zeros(src.rows(), src.cols());
                    for r in 0..upstream.rows() {
                        dx.row_mut(start + r).copy_from_slice(upstream.row(r));
                    }
                    accumulate(&mut grads, *a, dx)?;
                }
                Op::Mse(a, target) => {
                    let diff = self.value(*a).sub(target)?;
                    let n = diff.len().max(1) as f64;
                    let g = upstream[(0, 0)] * 2.0 / n;
                    accumulate(&mut grads, *a, diff.scale(g))?;
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor2>], var: Var, g: Tensor2) -> Result<()> {
    let slot = &mut grads[var.0];
    *slot = Some(match slot.take() {
        Some(existing) => existing.add(&g)?,
        None => g,
    });
    Ok(())
}
