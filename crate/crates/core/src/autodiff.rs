//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! The tape records the forward computation as a flat list of nodes. Each node
//! only refers to earlier nodes, so a single reverse sweep in index order
//! accumulates all adjoints.

use crate::error::{Error, Result};
use crate::tensor::{Matrix, SparseMatrix};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    /// Position on the tape; indexes the adjoint list returned by
    /// [`Tape::backward`].
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<'a> {
    Input,
    /// Input that never receives an adjoint.
    Constant,
    MatMul(Var, Var),
    /// Left multiplication by a constant sparse operator.
    Propagate(&'a SparseMatrix, Var),
    /// Adds a `1 x cols` row vector to every row.
    AddBias(Var, Var),
    Relu(Var),
}

#[derive(Debug)]
struct Node<'a> {
    value: Matrix,
    op: Op<'a>,
    /// Whether any `Input` feeds this node.
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Matrix, op: Op<'a>) -> Var {
        let needs_grad = match op {
            Op::Input => true,
            Op::Constant => false,
            Op::MatMul(a, b) | Op::AddBias(a, b) => self.needs(a) || self.needs(b),
            Op::Propagate(_, x) | Op::Relu(x) => self.needs(x),
        };
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Input)
    }

    /// Records a value that is not differentiated (its adjoint stays `None`).
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn propagate(&mut self, op: &'a SparseMatrix, x: Var) -> Result<Var> {
        let value = op.matmul(self.value(x))?;
        Ok(self.push(value, Op::Propagate(op, x)))
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let b = self.value(bias);
        let xv = self.value(x);
        if b.rows() != 1 || b.cols() != xv.cols() {
            return Err(Error::Shape(format!(
                "bias {}x{} does not broadcast over {}x{}",
                b.rows(),
                b.cols(),
                xv.rows(),
                xv.cols()
            )));
        }
        let mut value = xv.clone();
        let bias_row = b.row(0).to_vec();
        for r in 0..value.rows() {
            for (v, bb) in value.row_mut(r).iter_mut().zip(&bias_row) {
                *v += bb;
            }
        }
        Ok(self.push(value, Op::AddBias(x, bias)))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Relu(x))
    }

    /// Back-propagates `seed` (the adjoint of `output`) through the tape and
    /// returns the adjoint of every recorded node; constants and nodes that do
    /// not influence `output` get `None`.
    pub fn backward(&self, output: Var, seed: Matrix) -> Result<Vec<Option<Matrix>>> {
        let out = self.value(output);
        if out.rows() != seed.rows() || out.cols() != seed.cols() {
            return Err(Error::Shape("seed adjoint does not match output".into()));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed);

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match self.nodes[i].op {
                Op::Input | Op::Constant => {}
                Op::MatMul(a, b) => {
                    if self.needs(a) {
                        let ga = g.matmul_t(self.value(b))?;
                        accumulate(&mut grads, a, ga)?;
                    }
                    if self.needs(b) {
                        let gb = self.value(a).t_matmul(&g)?;
                        accumulate(&mut grads, b, gb)?;
                    }
                }
                Op::Propagate(op, x) => {
                    if self.needs(x) {
                        let gx = op.t_matmul(&g)?;
                        accumulate(&mut grads, x, gx)?;
                    }
                }
                Op::AddBias(x, bias) => {
                    if self.needs(bias) {
                        let gb = Matrix::from_vec(1, g.cols(), g.column_sums())?;
                        accumulate(&mut grads, bias, gb)?;
                    }
                    if self.needs(x) {
                        accumulate(&mut grads, x, g.clone())?;
                    }
                }
                Op::Relu(x) if self.needs(x) => {
                    let mut gx = g.clone();
                    for (d, &y) in gx.data_mut().iter_mut().zip(self.nodes[i].value.data()) {
                        if y <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, x, gx)?;
                }
                Op::Relu(_) => {}
            }
            grads[i] = Some(g);
        }
        Ok(grads)
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) -> Result<()> {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Row-wise softmax, shifted by the row max for stability.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy over `nodes`, with its adjoint with respect to
/// the full logits matrix (rows outside `nodes` get zero).
pub fn softmax_cross_entropy(
    logits: &Matrix,
    labels: &[usize],
    nodes: &[usize],
) -> Result<(f64, Matrix)> {
    if nodes.is_empty() {
        return Err(Error::EmptyMask("loss over zero nodes".into()));
    }
    if labels.len() != logits.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    let classes = logits.cols();
    let scale = 1.0 / nodes.len() as f64;
    let mut grad = Matrix::zeros(logits.rows(), classes);
    let mut loss = 0.0;
    for &v in nodes {
        let y = labels[v];
        if y >= classes {
            return Err(Error::Shape(format!("label {y} outside {classes} classes")));
        }
        let row = logits.row(v);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        loss += log_z - row[y];
        let g = grad.row_mut(v);
        for (j, gj) in g.iter_mut().enumerate() {
            let p = (row[j] - log_z).exp();
            *gj += scale * (p - if j == y { 1.0 } else { 0.0 });
        }
    }
    Ok((loss * scale, grad))
}
