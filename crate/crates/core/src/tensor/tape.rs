//! Define-by-run reverse-mode differentiation.
//!
//! Every operation appends a node holding its value, operand ids and the
//! information needed to push gradients back. A tape is rebuilt for each
//! training step; once recorded, `backward` walks nodes in decreasing id order.
//!
//! `relu'(0)` is taken as 0.

use super::array::{matmul_a_bt_into, matmul_at_b_into, matmul_into, Array};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Operation kinds that can be recorded.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// `[m,k] x [k,n] -> [m,n]` or `[m,k] x [k] -> [m]`.
    MatMul,
    /// Elementwise with scalar or trailing-row broadcast of the right operand
    /// (and scalar broadcast of the left).
    Add,
    Sub,
    Relu,
    Tanh,
    Scale(f64),
    /// Mean over all elements, giving a scalar.
    ReduceMean,
    /// Sum of squares of all elements, giving a scalar.
    SqNorm,
    /// Two-dimensional transpose.
    Transpose,
    /// Contiguous range of the flattened operand, reshaped.
    Slice {
        offset: usize,
        shape: Vec<usize>,
    },
    /// Rows of a 2-D operand, in the given order, repeats allowed.
    GatherRows(Vec<usize>),
    Reshape(Vec<usize>),
}

impl OpKind {
    fn arity(&self) -> usize {
        match self {
            OpKind::MatMul | OpKind::Add | OpKind::Sub => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Broadcast {
    Same,
    /// Right operand is a single value.
    RightScalar,
    /// Left operand is a single value.
    LeftScalar,
    /// Right operand is a vector matching the trailing dimension.
    RightRow,
}

#[derive(Debug)]
enum Record {
    Leaf,
    MatMul { lhs: Var, rhs: Var, m: usize, k: usize, n: usize },
    Add { lhs: Var, rhs: Var, bc: Broadcast },
    Sub { lhs: Var, rhs: Var, bc: Broadcast },
    Relu(Var),
    Tanh(Var),
    Scale(Var, f64),
    ReduceMean(Var),
    SqNorm(Var),
    Transpose { src: Var, rows: usize, cols: usize },
    Slice { src: Var, offset: usize },
    GatherRows { src: Var, idx: Vec<usize>, cols: usize },
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Array,
    record: Record,
}

/// Recording of a computation over [`Array`] values.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every node on a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array>>,
    shapes: Vec<Vec<usize>>,
    leaves: Vec<usize>,
}

impl Gradients {
    /// Gradient of the loss with respect to node `v`; exactly zero when `v`
    /// did not participate in the loss.
    pub fn get(&self, v: Var) -> Array {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Array::zeros(&self.shapes[v.0]),
        }
    }

    /// Takes ownership of a gradient, avoiding a copy for large parameters.
    pub fn take(&mut self, v: Var) -> Array {
        self.grads[v.0].take().unwrap_or_else(|| Array::zeros(&self.shapes[v.0]))
    }

    /// Leaf gradients keyed by leaf id.
    pub fn leaves(&self) -> impl Iterator<Item = (Var, Array)> + '_ {
        self.leaves.iter().map(|&i| (Var(i), self.get(Var(i))))
    }
}

fn broadcast(op: &str, a: &Array, b: &Array) -> Result<Broadcast> {
    if a.shape() == b.shape() {
        Ok(Broadcast::Same)
    } else if b.is_scalar() {
        Ok(Broadcast::RightScalar)
    } else if a.is_scalar() {
        Ok(Broadcast::LeftScalar)
    } else if b.shape().len() == 1 && a.shape().len() >= 2 && a.cols() == b.len() {
        Ok(Broadcast::RightRow)
    } else {
        Err(Error::shape(format!("{op}: incompatible shapes {:?} and {:?}", a.shape(), b.shape())))
    }
}

fn elementwise(a: &Array, b: &Array, bc: Broadcast, f: impl Fn(f64, f64) -> f64) -> Array {
    match bc {
        Broadcast::Same => {
            let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
            Array::new(a.shape().to_vec(), data).unwrap()
        }
        Broadcast::RightScalar => {
            let y = b.item();
            a.map(|x| f(x, y))
        }
        Broadcast::LeftScalar => {
            let x = a.item();
            b.map(|y| f(x, y))
        }
        Broadcast::RightRow => {
            let c = b.len();
            let data = a.data().iter().enumerate().map(|(i, &x)| f(x, b.data()[i % c])).collect();
            Array::new(a.shape().to_vec(), data).unwrap()
        }
    }
}

/// Reduce an upstream gradient to the shape of an operand that was broadcast.
fn reduce_to(g: &Array, bc: Broadcast, left: bool, operand_shape: &[usize]) -> Array {
    let broadcasted = !matches!(
        (bc, left),
        (Broadcast::Same, _)
            | (Broadcast::RightScalar, true)
            | (Broadcast::LeftScalar, false)
            | (Broadcast::RightRow, true)
    );
    if !broadcasted {
        return g.clone();
    }
    match bc {
        Broadcast::RightScalar | Broadcast::LeftScalar => {
            Array::new(operand_shape.to_vec(), vec![g.data().iter().sum()]).unwrap()
        }
        Broadcast::RightRow => {
            let c = operand_shape[0];
            let mut out = vec![0.0; c];
            for (i, v) in g.data().iter().enumerate() {
                out[i % c] += v;
            }
            Array::new(operand_shape.to_vec(), out).unwrap()
        }
        Broadcast::Same => unreachable!(),
    }
}

fn accumulate(slot: &mut Option<Array>, delta: Array) {
    match slot {
        Some(g) => {
            for (a, b) in g.data_mut().iter_mut().zip(delta.data()) {
                *a += b;
            }
        }
        None => *slot = Some(delta),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input value. Leaves are what gradients are reported for.
    pub fn leaf(&mut self, value: Array) -> Var {
        self.push(value, Record::Leaf)
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Array, record: Record) -> Var {
        self.nodes.push(Node { value, record });
        Var(self.nodes.len() - 1)
    }

    /// Applies `kind` to `operands`, recording the result.
    pub fn apply(&mut self, kind: OpKind, operands: &[Var]) -> Result<Var> {
        if operands.len() != kind.arity() {
            return Err(Error::shape(format!("{kind:?} takes {} operands, got {}", kind.arity(), operands.len())));
        }
        for &v in operands {
            if v.0 >= self.nodes.len() {
                return Err(Error::shape(format!("unknown node {}", v.0)));
            }
            if !self.nodes[v.0].value.is_finite() {
                return Err(Error::NonFinite(format!("{kind:?} operand node {}", v.0)));
            }
        }
        let (value, record) = match kind {
            OpKind::MatMul => {
                let (a, b) = (self.value(operands[0]), self.value(operands[1]));
                if a.shape().len() != 2 || b.shape().len() > 2 || a.shape()[1] != b.shape()[0] {
                    return Err(Error::shape(format!("matmul: {:?} x {:?}", a.shape(), b.shape())));
                }
                let (m, k) = (a.shape()[0], a.shape()[1]);
                let n = if b.shape().len() == 2 { b.shape()[1] } else { 1 };
                let mut out = vec![0.0; m * n];
                matmul_into(a.data(), b.data(), &mut out, m, k, n);
                let shape = if b.shape().len() == 2 { vec![m, n] } else { vec![m] };
                (Array::new(shape, out)?, Record::MatMul { lhs: operands[0], rhs: operands[1], m, k, n })
            }
            OpKind::Add | OpKind::Sub => {
                let (a, b) = (self.value(operands[0]), self.value(operands[1]));
                let add = kind == OpKind::Add;
                let bc = broadcast(if add { "add" } else { "sub" }, a, b)?;
                let (lhs, rhs) = (operands[0], operands[1]);
                if add {
                    (elementwise(a, b, bc, |x, y| x + y), Record::Add { lhs, rhs, bc })
                } else {
                    (elementwise(a, b, bc, |x, y| x - y), Record::Sub { lhs, rhs, bc })
                }
            }
            OpKind::Relu => {
                let v = self.value(operands[0]).map(|x| if x > 0.0 { x } else { 0.0 });
                (v, Record::Relu(operands[0]))
            }
            OpKind::Tanh => (self.value(operands[0]).map(f64::tanh), Record::Tanh(operands[0])),
            OpKind::Scale(c) => {
                if !c.is_finite() {
                    return Err(Error::NonFinite(format!("scale factor {c}")));
                }
                (self.value(operands[0]).map(|x| x * c), Record::Scale(operands[0], c))
            }
            OpKind::ReduceMean => {
                let a = self.value(operands[0]);
                let mean = a.data().iter().sum::<f64>() / a.len() as f64;
                (Array::scalar(mean), Record::ReduceMean(operands[0]))
            }
            OpKind::SqNorm => {
                let a = self.value(operands[0]);
                let s = a.data().iter().map(|x| x * x).sum();
                (Array::scalar(s), Record::SqNorm(operands[0]))
            }
            OpKind::Transpose => {
                let a = self.value(operands[0]);
                if a.shape().len() != 2 {
                    return Err(Error::shape(format!("transpose of {:?}", a.shape())));
                }
                let (r, c) = (a.shape()[0], a.shape()[1]);
                let mut out = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        out[j * r + i] = a.data()[i * c + j];
                    }
                }
                (Array::new(vec![c, r], out)?, Record::Transpose { src: operands[0], rows: r, cols: c })
            }
            OpKind::Slice { offset, shape } => {
                let a = self.value(operands[0]);
                let n: usize = shape.iter().product();
                if offset + n > a.len() {
                    return Err(Error::shape(format!("slice [{offset}, {}) of {} values", offset + n, a.len())));
                }
                let v = Array::new(shape, a.data()[offset..offset + n].to_vec())?;
                (v, Record::Slice { src: operands[0], offset })
            }
            OpKind::GatherRows(idx) => {
                let a = self.value(operands[0]);
                if a.shape().len() != 2 {
                    return Err(Error::shape(format!("gather_rows of {:?}", a.shape())));
                }
                if idx.is_empty() {
                    return Err(Error::shape("gather_rows with no indices"));
                }
                let (r, c) = (a.shape()[0], a.shape()[1]);
                let mut out = Vec::with_capacity(idx.len() * c);
                for &i in &idx {
                    if i >= r {
                        return Err(Error::shape(format!("row {i} of {r}")));
                    }
                    out.extend_from_slice(a.row(i));
                }
                let v = Array::new(vec![idx.len(), c], out)?;
                (v, Record::GatherRows { src: operands[0], idx, cols: c })
            }
            OpKind::Reshape(shape) => {
                let v = self.value(operands[0]).clone().reshaped(shape)?;
                (v, Record::Reshape(operands[0]))
            }
        };
        if !value.is_finite() {
            return Err(Error::NonFinite("operation produced a non-finite value".into()));
        }
        Ok(self.push(value, record))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Sub, &[a, b])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Relu, &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Tanh, &[a])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.apply(OpKind::Scale(c), &[a])
    }

    pub fn reduce_mean(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::ReduceMean, &[a])
    }

    pub fn sq_norm(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::SqNorm, &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Transpose, &[a])
    }

    pub fn slice(&mut self, a: Var, offset: usize, shape: Vec<usize>) -> Result<Var> {
        self.apply(OpKind::Slice { offset, shape }, &[a])
    }

    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Result<Var> {
        self.apply(OpKind::GatherRows(idx), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        self.apply(OpKind::Reshape(shape), &[a])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::shape(format!("loss must be scalar, got {:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Array>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array::new(lv.shape().to_vec(), vec![1.0])?);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.record {
                Record::Leaf => {}
                Record::MatMul { lhs, rhs, m, k, n } => {
                    let (a, b) = (self.value(*lhs), self.value(*rhs));
                    let mut da = vec![0.0; m * k];
                    matmul_a_bt_into(g.data(), b.data(), &mut da, *m, *k, *n);
                    let mut db = vec![0.0; k * n];
                    matmul_at_b_into(a.data(), g.data(), &mut db, *m, *k, *n);
                    accumulate(&mut grads[lhs.0], Array::new(a.shape().to_vec(), da)?);
                    accumulate(&mut grads[rhs.0], Array::new(b.shape().to_vec(), db)?);
                }
                Record::Add { lhs, rhs, bc } => {
                    let ga = reduce_to(&g, *bc, true, self.value(*lhs).shape());
                    let gb = reduce_to(&g, *bc, false, self.value(*rhs).shape());
                    accumulate(&mut grads[lhs.0], ga);
                    accumulate(&mut grads[rhs.0], gb);
                }
                Record::Sub { lhs, rhs, bc } => {
                    let ga = reduce_to(&g, *bc, true, self.value(*lhs).shape());
                    let gb = reduce_to(&g, *bc, false, self.value(*rhs).shape()).map(|x| -x);
                    accumulate(&mut grads[lhs.0], ga);
                    accumulate(&mut grads[rhs.0], gb);
                }
                Record::Relu(src) => {
                    let x = self.value(*src);
                    let data = g.data().iter().zip(x.data()).map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 });
                    let d = Array::new(x.shape().to_vec(), data.collect())?;
                    accumulate(&mut grads[src.0], d);
                }
                Record::Tanh(src) => {
                    let y = &node.value;
                    let data = g.data().iter().zip(y.data()).map(|(&gv, &yv)| gv * (1.0 - yv * yv));
                    let d = Array::new(y.shape().to_vec(), data.collect())?;
                    accumulate(&mut grads[src.0], d);
                }
                Record::Scale(src, c) => {
                    accumulate(&mut grads[src.0], g.map(|x| x * c));
                }
                Record::ReduceMean(src) => {
                    let x = self.value(*src);
                    let v = g.item() / x.len() as f64;
                    accumulate(&mut grads[src.0], Array::new(x.shape().to_vec(), vec![v; x.len()])?);
                }
                Record::SqNorm(src) => {
                    let gv = g.item();
                    accumulate(&mut grads[src.0], self.value(*src).map(|x| 2.0 * x * gv));
                }
                Record::Transpose { src, rows, cols } => {
                    // g is [cols, rows]
                    let mut d = vec![0.0; rows * cols];
                    for j in 0..*cols {
                        for i in 0..*rows {
                            d[i * cols + j] = g.data()[j * rows + i];
                        }
                    }
                    accumulate(&mut grads[src.0], Array::new(vec![*rows, *cols], d)?);
                }
                Record::Slice { src, offset } => {
                    let x = self.value(*src);
                    let slot = &mut grads[src.0];
                    if slot.is_none() {
                        *slot = Some(Array::zeros(x.shape()));
                    }
                    let dst = slot.as_mut().unwrap().data_mut();
                    for (d, v) in dst[*offset..*offset + g.len()].iter_mut().zip(g.data()) {
                        *d += v;
                    }
                }
                Record::GatherRows { src, idx, cols } => {
                    let x = self.value(*src);
                    let mut d = vec![0.0; x.len()];
                    for (r, &i) in idx.iter().enumerate() {
                        let from = &g.data()[r * cols..(r + 1) * cols];
                        for (o, v) in d[i * cols..(i + 1) * cols].iter_mut().zip(from) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads[src.0], Array::new(x.shape().to_vec(), d)?);
                }
                Record::Reshape(src) => {
                    let shape = self.value(*src).shape().to_vec();
                    accumulate(&mut grads[src.0], g.clone().reshaped(shape)?);
                }
            }
            grads[id] = Some(g);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        let leaves =
            self.nodes.iter().enumerate().filter(|(_, n)| matches!(n.record, Record::Leaf)).map(|(i, _)| i).collect();
        Ok(Gradients { grads, shapes, leaves })
    }
}
