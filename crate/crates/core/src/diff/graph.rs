use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{Real, Shape, Tensor};
use crate::error::{Error, Result};
use crate::math;

/// Handle to a node of one [`Graph`]. Handles from another graph are
/// meaningless and may panic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Sigmoid,
    Tanh,
    Softplus,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatVec(NodeId, NodeId),
    Binary(Binary, NodeId, NodeId),
    Unary(Unary, NodeId),
    Scale(NodeId, T),
    Euclidean(NodeId, NodeId),
    MeanPool(Vec<NodeId>),
    Sum(Vec<NodeId>),
    /// Selected operand of a min/max reduction over scalars.
    Select(Vec<NodeId>, usize),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    grad: Vec<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Dynamically built computation graph.
#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf: gradients are accumulated for it.
    pub fn param(&mut self, value: Tensor<T>) -> Result<NodeId> {
        self.leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Result<NodeId> {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite("leaf"));
        }
        Ok(self.push_unchecked(value, Op::Leaf, requires_grad))
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    /// Scalar value of a node (first element for non-scalars).
    pub fn item(&self, id: NodeId) -> T {
        self.nodes[id.0].value.item()
    }

    /// Accumulated gradient of the last backward root w.r.t. `id`.
    pub fn grad(&self, id: NodeId) -> &[T] {
        &self.nodes[id.0].grad
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    fn push_unchecked(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> NodeId {
        let grad = vec![T::zero(); value.len()];
        self.nodes.push(Node {
            value,
            grad,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push(
        &mut self,
        name: &'static str,
        value: Tensor<T>,
        op: Op<T>,
        parents: &[NodeId],
    ) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        Ok(self.push_unchecked(value, op, requires_grad))
    }

    fn shape(&self, id: NodeId) -> Shape {
        self.nodes[id.0].value.shape()
    }

    fn data(&self, id: NodeId) -> &[T] {
        self.nodes[id.0].value.as_slice()
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let Shape::Vector(_) = self.shape(x) else {
            return Err(Error::dim(
                "matvec",
                format!("right operand has shape {:?}", self.shape(x)),
            ));
        };
        let out = self.value(w).matvec(self.data(x))?;
        self.push("matvec", Tensor::vector(out), Op::MatVec(w, x), &[w, x])
    }

    pub fn binary(&mut self, kind: Binary, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::dim(
                "elementwise",
                format!("{kind:?} of {sa:?} and {sb:?}"),
            ));
        }
        let f = match kind {
            Binary::Add => |x: T, y: T| x + y,
            Binary::Sub => |x: T, y: T| x - y,
            Binary::Mul => |x: T, y: T| x * y,
        };
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        self.push(
            "elementwise",
            Tensor::new(sa, data)?,
            Op::Binary(kind, a, b),
            &[a, b],
        )
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn unary(&mut self, kind: Unary, x: NodeId) -> Result<NodeId> {
        let f: fn(T) -> T = match kind {
            Unary::Sigmoid => math::sigmoid,
            Unary::Tanh => |v: T| v.tanh(),
            Unary::Softplus => math::softplus,
            Unary::Relu => |v: T| if v > T::zero() { v } else { T::zero() },
        };
        let data = self.data(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x);
        self.push(
            "elementwise",
            Tensor::new(shape, data)?,
            Op::Unary(kind, x),
            &[x],
        )
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(Unary::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(Unary::Tanh, x)
    }

    pub fn softplus(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(Unary::Softplus, x)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(Unary::Relu, x)
    }

    pub fn scale(&mut self, x: NodeId, factor: T) -> Result<NodeId> {
        let data = self.data(x).iter().map(|&v| v * factor).collect();
        let shape = self.shape(x);
        self.push(
            "scale",
            Tensor::new(shape, data)?,
            Op::Scale(x, factor),
            &[x],
        )
    }

    /// `‖a − b‖₂`. The gradient at `a == b` is zero.
    pub fn euclidean(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::dim("euclidean", format!("{sa:?} vs {sb:?}")));
        }
        let mut acc = T::zero();
        for (&x, &y) in self.data(a).iter().zip(self.data(b)) {
            acc = acc + (x - y) * (x - y);
        }
        self.push(
            "euclidean",
            Tensor::scalar(acc.sqrt()),
            Op::Euclidean(a, b),
            &[a, b],
        )
    }

    /// Elementwise mean, summed sequentially in the given order.
    pub fn mean_pool(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let data = self.sum_values("mean_pool", xs)?;
        let n = T::from_f64(xs.len() as f64);
        let shape = self.shape(xs[0]);
        let data = data.into_iter().map(|v| v / n).collect();
        self.push(
            "mean_pool",
            Tensor::new(shape, data)?,
            Op::MeanPool(xs.to_vec()),
            xs,
        )
    }

    /// Elementwise sum, accumulated sequentially in the given order.
    pub fn sum(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let data = self.sum_values("sum", xs)?;
        let shape = self.shape(xs[0]);
        self.push("sum", Tensor::new(shape, data)?, Op::Sum(xs.to_vec()), xs)
    }

    fn sum_values(&self, op: &'static str, xs: &[NodeId]) -> Result<Vec<T>> {
        let Some(&first) = xs.first() else {
            return Err(Error::arg(op, "empty operand list"));
        };
        let shape = self.shape(first);
        let mut acc = vec![T::zero(); shape.numel()];
        for &x in xs {
            if self.shape(x) != shape {
                return Err(Error::dim(op, format!("{shape:?} vs {:?}", self.shape(x))));
            }
            for (a, &v) in acc.iter_mut().zip(self.data(x)) {
                *a = *a + v;
            }
        }
        Ok(acc)
    }

    /// Smallest of a list of scalars; the gradient flows to the first minimiser.
    pub fn min(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        self.select("min", xs, |candidate, best| candidate < best)
    }

    /// Largest of a list of scalars; the gradient flows to the first maximiser.
    pub fn max(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        self.select("max", xs, |candidate, best| candidate > best)
    }

    fn select(
        &mut self,
        op: &'static str,
        xs: &[NodeId],
        better: fn(T, T) -> bool,
    ) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::arg(op, "empty operand list"));
        }
        let mut best = 0;
        for (i, &x) in xs.iter().enumerate() {
            if self.shape(x) != Shape::Scalar {
                return Err(Error::dim(
                    op,
                    format!("operand {i} has shape {:?}", self.shape(x)),
                ));
            }
            if better(self.item(x), self.item(xs[best])) {
                best = i;
            }
        }
        let value = Tensor::scalar(self.item(xs[best]));
        self.push(op, value, Op::Select(xs.to_vec(), best), xs)
    }

    /// Accumulates `d root / d node` into every node reachable from `root`.
    ///
    /// Repeated calls add to the stored gradients; use [`Graph::zero_grad`]
    /// to reset.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if self.shape(root) != Shape::Scalar {
            return Err(Error::arg(
                "backward",
                format!("root has shape {:?}, expected a scalar", self.shape(root)),
            ));
        }
        let mut work: Vec<Option<Vec<T>>> = vec![None; root.0 + 1];
        work[root.0] = Some(vec![T::one()]);

        for i in (0..=root.0).rev() {
            let Some(g) = work[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut work);
            for (acc, v) in self.nodes[i].grad.iter_mut().zip(&g) {
                *acc = *acc + *v;
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], work: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatVec(w, x) => {
                let Shape::Matrix(rows, cols) = self.shape(*w) else {
                    unreachable!()
                };
                let wd = self.data(*w);
                let xd = self.data(*x);
                if self.nodes[w.0].requires_grad {
                    let gw = slot(work, *w, rows * cols);
                    for r in 0..rows {
                        let gr = g[r];
                        let row = &mut gw[r * cols..(r + 1) * cols];
                        for (o, &xv) in row.iter_mut().zip(xd) {
                            *o = *o + gr * xv;
                        }
                    }
                }
                if self.nodes[x.0].requires_grad {
                    let gx = slot(work, *x, cols);
                    for r in 0..rows {
                        let gr = g[r];
                        let row = &wd[r * cols..(r + 1) * cols];
                        for (o, &wv) in gx.iter_mut().zip(row) {
                            *o = *o + gr * wv;
                        }
                    }
                }
            }
            Op::Binary(kind, a, b) => {
                let n = g.len();
                let (ad, bd) = (self.data(*a), self.data(*b));
                if self.nodes[a.0].requires_grad {
                    let ga = slot(work, *a, n);
                    for k in 0..n {
                        let d = match kind {
                            Binary::Add | Binary::Sub => g[k],
                            Binary::Mul => g[k] * bd[k],
                        };
                        ga[k] = ga[k] + d;
                    }
                }
                if self.nodes[b.0].requires_grad {
                    let gb = slot(work, *b, n);
                    for k in 0..n {
                        let d = match kind {
                            Binary::Add => g[k],
                            Binary::Sub => -g[k],
                            Binary::Mul => g[k] * ad[k],
                        };
                        gb[k] = gb[k] + d;
                    }
                }
            }
            Op::Unary(kind, x) => {
                let xd = self.data(*x);
                let yd = node.value.as_slice();
                let gx = slot(work, *x, g.len());
                for k in 0..g.len() {
                    let local = match kind {
                        Unary::Sigmoid => yd[k] * (T::one() - yd[k]),
                        Unary::Tanh => T::one() - yd[k] * yd[k],
                        Unary::Softplus => math::sigmoid(xd[k]),
                        Unary::Relu => {
                            if xd[k] > T::zero() {
                                T::one()
                            } else {
                                T::zero()
                            }
                        }
                    };
                    gx[k] = gx[k] + g[k] * local;
                }
            }
            Op::Scale(x, factor) => {
                let gx = slot(work, *x, g.len());
                for (o, &v) in gx.iter_mut().zip(g) {
                    *o = *o + v * *factor;
                }
            }
            Op::Euclidean(a, b) => {
                let dist = node.value.item();
                if dist == T::zero() {
                    return;
                }
                let n = self.value(*a).len();
                let coef = g[0] / dist;
                let (ad, bd) = (self.data(*a), self.data(*b));
                if self.nodes[a.0].requires_grad {
                    let ga = slot(work, *a, n);
                    for k in 0..n {
                        ga[k] = ga[k] + coef * (ad[k] - bd[k]);
                    }
                }
                if self.nodes[b.0].requires_grad {
                    let gb = slot(work, *b, n);
                    for k in 0..n {
                        gb[k] = gb[k] - coef * (ad[k] - bd[k]);
                    }
                }
            }
            Op::MeanPool(xs) => {
                let inv = T::one() / T::from_f64(xs.len() as f64);
                for x in xs {
                    if self.nodes[x.0].requires_grad {
                        let gx = slot(work, *x, g.len());
                        for (o, &v) in gx.iter_mut().zip(g) {
                            *o = *o + v * inv;
                        }
                    }
                }
            }
            Op::Sum(xs) => {
                for x in xs {
                    if self.nodes[x.0].requires_grad {
                        let gx = slot(work, *x, g.len());
                        for (o, &v) in gx.iter_mut().zip(g) {
                            *o = *o + v;
                        }
                    }
                }
            }
            Op::Select(xs, chosen) => {
                let x = xs[*chosen];
                if self.nodes[x.0].requires_grad {
                    let gx = slot(work, x, 1);
                    gx[0] = gx[0] + g[0];
                }
            }
        }
    }
}

fn slot<T: Real>(work: &mut [Option<Vec<T>>], id: NodeId, len: usize) -> &mut Vec<T> {
    work[id.0].get_or_insert_with(|| vec![T::zero(); len])
}
