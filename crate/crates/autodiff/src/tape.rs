//! Recording tape for reverse-mode differentiation.
//!
//! Every op appends one node holding its forward value. Because operands must
//! already exist on the tape, node order is a topological order, and
//! [`Tape::backward`] simply walks it in reverse.

use crate::error::{AdError, Result};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MatVec(Var, Var),
    MatMul(Var, Var),
    Concat(Vec<Var>),
    Sum(Var),
    Mean(Var),
    Sigmoid(Var),
    Tanh(Var),
    ScalarMul(Var, f64),
    AddScalar(Var),
    BceWithLogits(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Counters from one backward sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BackwardStats {
    /// Nodes whose gradient was propagated to their operands.
    pub visited: usize,
    /// Nodes on the tape, including those not upstream of the loss.
    pub recorded: usize,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<Option<Var>>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> AdError {
    AdError::ShapeMismatch {
        op,
        left: a.shape(),
        right: b.shape(),
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Records a constant. Gradients reach it only if it was built with
    /// `requires_grad`, and they are then discarded.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let ng = t.requires_grad();
        self.push(t, Op::Leaf, ng)
    }

    /// Brings a parameter onto the tape; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if self.params.len() <= id.index() {
            self.params.resize(id.index() + 1, None);
        }
        if let Some(v) = self.params[id.index()] {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id), true);
        self.params[id.index()] = Some(v);
        v
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch("add", x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect();
        let t = Tensor::raw(x.rows(), x.cols(), data);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(t, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch("sub", x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p - q).collect();
        let t = Tensor::raw(x.rows(), x.cols(), data);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(t, Op::Sub(a, b), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(mismatch("mul", x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let t = Tensor::raw(x.rows(), x.cols(), data);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(t, Op::Mul(a, b), ng))
    }

    pub fn matvec(&mut self, m: Var, v: Var) -> Result<Var> {
        let (w, x) = (self.value(m), self.value(v));
        if !x.is_vector() || w.cols() != x.rows() {
            return Err(mismatch("matvec", w, x));
        }
        let n = w.cols();
        let xs = x.data();
        let data = w
            .data()
            .chunks_exact(n.max(1))
            .take(w.rows())
            .map(|row| row.iter().zip(xs).map(|(a, b)| a * b).sum())
            .collect::<Vec<f64>>();
        let data = if n == 0 { vec![0.0; w.rows()] } else { data };
        let t = Tensor::raw(w.rows(), 1, data);
        let ng = self.ng(m) || self.ng(v);
        Ok(self.push(t, Op::MatVec(m, v), ng))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.rows() {
            return Err(mismatch("matmul", x, y));
        }
        let (r, k, c) = (x.rows(), x.cols(), y.cols());
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for p in 0..k {
                let xv = x.data()[i * k + p];
                let yrow = &y.data()[p * c..(p + 1) * c];
                for (o, yv) in data[i * c..(i + 1) * c].iter_mut().zip(yrow) {
                    *o += xv * yv;
                }
            }
        }
        let t = Tensor::raw(r, c, data);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(t, Op::MatMul(a, b), ng))
    }

    /// Stacks operands vertically; all must have the same column count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(AdError::Empty("concat"))?;
        let cols = self.value(first).cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(mismatch("concat", self.value(first), t));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::raw(rows, cols, data), Op::Concat(parts.to_vec()), ng))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let ng = self.ng(a);
        self.push(Tensor::raw(1, 1, vec![s]), Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(AdError::Empty("mean"));
        }
        let s = x.data().iter().sum::<f64>() / x.len() as f64;
        let ng = self.ng(a);
        Ok(self.push(Tensor::raw(1, 1, vec![s]), Op::Mean(a), ng))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let data = x.data().iter().map(|&v| sigmoid(v)).collect();
        let t = Tensor::raw(x.rows(), x.cols(), data);
        let ng = self.ng(a);
        self.push(t, Op::Sigmoid(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let data = x.data().iter().map(|v| v.tanh()).collect();
        let t = Tensor::raw(x.rows(), x.cols(), data);
        let ng = self.ng(a);
        self.push(t, Op::Tanh(a), ng)
    }

    pub fn scalar_mul(&mut self, a: Var, k: f64) -> Var {
        let x = self.value(a);
        let data = x.data().iter().map(|v| v * k).collect();
        let t = Tensor::raw(x.rows(), x.cols(), data);
        let ng = self.ng(a);
        self.push(t, Op::ScalarMul(a, k), ng)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let x = self.value(a);
        let data = x.data().iter().map(|v| v + k).collect();
        let t = Tensor::raw(x.rows(), x.cols(), data);
        let ng = self.ng(a);
        self.push(t, Op::AddScalar(a), ng)
    }

    /// `1 - a`, the gate complement used by recurrent cells.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let neg = self.scalar_mul(a, -1.0);
        self.add_scalar(neg, 1.0)
    }

    /// Binary cross-entropy summed over entries, computed from logits:
    /// `sum_i softplus(l_i) - t_i * l_i`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var> {
        let x = self.value(logits);
        if x.len() != targets.len() {
            return Err(AdError::ShapeMismatch {
                op: "bce_with_logits",
                left: x.shape(),
                right: (targets.len(), 1),
            });
        }
        let s = x
            .data()
            .iter()
            .zip(targets)
            .map(|(&l, &t)| softplus(l) - t * l)
            .sum();
        let ng = self.ng(logits);
        Ok(self.push(
            Tensor::raw(1, 1, vec![s]),
            Op::BceWithLogits(logits, targets.to_vec()),
            ng,
        ))
    }

    /// Accumulates d`loss`/dθ into `store` for every parameter of the store.
    /// Parameters the loss does not depend on receive a zero gradient.
    /// Calling this twice without clearing adds the gradients up.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<BackwardStats> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(AdError::NotScalar(lv.shape()));
        }
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            store.ensure_grad(id);
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut stats = BackwardStats {
            visited: 0,
            recorded: self.nodes.len(),
        };

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            stats.visited += 1;
            self.propagate(node, &g, &mut grads, store);
        }
        Ok(stats)
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.ng(v) {
            return None;
        }
        let n = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
    }

    fn propagate(
        &self,
        node: &Node,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
        store: &mut ParamStore,
    ) {
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => store.accumulate_grad(*id, g),
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(ga) = self.acc(grads, v) {
                        ga.iter_mut().zip(g).for_each(|(s, x)| *s += x);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(s, x)| *s += x);
                }
                if let Some(gb) = self.acc(grads, *b) {
                    gb.iter_mut().zip(g).for_each(|(s, x)| *s -= x);
                }
            }
            Op::Mul(a, b) => {
                let (xa, xb) = (self.value(*a).data(), self.value(*b).data());
                if let Some(ga) = self.acc(grads, *a) {
                    for ((s, gi), y) in ga.iter_mut().zip(g).zip(xb) {
                        *s += gi * y;
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for ((s, gi), x) in gb.iter_mut().zip(g).zip(xa) {
                        *s += gi * x;
                    }
                }
            }
            Op::MatVec(m, v) => {
                let w = self.value(*m);
                let x = self.value(*v).data();
                let n = w.cols();
                if let Some(gw) = self.acc(grads, *m) {
                    for (r, gi) in g.iter().enumerate() {
                        if *gi == 0.0 {
                            continue;
                        }
                        for (s, xv) in gw[r * n..(r + 1) * n].iter_mut().zip(x) {
                            *s += gi * xv;
                        }
                    }
                }
                if let Some(gx) = self.acc(grads, *v) {
                    for (r, gi) in g.iter().enumerate() {
                        let row = &w.data()[r * n..(r + 1) * n];
                        for (s, wv) in gx.iter_mut().zip(row) {
                            *s += gi * wv;
                        }
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let (r, k, c) = (x.rows(), x.cols(), y.cols());
                if let Some(ga) = self.acc(grads, *a) {
                    // dA = G * B^T
                    for i in 0..r {
                        for p in 0..k {
                            let yrow = &y.data()[p * c..(p + 1) * c];
                            let grow = &g[i * c..(i + 1) * c];
                            ga[i * k + p] += grow.iter().zip(yrow).map(|(u, w)| u * w).sum::<f64>();
                        }
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    // dB = A^T * G
                    for i in 0..r {
                        for p in 0..k {
                            let xv = x.data()[i * k + p];
                            let grow = &g[i * c..(i + 1) * c];
                            for (s, gv) in gb[p * c..(p + 1) * c].iter_mut().zip(grow) {
                                *s += xv * gv;
                            }
                        }
                    }
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    if let Some(gp) = self.acc(grads, p) {
                        gp.iter_mut()
                            .zip(&g[off..off + n])
                            .for_each(|(s, x)| *s += x);
                    }
                    off += n;
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().for_each(|s| *s += g[0]);
                }
            }
            Op::Mean(a) => {
                let n = self.value(*a).len() as f64;
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().for_each(|s| *s += g[0] / n);
                }
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((s, gi), yv) in ga.iter_mut().zip(g).zip(y) {
                        *s += gi * yv * (1.0 - yv);
                    }
                }
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((s, gi), yv) in ga.iter_mut().zip(g).zip(y) {
                        *s += gi * (1.0 - yv * yv);
                    }
                }
            }
            Op::ScalarMul(a, k) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(s, x)| *s += k * x);
                }
            }
            Op::AddScalar(a) => {
                if let Some(ga) = self.acc(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(s, x)| *s += x);
                }
            }
            Op::BceWithLogits(a, targets) => {
                let l = self.value(*a).data();
                if let Some(ga) = self.acc(grads, *a) {
                    for ((s, lv), t) in ga.iter_mut().zip(l).zip(targets) {
                        *s += g[0] * (sigmoid(*lv) - t);
                    }
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
