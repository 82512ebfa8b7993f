//! Reverse-mode differentiation over vectors.
//!
//! Every model equation is assembled from the primitives on [`Tape`]. The
//! forward pass records each application together with its output value;
//! [`Tape::backward`] replays the record in reverse and accumulates
//! `d loss / d param` into the `grad` buffers of the [`ParamStore`].
//!
//! Matrices only ever appear as parameters, so every node is a vector
//! (scalars are vectors of length one).

use super::param::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Row(ParamId, usize),
    MatVec(ParamId, NodeId),
    Add(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    OneMinus(NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Dot(NodeId, NodeId),
    Stack(Vec<NodeId>),
    Softmax(NodeId),
    Mask(NodeId, Vec<bool>),
    Dropout(NodeId, Vec<f64>),
    WeightedSum(NodeId, Vec<NodeId>),
    LnSum(NodeId, Vec<usize>),
    Sum(Vec<NodeId>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Numerically stable softmax. `-inf` entries are treated as masked and map
/// to exactly zero.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    let max = v
        .iter()
        .copied()
        .filter(|x| *x != f64::NEG_INFINITY)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptySupport);
    }
    if !max.is_finite() {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let mut out: Vec<f64> = v
        .iter()
        .map(|&x| {
            if x == f64::NEG_INFINITY {
                0.0
            } else {
                (x - max).exp()
            }
        })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn dim(&self, id: NodeId) -> usize {
        self.nodes[id.0].value.len()
    }

    fn same_len(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (la, lb) = (self.dim(a), self.dim(b));
        if la != lb {
            return Err(Error::shape(op, format!("({la},)"), format!("({lb},)")));
        }
        Ok(())
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// The whole parameter, flattened, as a differentiable vector.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        let value = store.get(id).values.clone();
        self.push(value, Op::Param(id))
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn row(&mut self, store: &ParamStore, id: ParamId, r: usize) -> Result<NodeId> {
        let t = store.get(id);
        let (rows, _) = t.shape.dims();
        if r >= rows {
            return Err(Error::shape("row", t.shape, format!("row {r}")));
        }
        let value = t.row(r).to_vec();
        Ok(self.push(value, Op::Row(id, r)))
    }

    pub fn matvec(&mut self, store: &ParamStore, w: ParamId, x: NodeId) -> Result<NodeId> {
        let t = store.get(w);
        let (rows, cols) = t.shape.dims();
        let xv = &self.nodes[x.0].value;
        if cols != xv.len() {
            return Err(Error::shape("affine", t.shape, format!("({},)", xv.len())));
        }
        let value = (0..rows)
            .map(|r| dot(&t.values[r * cols..(r + 1) * cols], xv))
            .collect();
        Ok(self.push(value, Op::MatVec(w, x)))
    }

    /// `W·x (+ b)`.
    pub fn affine(
        &mut self,
        store: &ParamStore,
        w: ParamId,
        x: NodeId,
        b: Option<ParamId>,
    ) -> Result<NodeId> {
        let wx = self.matvec(store, w, x)?;
        match b {
            None => Ok(wx),
            Some(b) => {
                let bn = self.param(store, b);
                if self.dim(bn) != self.dim(wx) {
                    return Err(Error::shape(
                        "affine",
                        store.get(w).shape,
                        store.get(b).shape,
                    ));
                }
                self.add(wx, bn)
            }
        }
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len("add", a, b)?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len("hadamard", a, b)?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(value, Op::Hadamard(a, b)))
    }

    /// `1 - a`, entrywise.
    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).iter().map(|x| 1.0 - x).collect();
        self.push(value, Op::OneMinus(a))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.value(a).iter().map(|x| x * c).collect();
        self.push(value, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).iter().map(|&x| sigmoid_scalar(x)).collect();
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(value, Op::Tanh(a))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut value = Vec::with_capacity(parts.iter().map(|&p| self.dim(p)).sum());
        for &p in parts {
            value.extend_from_slice(self.value(p));
        }
        self.push(value, Op::Concat(parts.to_vec()))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_len("dot", a, b)?;
        let value = vec![dot(self.value(a), self.value(b))];
        Ok(self.push(value, Op::Dot(a, b)))
    }

    /// Gathers scalar nodes into one vector.
    pub fn stack(&mut self, scalars: &[NodeId]) -> Result<NodeId> {
        let mut value = Vec::with_capacity(scalars.len());
        for &s in scalars {
            if self.dim(s) != 1 {
                return Err(Error::shape("stack", "(1,)", format!("({},)", self.dim(s))));
            }
            value.push(self.scalar(s));
        }
        Ok(self.push(value, Op::Stack(scalars.to_vec())))
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let value = softmax(self.value(a))?;
        Ok(self.push(value, Op::Softmax(a)))
    }

    /// Replaces entries where `masked[i]` is set with `-inf`; they receive no
    /// gradient.
    pub fn mask(&mut self, a: NodeId, masked: Vec<bool>) -> Result<NodeId> {
        if masked.len() != self.dim(a) {
            return Err(Error::shape(
                "mask",
                format!("({},)", self.dim(a)),
                format!("({},)", masked.len()),
            ));
        }
        let value = self
            .value(a)
            .iter()
            .zip(&masked)
            .map(|(&x, &m)| if m { f64::NEG_INFINITY } else { x })
            .collect();
        Ok(self.push(value, Op::Mask(a, masked)))
    }

    /// Multiplies by a fixed per-entry factor (an inverted-dropout mask).
    pub fn dropout(&mut self, a: NodeId, keep_scale: Vec<f64>) -> Result<NodeId> {
        if keep_scale.len() != self.dim(a) {
            return Err(Error::shape(
                "dropout",
                format!("({},)", self.dim(a)),
                format!("({},)", keep_scale.len()),
            ));
        }
        let value = zip_map(self.value(a), &keep_scale, |x, k| x * k);
        Ok(self.push(value, Op::Dropout(a, keep_scale)))
    }

    /// `Σ_i weights[i] · items[i]`.
    pub fn weighted_sum(&mut self, weights: NodeId, items: &[NodeId]) -> Result<NodeId> {
        if self.dim(weights) != items.len() || items.is_empty() {
            return Err(Error::shape(
                "weighted_sum",
                format!("({},)", self.dim(weights)),
                format!("{} items", items.len()),
            ));
        }
        let d = self.dim(items[0]);
        let mut value = vec![0.0; d];
        for (k, &item) in items.iter().enumerate() {
            if self.dim(item) != d {
                return Err(Error::shape(
                    "weighted_sum",
                    format!("({d},)"),
                    format!("({},)", self.dim(item)),
                ));
            }
            let w = self.value(weights)[k];
            for (v, x) in value.iter_mut().zip(self.value(item)) {
                *v += w * x;
            }
        }
        Ok(self.push(value, Op::WeightedSum(weights, items.to_vec())))
    }

    /// `ln Σ_{i ∈ picks} a[i]`; the total must be positive.
    pub fn ln_sum(&mut self, a: NodeId, picks: Vec<usize>) -> Result<NodeId> {
        let av = self.value(a);
        if let Some(&bad) = picks.iter().find(|&&i| i >= av.len()) {
            return Err(Error::shape(
                "ln_sum",
                format!("({},)", av.len()),
                format!("index {bad}"),
            ));
        }
        let total: f64 = picks.iter().map(|&i| av[i]).sum();
        let value = vec![total.ln()];
        Ok(self.push(value, Op::LnSum(a, picks)))
    }

    /// Adds up scalar nodes.
    pub fn sum(&mut self, scalars: &[NodeId]) -> Result<NodeId> {
        let mut total = 0.0;
        for &s in scalars {
            if self.dim(s) != 1 {
                return Err(Error::shape("sum", "(1,)", format!("({},)", self.dim(s))));
            }
            total += self.scalar(s);
        }
        Ok(self.push(vec![total], Op::Sum(scalars.to_vec())))
    }

    /// Backpropagates from the scalar `loss` with unit seed.
    pub fn backward(&self, loss: NodeId, store: &mut ParamStore) -> Result<()> {
        self.backward_scaled(loss, 1.0, store)
    }

    /// Backpropagates `seed · d loss`, accumulating into `store` grads.
    pub fn backward_scaled(&self, loss: NodeId, seed: f64, store: &mut ParamStore) -> Result<()> {
        if self.dim(loss) != 1 {
            return Err(Error::shape(
                "backward",
                "(1,)",
                format!("({},)", self.dim(loss)),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![seed]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(p) => {
                    let t = store.get_mut(*p);
                    axpy(&mut t.grad, &g, 1.0);
                }
                Op::Row(p, r) => {
                    let t = store.get_mut(*p);
                    let (_, cols) = t.shape.dims();
                    axpy(&mut t.grad[r * cols..(r + 1) * cols], &g, 1.0);
                }
                Op::MatVec(p, x) => {
                    let xv = &self.nodes[x.0].value;
                    let t = store.get_mut(*p);
                    let (rows, cols) = t.shape.dims();
                    let gx = slot(&mut grads, *x, cols);
                    for (r, &gr) in g.iter().enumerate().take(rows) {
                        if gr == 0.0 {
                            continue;
                        }
                        axpy(gx, &t.values[r * cols..(r + 1) * cols], gr);
                        axpy(&mut t.grad[r * cols..(r + 1) * cols], xv, gr);
                    }
                }
                Op::Add(a, b) => {
                    axpy(slot(&mut grads, *a, g.len()), &g, 1.0);
                    axpy(slot(&mut grads, *b, g.len()), &g, 1.0);
                }
                Op::Hadamard(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = slot(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * bv[k];
                    }
                    let gb = slot(&mut grads, *b, g.len());
                    for k in 0..g.len() {
                        gb[k] += g[k] * av[k];
                    }
                }
                Op::OneMinus(a) => axpy(slot(&mut grads, *a, g.len()), &g, -1.0),
                Op::Scale(a, c) => axpy(slot(&mut grads, *a, g.len()), &g, *c),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = slot(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * y[k] * (1.0 - y[k]);
                    }
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = slot(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * (1.0 - y[k] * y[k]);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.dim(*p);
                        axpy(slot(&mut grads, *p, n), &g[off..off + n], 1.0);
                        off += n;
                    }
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let n = av.len();
                    axpy(slot(&mut grads, *a, n), bv, g[0]);
                    axpy(slot(&mut grads, *b, n), av, g[0]);
                }
                Op::Stack(scalars) => {
                    for (k, s) in scalars.iter().enumerate() {
                        slot(&mut grads, *s, 1)[0] += g[k];
                    }
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let inner = dot(&g, y);
                    let ga = slot(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += y[k] * (g[k] - inner);
                    }
                }
                Op::Mask(a, masked) => {
                    let ga = slot(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        if !masked[k] {
                            ga[k] += g[k];
                        }
                    }
                }
                Op::Dropout(a, keep) => {
                    let ga = slot(&mut grads, *a, g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * keep[k];
                    }
                }
                Op::WeightedSum(w, items) => {
                    let wv = &self.nodes[w.0].value;
                    let mut gw = vec![0.0; items.len()];
                    for (k, item) in items.iter().enumerate() {
                        gw[k] = dot(&g, &self.nodes[item.0].value);
                        axpy(slot(&mut grads, *item, g.len()), &g, wv[k]);
                    }
                    axpy(slot(&mut grads, *w, items.len()), &gw, 1.0);
                }
                Op::LnSum(a, picks) => {
                    let av = &self.nodes[a.0].value;
                    let total: f64 = picks.iter().map(|&k| av[k]).sum();
                    let ga = slot(&mut grads, *a, av.len());
                    for &k in picks {
                        ga[k] += g[0] / total;
                    }
                }
                Op::Sum(scalars) => {
                    for s in scalars {
                        slot(&mut grads, *s, 1)[0] += g[0];
                    }
                }
            }
        }
        Ok(())
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], x: &[f64], a: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}
