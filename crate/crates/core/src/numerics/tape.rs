//! Reverse-mode tape over 1-D values.
//!
//! Matrices only ever appear as parameters, so every recorded node holds a
//! flat vector. Ops that read parameters (`param`, `row`, `linear`, `l2`)
//! take the `ParamStore` by shared reference during the forward pass;
//! `backward` takes it mutably and accumulates into `Parameter::grad`.

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU32, Ordering};

use rand::Rng as _;
use rand::RngCore;

use super::{sigmoid, ParamId, ParamStore, LOG_EPSILON};
use crate::error::{Error, Result};

/// Score assigned to masked positions before a softmax.
pub const MASK_SENTINEL: f64 = -1e30;

static NEXT_TAPE: AtomicU32 = AtomicU32::new(1);

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u32,
    idx: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Softmax,
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    Row { param: ParamId, row: usize },
    Linear { w: ParamId, b: Option<ParamId>, x: usize },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    OneMinus(usize),
    ScaleBy { s: usize, v: usize },
    Sigmoid(usize),
    Tanh(usize),
    Mask { x: usize, mask: Vec<bool> },
    Softmax(usize),
    Concat(Vec<usize>),
    Dot(usize, usize),
    Sum(usize),
    SumAll(Vec<usize>),
    WeightedSum { w: usize, vs: Vec<usize> },
    Dropout { x: usize, factors: Vec<f64> },
    CrossEntropy { p: usize, target: usize },
    L2,
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Node gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    tape: u32,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`; zeros when the loss does
    /// not depend on it.
    pub fn wrt(&self, var: Var) -> Option<&[f64]> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get(var.idx as usize).and_then(|g| g.as_deref())
    }
}

#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        assert_eq!(v.tape, self.id, "variable belongs to another tape");
        &self.nodes[v.idx as usize].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var {
            tape: self.id,
            idx: (self.nodes.len() - 1) as u32,
        }
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx as usize >= self.nodes.len() {
            return Err(Error::Usage("variable is not recorded on this tape".into()));
        }
        Ok(v.idx as usize)
    }

    fn val(&self, i: usize) -> &[f64] {
        &self.nodes[i].value
    }

    fn same_len(&self, op: &'static str, a: usize, b: usize) -> Result<()> {
        let (la, lb) = (self.val(a).len(), self.val(b).len());
        if la != lb {
            return Err(Error::Dimension {
                op,
                left: vec![la],
                right: vec![lb],
            });
        }
        Ok(())
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.constant(vec![0.0; n])
    }

    /// The whole parameter, flattened.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let value = store.value(id).data().to_vec();
        self.push(value, Op::Param(id))
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn row(&mut self, store: &ParamStore, id: ParamId, row: usize) -> Result<Var> {
        let t = store.value(id);
        if row >= t.rows() {
            return Err(Error::Index {
                what: "embedding table",
                index: row,
                size: t.rows(),
            });
        }
        let value = t.row(row).to_vec();
        Ok(self.push(value, Op::Row { param: id, row }))
    }

    /// `W·x (+ b)`.
    pub fn linear(
        &mut self,
        store: &ParamStore,
        w: ParamId,
        x: Var,
        b: Option<ParamId>,
    ) -> Result<Var> {
        let xi = self.idx(x)?;
        let wt = store.value(w);
        let xv = self.val(xi);
        if wt.shape().len() != 2 || wt.cols() != xv.len() {
            return Err(Error::Dimension {
                op: "linear",
                left: wt.shape().to_vec(),
                right: vec![xv.len()],
            });
        }
        let (m, n) = (wt.rows(), wt.cols());
        let wd = wt.data();
        let mut y = Vec::with_capacity(m);
        for i in 0..m {
            let row = &wd[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * xv[j];
            }
            y.push(acc);
        }
        if let Some(b) = b {
            let bv = store.value(b);
            if bv.len() != m {
                return Err(Error::Dimension {
                    op: "linear bias",
                    left: vec![m],
                    right: bv.shape().to_vec(),
                });
            }
            for (yi, bi) in y.iter_mut().zip(bv.data()) {
                *yi += bi;
            }
        }
        Ok(self.push(y, Op::Linear { w, b, x: xi }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        self.same_len("add", ai, bi)?;
        let v = self.val(ai).iter().zip(self.val(bi)).map(|(x, y)| x + y).collect();
        Ok(self.push(v, Op::Add(ai, bi)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        self.same_len("sub", ai, bi)?;
        let v = self.val(ai).iter().zip(self.val(bi)).map(|(x, y)| x - y).collect();
        Ok(self.push(v, Op::Sub(ai, bi)))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        self.same_len("mul", ai, bi)?;
        let v = self.val(ai).iter().zip(self.val(bi)).map(|(x, y)| x * y).collect();
        Ok(self.push(v, Op::Mul(ai, bi)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let ai = self.idx(a)?;
        let v = self.val(ai).iter().map(|x| x * c).collect();
        Ok(self.push(v, Op::Scale(ai, c)))
    }

    /// `1 − x`, element-wise.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let v = self.val(ai).iter().map(|x| 1.0 - x).collect();
        Ok(self.push(v, Op::OneMinus(ai)))
    }

    /// Vector `v` times the scalar node `s`.
    pub fn scale_by(&mut self, s: Var, v: Var) -> Result<Var> {
        let (si, vi) = (self.idx(s)?, self.idx(v)?);
        if self.val(si).len() != 1 {
            return Err(Error::Dimension {
                op: "scale_by",
                left: vec![self.val(si).len()],
                right: vec![1],
            });
        }
        let c = self.val(si)[0];
        let out = self.val(vi).iter().map(|x| c * x).collect();
        Ok(self.push(out, Op::ScaleBy { s: si, v: vi }))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let v = self.val(ai).iter().map(|&x| sigmoid(x)).collect();
        Ok(self.push(v, Op::Sigmoid(ai)))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let v = self.val(ai).iter().map(|&x| libm::tanh(x)).collect();
        Ok(self.push(v, Op::Tanh(ai)))
    }

    /// Softmax over the whole vector. Entries at or below half the mask
    /// sentinel are treated as masked; at least one entry must be unmasked.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let x = self.val(ai);
        if x.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if x.iter().any(|v| v.is_nan()) {
            let out = vec![f64::NAN; x.len()];
            return Ok(self.push(out, Op::Softmax(ai)));
        }
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > MASK_SENTINEL * 0.5) {
            return Err(Error::EmptyDistribution);
        }
        let mut out: Vec<f64> = x.iter().map(|&v| libm::exp(v - max)).collect();
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= total);
        Ok(self.push(out, Op::Softmax(ai)))
    }

    /// Replace entries where `mask` is false with the sentinel.
    pub fn mask(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let ai = self.idx(a)?;
        let x = self.val(ai);
        if x.len() != mask.len() {
            return Err(Error::Dimension {
                op: "mask",
                left: vec![x.len()],
                right: vec![mask.len()],
            });
        }
        let v = x
            .iter()
            .zip(mask)
            .map(|(&v, &keep)| if keep { v } else { MASK_SENTINEL })
            .collect();
        Ok(self.push(
            v,
            Op::Mask {
                x: ai,
                mask: mask.to_vec(),
            },
        ))
    }

    pub fn masked_softmax(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let m = self.mask(a, mask)?;
        self.softmax(m)
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Result<Var> {
        match kind {
            Activation::Sigmoid => self.sigmoid(a),
            Activation::Tanh => self.tanh(a),
            Activation::Softmax => self.softmax(a),
        }
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Argument("concat of an empty part list".into()));
        }
        let idxs = parts.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>>>()?;
        let total = idxs.iter().map(|&i| self.val(i).len()).sum();
        let mut v = Vec::with_capacity(total);
        for &i in &idxs {
            v.extend_from_slice(self.val(i));
        }
        Ok(self.push(v, Op::Concat(idxs)))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        self.same_len("dot", ai, bi)?;
        let s = self.val(ai).iter().zip(self.val(bi)).map(|(x, y)| x * y).sum();
        Ok(self.push(vec![s], Op::Dot(ai, bi)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let s = self.val(ai).iter().sum();
        Ok(self.push(vec![s], Op::Sum(ai)))
    }

    /// Sum of scalar nodes.
    pub fn sum_all(&mut self, parts: &[Var]) -> Result<Var> {
        let idxs = parts.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>>>()?;
        let mut s = 0.0;
        for &i in &idxs {
            if self.val(i).len() != 1 {
                return Err(Error::Dimension {
                    op: "sum_all",
                    left: vec![self.val(i).len()],
                    right: vec![1],
                });
            }
            s += self.val(i)[0];
        }
        Ok(self.push(vec![s], Op::SumAll(idxs)))
    }

    /// `Σ_n weights[n] · vectors[n]`.
    pub fn weighted_sum(&mut self, weights: Var, vectors: &[Var]) -> Result<Var> {
        let wi = self.idx(weights)?;
        let vis = vectors.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>>>()?;
        if self.val(wi).len() != vis.len() || vis.is_empty() {
            return Err(Error::Dimension {
                op: "weighted_sum",
                left: vec![self.val(wi).len()],
                right: vec![vis.len()],
            });
        }
        let d = self.val(vis[0]).len();
        let mut out = vec![0.0; d];
        for (k, &vi) in vis.iter().enumerate() {
            let w = self.val(wi)[k];
            let v = self.val(vi);
            if v.len() != d {
                return Err(Error::Dimension {
                    op: "weighted_sum",
                    left: vec![d],
                    right: vec![v.len()],
                });
            }
            if w == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        Ok(self.push(out, Op::WeightedSum { w: wi, vs: vis }))
    }

    /// Inverted dropout. Identity when `training` is false or `rate == 0`.
    pub fn dropout<R: RngCore>(
        &mut self,
        a: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Argument(alloc::format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        let ai = self.idx(a)?;
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let factors: Vec<f64> = (0..self.val(ai).len())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let v = self.val(ai).iter().zip(&factors).map(|(x, f)| x * f).collect();
        Ok(self.push(v, Op::Dropout { x: ai, factors }))
    }

    /// `−ln(probs[target] + ε)`.
    pub fn cross_entropy(&mut self, probs: Var, target: usize) -> Result<Var> {
        let pi = self.idx(probs)?;
        let p = self.val(pi);
        if target >= p.len() {
            return Err(Error::Index {
                what: "distribution",
                index: target,
                size: p.len(),
            });
        }
        let loss = -libm::log(p[target] + LOG_EPSILON);
        Ok(self.push(vec![loss], Op::CrossEntropy { p: pi, target }))
    }

    /// Sum of squared entries of every parameter in `store`.
    pub fn l2_penalty(&mut self, store: &ParamStore) -> Var {
        self.push(vec![store.l2_penalty()], Op::L2)
    }

    /// Accumulate `∂loss/∂θ` into every parameter's gradient and return the
    /// gradients of all recorded nodes.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
        let li = self.idx(loss)?;
        if self.val(li).len() != 1 {
            return Err(Error::Usage("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; li + 1];
        grads[li] = Some(vec![1.0]);

        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let p = store.get_mut(*id);
                    for (a, b) in p.grad.data_mut().iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Row { param, row } => {
                    let p = store.get_mut(*param);
                    for (a, b) in p.grad.row_mut(*row).iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Linear { w, b, x } => {
                    let xv = self.val(*x);
                    let n = xv.len();
                    let mut dx = vec![0.0; n];
                    {
                        let wv = store.value(*w).data();
                        for (r, gi) in g.iter().enumerate() {
                            if *gi == 0.0 {
                                continue;
                            }
                            let row = &wv[r * n..(r + 1) * n];
                            for j in 0..n {
                                dx[j] += row[j] * gi;
                            }
                        }
                    }
                    {
                        let gw = store.get_mut(*w).grad.data_mut();
                        for (r, gi) in g.iter().enumerate() {
                            if *gi == 0.0 {
                                continue;
                            }
                            let row = &mut gw[r * n..(r + 1) * n];
                            for j in 0..n {
                                row[j] += gi * xv[j];
                            }
                        }
                    }
                    if let Some(b) = b {
                        for (a, gi) in store.get_mut(*b).grad.data_mut().iter_mut().zip(&g) {
                            *a += gi;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.iter().map(|x| -x).collect());
                    accumulate(&mut grads, *a, g.clone());
                }
                Op::Mul(a, b) => {
                    let da = g.iter().zip(self.val(*b)).map(|(x, y)| x * y).collect();
                    let db = g.iter().zip(self.val(*a)).map(|(x, y)| x * y).collect();
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, g.iter().map(|x| x * c).collect());
                }
                Op::OneMinus(a) => {
                    accumulate(&mut grads, *a, g.iter().map(|x| -x).collect());
                }
                Op::ScaleBy { s, v } => {
                    let c = self.val(*s)[0];
                    let ds = g.iter().zip(self.val(*v)).map(|(x, y)| x * y).sum();
                    accumulate(&mut grads, *s, vec![ds]);
                    accumulate(&mut grads, *v, g.iter().map(|x| x * c).collect());
                }
                Op::Sigmoid(a) => {
                    let d = g
                        .iter()
                        .zip(&node.value)
                        .map(|(x, y)| x * y * (1.0 - y))
                        .collect();
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = g
                        .iter()
                        .zip(&node.value)
                        .map(|(x, y)| x * (1.0 - y * y))
                        .collect();
                    accumulate(&mut grads, *a, d);
                }
                Op::Mask { x, mask } => {
                    let d = g
                        .iter()
                        .zip(mask)
                        .map(|(x, &keep)| if keep { *x } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, d);
                }
                Op::Softmax(a) => {
                    let p = &node.value;
                    let inner: f64 = g.iter().zip(p).map(|(x, y)| x * y).sum();
                    let d = g.iter().zip(p).map(|(x, y)| y * (x - inner)).collect();
                    accumulate(&mut grads, *a, d);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &pi in parts {
                        let n = self.val(pi).len();
                        accumulate(&mut grads, pi, g[off..off + n].to_vec());
                        off += n;
                    }
                }
                Op::Dot(a, b) => {
                    let s = g[0];
                    let da = self.val(*b).iter().map(|y| s * y).collect();
                    let db = self.val(*a).iter().map(|y| s * y).collect();
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Sum(a) => {
                    accumulate(&mut grads, *a, vec![g[0]; self.val(*a).len()]);
                }
                Op::SumAll(parts) => {
                    for &pi in parts {
                        accumulate(&mut grads, pi, vec![g[0]]);
                    }
                }
                Op::WeightedSum { w, vs } => {
                    let wv = self.val(*w);
                    let mut dw = Vec::with_capacity(vs.len());
                    for (k, &vi) in vs.iter().enumerate() {
                        let v = self.val(vi);
                        dw.push(g.iter().zip(v).map(|(x, y)| x * y).sum());
                        let c = wv[k];
                        accumulate(&mut grads, vi, g.iter().map(|x| x * c).collect());
                    }
                    accumulate(&mut grads, *w, dw);
                }
                Op::Dropout { x, factors } => {
                    let d = g.iter().zip(factors).map(|(a, f)| a * f).collect();
                    accumulate(&mut grads, *x, d);
                }
                Op::CrossEntropy { p, target } => {
                    let pv = self.val(*p);
                    let mut d = vec![0.0; pv.len()];
                    d[*target] = -g[0] / (pv[*target] + LOG_EPSILON);
                    accumulate(&mut grads, *p, d);
                }
                Op::L2 => {
                    let s = g[0];
                    for p in store.iter_mut() {
                        let (val, grad) = (&p.value, &mut p.grad);
                        for (gr, v) in grad.data_mut().iter_mut().zip(val.data()) {
                            *gr += 2.0 * s * v;
                        }
                    }
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], i: usize, d: Vec<f64>) {
    match &mut grads[i] {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(&d) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(d),
    }
}
