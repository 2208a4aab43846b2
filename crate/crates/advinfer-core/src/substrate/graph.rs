//! Reverse-mode automatic differentiation over a flat tape of tensor ops.
//!
//! A [`Graph`] records every operation applied to [`Var`] handles; calling
//! [`Graph::backward`] on a scalar root walks the tape once in reverse and
//! returns gradients for all named parameter leaves. Every op checks its
//! output for NaN/Inf and fails fast, which is how training loops detect
//! divergence before it corrupts parameters.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::optim::ParamStore;
use super::tensor::{matvec, matvec_t_accum, Tensor};
use super::SubstrateError;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Floor applied inside `ln` so saturated discriminator scores cannot emit
/// `-inf` into a training objective.
pub const LN_GUARD: f64 = 1e-12;

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// `W x` with `W: [m, n]`, `x: [n]`.
    MatVec(Var, Var),
    /// `M^T w` with `M: [t, d]`, `w: [t]` — weighted sum of the rows of `M`.
    MatTVec(Var, Var),
    /// Row `i` of a matrix (embedding lookup).
    Row(Var, usize),
    Concat(Vec<Var>),
    Slice(Var, usize, usize),
    Tanh(Var),
    Sigmoid(Var),
    /// `ln(max(x, LN_GUARD))`, elementwise.
    Ln(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Dot(Var, Var),
    Sum(Var),
    /// Single entry of a vector as a scalar.
    Pick(Var, usize),
}

/// Gradients keyed by parameter name, as produced by [`Graph::backward`].
#[derive(Debug, Clone, Default)]
pub struct Grads {
    map: BTreeMap<String, Tensor>,
}

impl Grads {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn insert(&mut self, name: String, grad: Tensor) {
        self.map.insert(name, grad);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.map.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Accumulate `other` into `self` (missing entries are inserted).
    pub fn accumulate(&mut self, other: &Grads) {
        for (name, g) in other.iter() {
            match self.map.get_mut(name) {
                Some(acc) => acc.add_assign(g),
                None => {
                    self.map.insert(name.clone(), g.clone());
                }
            }
        }
    }

    /// Scale every gradient in place.
    pub fn scale(&mut self, factor: f64) {
        for g in self.map.values_mut() {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }
}

/// A single-use tape: build a forward computation, read values, optionally
/// run one backward pass.
pub struct Graph {
    vals: Vec<Arc<Tensor>>,
    ops: Vec<Op>,
    names: Vec<Option<String>>,
    param_cache: BTreeMap<String, Var>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self { vals: Vec::new(), ops: Vec::new(), names: Vec::new(), param_cache: BTreeMap::new() }
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.vals[v.0]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, name: Option<String>) -> Result<Var, SubstrateError> {
        if !value.is_finite() {
            return Err(SubstrateError::NonFinite { context: op_name(&op) });
        }
        self.vals.push(Arc::new(value));
        self.ops.push(op);
        self.names.push(name);
        Ok(Var(self.vals.len() - 1))
    }

    /// Constant leaf (no gradient is reported for it).
    pub fn constant(&mut self, value: Tensor) -> Result<Var, SubstrateError> {
        self.push(Op::Leaf, value, None)
    }

    /// Shared-storage constant leaf; avoids copying large feature matrices.
    pub fn constant_shared(&mut self, value: Arc<Tensor>) -> Result<Var, SubstrateError> {
        if !value.is_finite() {
            return Err(SubstrateError::NonFinite { context: "leaf" });
        }
        self.vals.push(value);
        self.ops.push(Op::Leaf);
        self.names.push(None);
        Ok(Var(self.vals.len() - 1))
    }

    /// Named parameter leaf pulled from a store. Repeated calls with the same
    /// name return the same node, so time-unrolled models accumulate into a
    /// single gradient per parameter.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var, SubstrateError> {
        if let Some(&v) = self.param_cache.get(name) {
            return Ok(v);
        }
        let tensor = store.get_shared(name)?;
        self.vals.push(tensor);
        self.ops.push(Op::Leaf);
        self.names.push(Some(name.to_string()));
        let var = Var(self.vals.len() - 1);
        self.param_cache.insert(name.to_string(), var);
        Ok(var)
    }

    fn check_same_shape(&self, a: Var, b: Var, context: &'static str) -> Result<(), SubstrateError> {
        if self.vals[a.0].shape() != self.vals[b.0].shape() {
            return Err(SubstrateError::ShapeMismatch {
                context,
                detail: format!("{:?} vs {:?}", self.vals[a.0].shape(), self.vals[b.0].shape()),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, SubstrateError> {
        self.check_same_shape(a, b, "add")?;
        let data = self.vals[a.0]
            .data()
            .iter()
            .zip(self.vals[b.0].data())
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.vals[a.0].shape().to_vec();
        self.push(Op::Add(a, b), Tensor::new(shape, data)?, None)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, SubstrateError> {
        self.check_same_shape(a, b, "sub")?;
        let data = self.vals[a.0]
            .data()
            .iter()
            .zip(self.vals[b.0].data())
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.vals[a.0].shape().to_vec();
        self.push(Op::Sub(a, b), Tensor::new(shape, data)?, None)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, SubstrateError> {
        self.check_same_shape(a, b, "mul")?;
        let data = self.vals[a.0]
            .data()
            .iter()
            .zip(self.vals[b.0].data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.vals[a.0].shape().to_vec();
        self.push(Op::Mul(a, b), Tensor::new(shape, data)?, None)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, SubstrateError> {
        let data = self.vals[a.0].data().iter().map(|x| x * factor).collect();
        let shape = self.vals[a.0].shape().to_vec();
        self.push(Op::Scale(a, factor), Tensor::new(shape, data)?, None)
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var, SubstrateError> {
        let wt = &self.vals[w.0];
        let xt = &self.vals[x.0];
        if wt.shape().len() != 2 || wt.cols() != xt.len() {
            return Err(SubstrateError::ShapeMismatch {
                context: "matvec",
                detail: format!("W {:?} x {:?}", wt.shape(), xt.shape()),
            });
        }
        let mut out = vec![0.0; wt.rows()];
        matvec(wt, xt.data(), &mut out);
        self.push(Op::MatVec(w, x), Tensor::vector(out), None)
    }

    /// Weighted sum of matrix rows: `out = M^T w`.
    pub fn mat_t_vec(&mut self, m: Var, w: Var) -> Result<Var, SubstrateError> {
        let mt = &self.vals[m.0];
        let wt = &self.vals[w.0];
        if mt.shape().len() != 2 || mt.rows() != wt.len() {
            return Err(SubstrateError::ShapeMismatch {
                context: "mat_t_vec",
                detail: format!("M {:?} w {:?}", mt.shape(), wt.shape()),
            });
        }
        let mut out = vec![0.0; mt.cols()];
        matvec_t_accum(mt, wt.data(), &mut out);
        self.push(Op::MatTVec(m, w), Tensor::vector(out), None)
    }

    pub fn row(&mut self, m: Var, i: usize) -> Result<Var, SubstrateError> {
        let mt = &self.vals[m.0];
        if mt.shape().len() != 2 || i >= mt.rows() {
            return Err(SubstrateError::ShapeMismatch {
                context: "row",
                detail: format!("row {} of {:?}", i, mt.shape()),
            });
        }
        let out = mt.row(i).to_vec();
        self.push(Op::Row(m, i), Tensor::vector(out), None)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, SubstrateError> {
        if parts.is_empty() {
            return Err(SubstrateError::EmptyInput { context: "concat" });
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.vals[p.0].data());
        }
        self.push(Op::Concat(parts.to_vec()), Tensor::vector(data), None)
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var, SubstrateError> {
        let xt = &self.vals[x.0];
        if start + len > xt.len() {
            return Err(SubstrateError::ShapeMismatch {
                context: "slice",
                detail: format!("[{start}, {start}+{len}) of len {}", xt.len()),
            });
        }
        let out = xt.data()[start..start + len].to_vec();
        self.push(Op::Slice(x, start, len), Tensor::vector(out), None)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, SubstrateError> {
        let data = self.vals[x.0].data().iter().map(|v| v.tanh()).collect();
        let shape = self.vals[x.0].shape().to_vec();
        self.push(Op::Tanh(x), Tensor::new(shape, data)?, None)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, SubstrateError> {
        let data = self.vals[x.0].data().iter().map(|v| stable_sigmoid(*v)).collect();
        let shape = self.vals[x.0].shape().to_vec();
        self.push(Op::Sigmoid(x), Tensor::new(shape, data)?, None)
    }

    pub fn ln(&mut self, x: Var) -> Result<Var, SubstrateError> {
        let data = self.vals[x.0].data().iter().map(|v| v.max(LN_GUARD).ln()).collect();
        let shape = self.vals[x.0].shape().to_vec();
        self.push(Op::Ln(x), Tensor::new(shape, data)?, None)
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var, SubstrateError> {
        let out = softmax_slice(self.vals[x.0].data());
        self.push(Op::Softmax(x), Tensor::vector(out), None)
    }

    pub fn log_softmax(&mut self, x: Var) -> Result<Var, SubstrateError> {
        let xs = self.vals[x.0].data();
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = xs.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        let out = xs.iter().map(|v| v - lse).collect();
        self.push(Op::LogSoftmax(x), Tensor::vector(out), None)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, SubstrateError> {
        self.check_same_shape(a, b, "dot")?;
        let s: f64 = self.vals[a.0]
            .data()
            .iter()
            .zip(self.vals[b.0].data())
            .map(|(x, y)| x * y)
            .sum();
        self.push(Op::Dot(a, b), Tensor::scalar(s), None)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, SubstrateError> {
        let s: f64 = self.vals[x.0].data().iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(s), None)
    }

    pub fn pick(&mut self, x: Var, i: usize) -> Result<Var, SubstrateError> {
        let xt = &self.vals[x.0];
        if i >= xt.len() {
            return Err(SubstrateError::ShapeMismatch {
                context: "pick",
                detail: format!("index {} of len {}", i, xt.len()),
            });
        }
        let v = xt.data()[i];
        self.push(Op::Pick(x, i), Tensor::scalar(v), None)
    }

    /// Affine map `W x + b`.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var, SubstrateError> {
        let wx = self.matvec(w, x)?;
        self.add(wx, b)
    }

    /// Reverse pass from a scalar root. Returns gradients for every named
    /// parameter leaf reachable from `root`.
    pub fn backward(&self, root: Var) -> Result<Grads, SubstrateError> {
        if self.vals[root.0].len() != 1 {
            return Err(SubstrateError::ShapeMismatch {
                context: "backward",
                detail: format!("root must be scalar, got {:?}", self.vals[root.0].shape()),
            });
        }
        let mut acc: Vec<Option<Tensor>> = vec![None; self.vals.len()];
        acc[root.0] = Some(Tensor::scalar(1.0));

        for id in (0..=root.0).rev() {
            let Some(g) = acc[id].take() else { continue };
            // Leaves keep their gradient for export below.
            if matches!(self.ops[id], Op::Leaf) {
                acc[id] = Some(g);
                continue;
            }
            self.backprop_one(id, &g, &mut acc);
        }

        let mut grads = Grads::default();
        for (id, name) in self.names.iter().enumerate() {
            let Some(name) = name else { continue };
            if let Some(g) = acc[id].take() {
                if !g.is_finite() {
                    return Err(SubstrateError::NonFinite { context: "gradient" });
                }
                // The same parameter may appear as one node only (param()
                // dedupes), so insert never collides.
                grads.insert(name.clone(), g);
            }
        }
        Ok(grads)
    }

    fn backprop_one(&self, id: usize, g: &Tensor, acc: &mut [Option<Tensor>]) {
        let val = |v: Var| -> &Tensor { &self.vals[v.0] };
        let ensure = |acc: &mut [Option<Tensor>], v: Var, shape: &[usize]| -> usize {
            if acc[v.0].is_none() {
                acc[v.0] = Some(Tensor::zeros(shape));
            }
            v.0
        };
        match &self.ops[id] {
            Op::Leaf => unreachable!("leaves handled by caller"),
            Op::Add(a, b) => {
                let ia = ensure(acc, *a, val(*a).shape());
                acc[ia].as_mut().unwrap().add_assign(g);
                let ib = ensure(acc, *b, val(*b).shape());
                acc[ib].as_mut().unwrap().add_assign(g);
            }
            Op::Sub(a, b) => {
                let ia = ensure(acc, *a, val(*a).shape());
                acc[ia].as_mut().unwrap().add_assign(g);
                let ib = ensure(acc, *b, val(*b).shape());
                let gb = acc[ib].as_mut().unwrap();
                for (o, gi) in gb.data_mut().iter_mut().zip(g.data()) {
                    *o -= gi;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a).clone(), val(*b).clone());
                let ia = ensure(acc, *a, av.shape());
                for ((o, gi), bi) in
                    acc[ia].as_mut().unwrap().data_mut().iter_mut().zip(g.data()).zip(bv.data())
                {
                    *o += gi * bi;
                }
                let ib = ensure(acc, *b, bv.shape());
                for ((o, gi), ai) in
                    acc[ib].as_mut().unwrap().data_mut().iter_mut().zip(g.data()).zip(av.data())
                {
                    *o += gi * ai;
                }
            }
            Op::Scale(a, factor) => {
                let ia = ensure(acc, *a, val(*a).shape());
                for (o, gi) in acc[ia].as_mut().unwrap().data_mut().iter_mut().zip(g.data()) {
                    *o += gi * factor;
                }
            }
            Op::MatVec(w, x) => {
                let (wv, xv) = (self.vals[w.0].clone(), self.vals[x.0].clone());
                let iw = ensure(acc, *w, wv.shape());
                {
                    // dW += g ⊗ x
                    let gw = acc[iw].as_mut().unwrap();
                    let cols = wv.cols();
                    for (i, gi) in g.data().iter().enumerate() {
                        if *gi == 0.0 {
                            continue;
                        }
                        let row = &mut gw.data_mut()[i * cols..(i + 1) * cols];
                        for (o, xj) in row.iter_mut().zip(xv.data()) {
                            *o += gi * xj;
                        }
                    }
                }
                let ix = ensure(acc, *x, xv.shape());
                matvec_t_accum(&wv, g.data(), acc[ix].as_mut().unwrap().data_mut());
            }
            Op::MatTVec(m, w) => {
                let (mv, wv) = (self.vals[m.0].clone(), self.vals[w.0].clone());
                let im = ensure(acc, *m, mv.shape());
                {
                    // dM += w ⊗ g
                    let gm = acc[im].as_mut().unwrap();
                    let cols = mv.cols();
                    for (t, wt) in wv.data().iter().enumerate() {
                        if *wt == 0.0 {
                            continue;
                        }
                        let row = &mut gm.data_mut()[t * cols..(t + 1) * cols];
                        for (o, gj) in row.iter_mut().zip(g.data()) {
                            *o += wt * gj;
                        }
                    }
                }
                let iw = ensure(acc, *w, wv.shape());
                {
                    // dw_t += row_t · g
                    let gw = acc[iw].as_mut().unwrap();
                    for t in 0..mv.rows() {
                        let row = mv.row(t);
                        let mut s = 0.0;
                        for (rj, gj) in row.iter().zip(g.data()) {
                            s += rj * gj;
                        }
                        gw.data_mut()[t] += s;
                    }
                }
            }
            Op::Row(m, i) => {
                let shape = val(*m).shape().to_vec();
                let cols = val(*m).cols();
                let im = ensure(acc, *m, &shape);
                let gm = acc[im].as_mut().unwrap();
                let row = &mut gm.data_mut()[i * cols..(i + 1) * cols];
                for (o, gi) in row.iter_mut().zip(g.data()) {
                    *o += gi;
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = val(p).len();
                    let ip = ensure(acc, p, val(p).shape());
                    let gp = acc[ip].as_mut().unwrap();
                    for (o, gi) in gp.data_mut().iter_mut().zip(&g.data()[offset..offset + len]) {
                        *o += gi;
                    }
                    offset += len;
                }
            }
            Op::Slice(x, start, len) => {
                let ix = ensure(acc, *x, val(*x).shape());
                let gx = acc[ix].as_mut().unwrap();
                for (o, gi) in gx.data_mut()[*start..start + len].iter_mut().zip(g.data()) {
                    *o += gi;
                }
            }
            Op::Tanh(x) => {
                let y = self.vals[id].clone();
                let ix = ensure(acc, *x, y.shape());
                for ((o, gi), yi) in
                    acc[ix].as_mut().unwrap().data_mut().iter_mut().zip(g.data()).zip(y.data())
                {
                    *o += gi * (1.0 - yi * yi);
                }
            }
            Op::Sigmoid(x) => {
                let y = self.vals[id].clone();
                let ix = ensure(acc, *x, y.shape());
                for ((o, gi), yi) in
                    acc[ix].as_mut().unwrap().data_mut().iter_mut().zip(g.data()).zip(y.data())
                {
                    *o += gi * yi * (1.0 - yi);
                }
            }
            Op::Ln(x) => {
                let xv = self.vals[x.0].clone();
                let ix = ensure(acc, *x, xv.shape());
                for ((o, gi), xi) in
                    acc[ix].as_mut().unwrap().data_mut().iter_mut().zip(g.data()).zip(xv.data())
                {
                    *o += gi / xi.max(LN_GUARD);
                }
            }
            Op::Softmax(x) => {
                let y = self.vals[id].clone();
                let gy: f64 = g.data().iter().zip(y.data()).map(|(gi, yi)| gi * yi).sum();
                let ix = ensure(acc, *x, y.shape());
                for ((o, gi), yi) in
                    acc[ix].as_mut().unwrap().data_mut().iter_mut().zip(g.data()).zip(y.data())
                {
                    *o += yi * (gi - gy);
                }
            }
            Op::LogSoftmax(x) => {
                let y = self.vals[id].clone();
                let gsum: f64 = g.data().iter().sum();
                let ix = ensure(acc, *x, y.shape());
                for ((o, gi), yi) in
                    acc[ix].as_mut().unwrap().data_mut().iter_mut().zip(g.data()).zip(y.data())
                {
                    *o += gi - yi.exp() * gsum;
                }
            }
            Op::Dot(a, b) => {
                let g0 = g.item();
                let (av, bv) = (self.vals[a.0].clone(), self.vals[b.0].clone());
                let ia = ensure(acc, *a, av.shape());
                for (o, bi) in acc[ia].as_mut().unwrap().data_mut().iter_mut().zip(bv.data()) {
                    *o += g0 * bi;
                }
                let ib = ensure(acc, *b, bv.shape());
                for (o, ai) in acc[ib].as_mut().unwrap().data_mut().iter_mut().zip(av.data()) {
                    *o += g0 * ai;
                }
            }
            Op::Sum(x) => {
                let g0 = g.item();
                let ix = ensure(acc, *x, val(*x).shape());
                for o in acc[ix].as_mut().unwrap().data_mut() {
                    *o += g0;
                }
            }
            Op::Pick(x, i) => {
                let ix = ensure(acc, *x, val(*x).shape());
                acc[ix].as_mut().unwrap().data_mut()[*i] += g.item();
            }
        }
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::MatVec(..) => "matvec",
        Op::MatTVec(..) => "mat_t_vec",
        Op::Row(..) => "row",
        Op::Concat(..) => "concat",
        Op::Slice(..) => "slice",
        Op::Tanh(..) => "tanh",
        Op::Sigmoid(..) => "sigmoid",
        Op::Ln(..) => "ln",
        Op::Softmax(..) => "softmax",
        Op::LogSoftmax(..) => "log_softmax",
        Op::Dot(..) => "dot",
        Op::Sum(..) => "sum",
        Op::Pick(..) => "pick",
    }
}

pub fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_slice(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
