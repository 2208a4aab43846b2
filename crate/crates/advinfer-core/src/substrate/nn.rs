//! Recurrent cells and temporal attention as graph builders.
//!
//! Each `*Spec` names a group of parameters inside a [`ParamStore`] and can
//! (a) initialize them and (b) bind them to [`Var`] leaves in a [`Graph`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, Var};
use super::optim::ParamStore;
use super::tensor::Tensor;
use super::SubstrateError;

/// Uniform init in `[-bound, bound]`, row-major draw order.
pub fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(vec![rows, cols], data).expect("consistent dims")
}

pub fn init_vector(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Tensor {
    Tensor::vector((0..len).map(|_| rng.gen_range(-bound..=bound)).collect())
}

/// LSTM cell parameters: one fused `[4H, X]` input matrix, `[4H, H]`
/// recurrent matrix and `[4H]` bias. Gate order is input, forget, cell,
/// output.
#[derive(Debug, Clone)]
pub struct LstmSpec {
    pub prefix: String,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w: Var,
    pub u: Var,
    pub b: Var,
    pub hidden: usize,
}

impl LstmSpec {
    pub fn new(prefix: impl Into<String>, input: usize, hidden: usize) -> Self {
        Self { prefix: prefix.into(), input, hidden }
    }

    pub fn param_names(&self) -> [String; 3] {
        [format!("{}.w", self.prefix), format!("{}.u", self.prefix), format!("{}.b", self.prefix)]
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<(), SubstrateError> {
        let bound = 1.0 / (self.input.max(1) as f64).sqrt();
        let rbound = 1.0 / (self.hidden as f64).sqrt();
        let [w, u, b] = self.param_names();
        store.insert(&w, init_matrix(rng, 4 * self.hidden, self.input, bound))?;
        store.insert(&u, init_matrix(rng, 4 * self.hidden, self.hidden, rbound))?;
        store.insert(&b, Tensor::vector(vec![0.0; 4 * self.hidden]))?;
        Ok(())
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> Result<LstmVars, SubstrateError> {
        let [w, u, b] = self.param_names();
        Ok(LstmVars {
            w: g.param(store, &w)?,
            u: g.param(store, &u)?,
            b: g.param(store, &b)?,
            hidden: self.hidden,
        })
    }
}

/// One LSTM step: gates from `W x + U h + b`, then
/// `c' = f ⊙ c + i ⊙ g`, `h' = o ⊙ tanh(c')`.
pub fn lstm_step(
    g: &mut Graph,
    vars: &LstmVars,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var), SubstrateError> {
    let hid = vars.hidden;
    let wx = g.matvec(vars.w, x)?;
    let uh = g.matvec(vars.u, h_prev)?;
    let pre = g.add(wx, uh)?;
    let z = g.add(pre, vars.b)?;
    let i_gate = {
        let s = g.slice(z, 0, hid)?;
        g.sigmoid(s)?
    };
    let f_gate = {
        let s = g.slice(z, hid, hid)?;
        g.sigmoid(s)?
    };
    let g_gate = {
        let s = g.slice(z, 2 * hid, hid)?;
        g.tanh(s)?
    };
    let o_gate = {
        let s = g.slice(z, 3 * hid, hid)?;
        g.sigmoid(s)?
    };
    let fc = g.mul(f_gate, c_prev)?;
    let ig = g.mul(i_gate, g_gate)?;
    let c = g.add(fc, ig)?;
    let tc = g.tanh(c)?;
    let h = g.mul(o_gate, tc)?;
    Ok((h, c))
}

/// Value-level LSTM state for threading between eval-mode steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self { h: Tensor::zeros(&[hidden]), c: Tensor::zeros(&[hidden]) }
    }
}

/// Single eval-mode cell application (builds a throwaway graph).
pub fn lstm_cell(
    store: &ParamStore,
    spec: &LstmSpec,
    x: &Tensor,
    state: &LstmState,
) -> Result<LstmState, SubstrateError> {
    let mut g = Graph::new();
    let vars = spec.bind(&mut g, store)?;
    let xv = g.constant(x.clone())?;
    let hv = g.constant(state.h.clone())?;
    let cv = g.constant(state.c.clone())?;
    let (h, c) = lstm_step(&mut g, &vars, xv, hv, cv)?;
    Ok(LstmState { h: g.value(h).clone(), c: g.value(c).clone() })
}

/// Bidirectional encoder over a sequence of input vectors: returns the
/// concatenation of the forward pass's last hidden state and the backward
/// pass's last hidden state (`[2H]`).
pub fn bilstm_encode(
    g: &mut Graph,
    fwd: &LstmVars,
    bwd: &LstmVars,
    inputs: &[Var],
) -> Result<Var, SubstrateError> {
    if inputs.is_empty() {
        return Err(SubstrateError::EmptyInput { context: "bilstm_encode" });
    }
    let run = |g: &mut Graph, vars: &LstmVars, seq: &[Var]| -> Result<Var, SubstrateError> {
        let mut h = g.constant(Tensor::zeros(&[vars.hidden]))?;
        let mut c = g.constant(Tensor::zeros(&[vars.hidden]))?;
        for &x in seq {
            let (nh, nc) = lstm_step(g, vars, x, h, c)?;
            h = nh;
            c = nc;
        }
        Ok(h)
    };
    let h_fwd = run(g, fwd, inputs)?;
    let reversed: Vec<Var> = inputs.iter().rev().copied().collect();
    let h_bwd = run(g, bwd, &reversed)?;
    g.concat(&[h_fwd, h_bwd])
}

/// Additive attention scorer parameters:
/// `score(q, s) = w · tanh(W_q q + W_s s + b)`.
#[derive(Debug, Clone)]
pub struct AttentionSpec {
    pub prefix: String,
    pub query_dim: usize,
    pub seg_dim: usize,
    pub attn_dim: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionVars {
    pub wq: Var,
    pub ws: Var,
    pub b: Var,
    pub w: Var,
}

impl AttentionSpec {
    pub fn new(prefix: impl Into<String>, query_dim: usize, seg_dim: usize, attn_dim: usize) -> Self {
        Self { prefix: prefix.into(), query_dim, seg_dim, attn_dim }
    }

    pub fn param_names(&self) -> [String; 4] {
        [
            format!("{}.wq", self.prefix),
            format!("{}.ws", self.prefix),
            format!("{}.b", self.prefix),
            format!("{}.w", self.prefix),
        ]
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<(), SubstrateError> {
        let qb = 1.0 / (self.query_dim.max(1) as f64).sqrt();
        let sb = 1.0 / (self.seg_dim.max(1) as f64).sqrt();
        let ab = 1.0 / (self.attn_dim.max(1) as f64).sqrt();
        let [wq, ws, b, w] = self.param_names();
        store.insert(&wq, init_matrix(rng, self.attn_dim, self.query_dim, qb))?;
        store.insert(&ws, init_matrix(rng, self.attn_dim, self.seg_dim, sb))?;
        store.insert(&b, Tensor::vector(vec![0.0; self.attn_dim]))?;
        store.insert(&w, init_vector(rng, self.attn_dim, ab))?;
        Ok(())
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> Result<AttentionVars, SubstrateError> {
        let [wq, ws, b, w] = self.param_names();
        Ok(AttentionVars {
            wq: g.param(store, &wq)?,
            ws: g.param(store, &ws)?,
            b: g.param(store, &b)?,
            w: g.param(store, &w)?,
        })
    }
}

/// Soft attention over the rows of `segments` (`[T, D]`): softmax-normalized
/// additive scores against `query`, then the weighted row sum. Returns the
/// attended vector and the weights.
pub fn temporal_attention(
    g: &mut Graph,
    vars: &AttentionVars,
    query: Var,
    segments: Var,
) -> Result<(Var, Var), SubstrateError> {
    let t = g.value(segments).rows();
    if t == 0 || g.value(segments).shape().len() != 2 {
        return Err(SubstrateError::EmptyInput { context: "temporal_attention" });
    }
    let qp = g.matvec(vars.wq, query)?;
    let mut scores = Vec::with_capacity(t);
    for ti in 0..t {
        let seg = g.row(segments, ti)?;
        let sp = g.matvec(vars.ws, seg)?;
        let pre = g.add(qp, sp)?;
        let act = {
            let z = g.add(pre, vars.b)?;
            g.tanh(z)?
        };
        scores.push(g.dot(vars.w, act)?);
    }
    let score_vec = g.concat(&scores)?;
    let weights = g.softmax(score_vec)?;
    let attended = g.mat_t_vec(segments, weights)?;
    Ok((attended, weights))
}
