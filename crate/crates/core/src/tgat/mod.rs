//! Temporal graph attention encoder.
//!
//! For agent `i` at time `t` the feature matrix stacks the agent's own
//! embedding with `φ(0)` and, for every node `(j, τ)` of its temporal
//! neighbourhood, `h_j(τ) ‖ φ(t - τ)`. A single attention head with the self
//! row as query aggregates the neighbour rows, and a two-layer feed-forward
//! network fuses the message with the agent's current observation.

use crate::diffcore::{Linear, ParamId, ParamStore, Tape, Tensor2, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tgraph::{NodeRef, TemporalGraph};

/// Learnable cosine time encoding `φ(Δt)_k = cos(ω_k Δt + b_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeEncoder {
    pub omega: ParamId,
    pub phase: ParamId,
    pub dim: usize,
}

impl TimeEncoder {
    /// Frequencies start geometrically spaced in `[0.01, 1]`, phases at zero.
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let omega: Vec<f64> = (0..dim)
            .map(|k| {
                let frac = if dim > 1 { k as f64 / (dim - 1) as f64 } else { 0.0 };
                10f64.powf(-2.0 * frac)
            })
            .collect();
        let omega = store.add(format!("{name}.omega"), Tensor2::row_vector(omega));
        let phase = store.add_bias(format!("{name}.phase"), dim);
        Self { omega, phase, dim }
    }

    /// One row of `φ` per entry of `deltas`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, deltas: &[f64]) -> Result<Var> {
        let d = tape.constant(Tensor2::from_vec(deltas.len(), 1, deltas.to_vec())?);
        let w = tape.param(store, self.omega);
        let b = tape.param(store, self.phase);
        let wd = tape.matmul(d, w)?;
        let arg = tape.add_row(wd, b)?;
        Ok(tape.cos(arg))
    }
}

pub fn time_encode(store: &ParamStore, enc: &TimeEncoder, delta_t: usize) -> Vec<f64> {
    let omega = store.get(enc.omega).data();
    let phase = store.get(enc.phase).data();
    omega
        .iter()
        .zip(phase)
        .map(|(w, b)| (w * delta_t as f64 + b).cos())
        .collect()
}

/// Projections for temporal attention plus the fusion network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TgatParams {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub fuse_in: Linear,
    pub fuse_out: Linear,
    pub embed_dim: usize,
    pub time_dim: usize,
    pub latent_dim: usize,
    pub obs_dim: usize,
}

impl TgatParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        embed_dim: usize,
        time_dim: usize,
        latent_dim: usize,
        obs_dim: usize,
        fuse_hidden: usize,
        out_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let row = embed_dim + time_dim;
        let w_q = store.add_weight(format!("{name}.w_q"), row, latent_dim, rng);
        let w_k = store.add_weight(format!("{name}.w_k"), row, latent_dim, rng);
        let w_v = store.add_weight(format!("{name}.w_v"), row, latent_dim, rng);
        let fuse_in = Linear::new(store, &format!("{name}.fuse0"), latent_dim + obs_dim, fuse_hidden, rng);
        let fuse_out = Linear::new(store, &format!("{name}.fuse1"), fuse_hidden, out_dim, rng);
        Self {
            w_q,
            w_k,
            w_v,
            fuse_in,
            fuse_out,
            embed_dim,
            time_dim,
            latent_dim,
            obs_dim,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.fuse_out.out_dim
    }

    /// Returns `(α, h̃)` for a feature matrix whose first row is the query.
    /// Without neighbour rows the message is zero and `α` is empty.
    pub fn attend(&self, tape: &mut Tape, store: &ParamStore, z: Var) -> Result<(Option<Var>, Var)> {
        let (rows, cols) = tape.shape(z);
        if cols != self.embed_dim + self.time_dim || rows == 0 {
            return Err(Error::dim("temporal_attention", (rows, cols), (1, self.embed_dim + self.time_dim)));
        }
        if rows == 1 {
            return Ok((None, tape.constant(Tensor2::zeros(1, self.latent_dim))));
        }
        let w_q = tape.param(store, self.w_q);
        let w_k = tape.param(store, self.w_k);
        let w_v = tape.param(store, self.w_v);
        let query_row = tape.slice_rows(z, 0, 1)?;
        let nbr_rows = tape.slice_rows(z, 1, rows - 1)?;
        let q = tape.matmul(query_row, w_q)?;
        let k = tape.matmul(nbr_rows, w_k)?;
        let v = tape.matmul(nbr_rows, w_v)?;
        let kt = tape.transpose(k);
        let logits = tape.matmul(q, kt)?;
        let alpha = tape.softmax_rows(logits)?;
        let msg = tape.matmul(alpha, v)?;
        Ok((Some(alpha), msg))
    }

    /// `ReLU([h̃ ‖ o]·W_0 + b_0)·W_1 + b_1`, row-wise.
    pub fn fuse(&self, tape: &mut Tape, store: &ParamStore, message: Var, obs: Var) -> Result<Var> {
        let x = tape.hcat(&[message, obs])?;
        let h = self.fuse_in.forward(tape, store, x)?;
        let h = tape.relu(h);
        self.fuse_out.forward(tape, store, h)
    }
}

/// Time encoder and attention/fusion parameters used together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalEncoder {
    pub time: TimeEncoder,
    pub tgat: TgatParams,
}

/// Base embeddings `h_j(τ)` recorded along an episode, one matrix per
/// timestep with one row per agent (or per agent and episode when batched).
/// A step may also remember the tape variable it came from, in which case
/// attention over it stays differentiable on that tape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeHistory {
    steps: Vec<Tensor2>,
    vars: Vec<Option<Var>>,
}

impl NodeHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, embeddings: Tensor2) {
        self.steps.push(embeddings);
        self.vars.push(None);
    }

    /// Ties the most recent step to `var`, which must hold the same values.
    pub fn track_last(&mut self, var: Var) {
        if let Some(slot) = self.vars.last_mut() {
            *slot = Some(var);
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn at(&self, t: usize) -> Option<&Tensor2> {
        self.steps.get(t)
    }

    pub fn get(&self, node: NodeRef) -> Result<&[f64]> {
        self.steps
            .get(node.t)
            .filter(|m| node.agent < m.rows())
            .map(|m| m.row(node.agent))
            .ok_or_else(|| Error::Consistency(format!("no recorded embedding for agent {} at t={}", node.agent, node.t)))
    }
}

/// `Z_i(t)` on plain values: row 0 is `self_embed ‖ φ(0)`, then one row per
/// neighbour in the order given.
pub fn build_feature_matrix(
    store: &ParamStore,
    time: &TimeEncoder,
    self_embed: &[f64],
    neighbors: &[(Vec<f64>, usize)],
    t: usize,
) -> Result<Tensor2> {
    let mut rows = Vec::with_capacity(neighbors.len() + 1);
    let mut row = self_embed.to_vec();
    row.extend(time_encode(store, time, 0));
    rows.push(row);
    for (embed, tau) in neighbors {
        if *tau > t {
            return Err(Error::Domain(format!("neighbour timestamp {tau} is after t={t}")));
        }
        let mut row = embed.clone();
        row.extend(time_encode(store, time, t - tau));
        rows.push(row);
    }
    Tensor2::from_rows(&rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub weights: Vec<f64>,
    pub message: Vec<f64>,
}

pub fn temporal_attention(store: &ParamStore, params: &TgatParams, z: &Tensor2) -> Result<AttentionOutput> {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let (alpha, msg) = params.attend(&mut tape, store, zv)?;
    Ok(AttentionOutput {
        weights: alpha.map(|a| tape.value(a).data().to_vec()).unwrap_or_default(),
        message: tape.value(msg).data().to_vec(),
    })
}

pub fn fuse(store: &ParamStore, params: &TgatParams, message: &[f64], observation: &[f64]) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let m = tape.constant(Tensor2::row_vector(message.to_vec()));
    let o = tape.constant(Tensor2::row_vector(observation.to_vec()));
    let h = params.fuse(&mut tape, store, m, o)?;
    Ok(tape.value(h).data().to_vec())
}

impl TemporalEncoder {
    /// Embeddings `h_i(t)` for `B` episodes at the same timestep `t`.
    ///
    /// Row `b·N + i` of `current`, `obs` and every `history` step belongs to
    /// agent `i` of episode `b`. Earlier timesteps use their tracked tape
    /// variable when `history` has one and enter as constants otherwise.
    pub fn encode_batch(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graphs: &[TemporalGraph],
        current: Var,
        history: &NodeHistory,
        obs: Var,
    ) -> Result<Var> {
        let Some(first) = graphs.first() else {
            return Err(Error::Domain("encode_batch needs at least one graph".into()));
        };
        let (n, t) = (first.n_agents, first.t);
        if graphs.iter().any(|g| g.n_agents != n || g.t != t) {
            return Err(Error::Consistency("graphs in a batch must share N and t".into()));
        }
        let r = graphs.len() * n;
        let (rows, d0) = tape.shape(current);
        if rows != r || d0 != self.tgat.embed_dim {
            return Err(Error::dim("encode_batch", (rows, d0), (r, self.tgat.embed_dim)));
        }

        let mut depth = 0;
        let mut groups = Vec::with_capacity(r);
        for (b, g) in graphs.iter().enumerate() {
            for i in 0..n {
                let nbrs = g.neighborhood(i);
                depth = nbrs.iter().map(|v| t - v.t).fold(depth, usize::max);
                groups.push(nbrs.iter().map(|v| (t - v.t) * r + b * n + v.agent).collect());
            }
        }

        let mut parts = vec![current];
        for delta in 1..=depth {
            let step = history
                .at(t - delta)
                .filter(|m| m.shape() == (r, d0))
                .ok_or_else(|| Error::Consistency(format!("no recorded embeddings at t={}", t - delta)))?;
            let var = match history.vars[t - delta] {
                Some(v) => v,
                None => tape.constant(step.clone()),
            };
            parts.push(var);
        }
        let h = tape.vcat(&parts)?;
        let deltas: Vec<f64> = (0..=depth).flat_map(|d| std::iter::repeat_n(d as f64, r)).collect();
        let phi = self.time.forward(tape, store, &deltas)?;
        let z = tape.hcat(&[h, phi])?;

        let w_q = tape.param(store, self.tgat.w_q);
        let w_k = tape.param(store, self.tgat.w_k);
        let w_v = tape.param(store, self.tgat.w_v);
        let z_now = tape.slice_rows(z, 0, r)?;
        let q = tape.matmul(z_now, w_q)?;
        let k = tape.matmul(z, w_k)?;
        let v = tape.matmul(z, w_v)?;
        let msg = tape.group_attention(q, k, v, groups)?;
        self.tgat.fuse(tape, store, msg, obs)
    }
}

/// Plain-value encoding of every agent; `history` must contain step `graph.t`.
pub fn encode_all(
    store: &ParamStore,
    encoder: &TemporalEncoder,
    graph: &TemporalGraph,
    history: &NodeHistory,
    observations: &Tensor2,
) -> Result<Tensor2> {
    let current = history
        .at(graph.t)
        .ok_or_else(|| Error::Consistency(format!("no recorded embeddings at t={}", graph.t)))?;
    let mut tape = Tape::new();
    let cur = tape.constant(current.clone());
    let obs = tape.constant(observations.clone());
    let out = encoder.encode_batch(&mut tape, store, std::slice::from_ref(graph), cur, history, obs)?;
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests;
