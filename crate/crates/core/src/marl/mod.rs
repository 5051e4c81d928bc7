//! Agent utility networks, ε-greedy action selection and value mixers.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::diffcore::{GruCell, Linear, ParamStore, Tape, Tensor2, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const AGENT_HIDDEN: usize = 64;
pub const MIXER_EMBED: usize = 32;
pub const HYPER_HIDDEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Vdn,
    Qmix,
    TigerMix,
}

impl Algorithm {
    pub fn uses_graph(self) -> bool {
        matches!(self, Algorithm::TigerMix)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Vdn => "vdn",
            Algorithm::Qmix => "qmix",
            Algorithm::TigerMix => "tiger-mix",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vdn" => Ok(Algorithm::Vdn),
            "qmix" => Ok(Algorithm::Qmix),
            "tiger-mix" | "tiger" => Ok(Algorithm::TigerMix),
            other => Err(Error::Config(format!("unknown algorithm '{other}' (expected vdn, qmix or tiger-mix)"))),
        }
    }
}

/// Shared per-agent network: observation encoder, two stacked GRU cells and
/// a Q-head over the top hidden state, optionally concatenated with the
/// agent's temporal embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentNet {
    pub encoder: Linear,
    pub gru1: GruCell,
    pub gru2: GruCell,
    pub head: Linear,
    pub obs_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub n_actions: usize,
}

/// Recurrent state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentHidden {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
}

impl AgentNet {
    /// `embed_dim = 0` builds a plain recurrent Q-network.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        obs_dim: usize,
        hidden_dim: usize,
        n_actions: usize,
        embed_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        let encoder = Linear::new(store, &format!("{name}.enc"), obs_dim, hidden_dim, rng);
        let gru1 = GruCell::new(store, &format!("{name}.gru1"), hidden_dim, hidden_dim, rng);
        let gru2 = GruCell::new(store, &format!("{name}.gru2"), hidden_dim, hidden_dim, rng);
        let head = Linear::new(store, &format!("{name}.head"), hidden_dim + embed_dim, n_actions, rng);
        Self {
            encoder,
            gru1,
            gru2,
            head,
            obs_dim,
            hidden_dim,
            embed_dim,
            n_actions,
        }
    }

    pub fn initial_hidden(&self) -> AgentHidden {
        AgentHidden {
            h1: vec![0.0; self.hidden_dim],
            h2: vec![0.0; self.hidden_dim],
        }
    }

    /// Advances both GRU layers for a batch of agent rows.
    pub fn recurrent(&self, tape: &mut Tape, store: &ParamStore, obs: Var, h1: Var, h2: Var) -> Result<(Var, Var)> {
        let x = self.encoder.forward(tape, store, obs)?;
        let x = tape.relu(x);
        let h1 = self.gru1.forward(tape, store, x, h1)?;
        let h2 = self.gru2.forward(tape, store, h1, h2)?;
        Ok((h1, h2))
    }

    pub fn q_values(&self, tape: &mut Tape, store: &ParamStore, h2: Var, embedding: Option<Var>) -> Result<Var> {
        let x = match (embedding, self.embed_dim) {
            (Some(e), d) if d > 0 => tape.hcat(&[h2, e])?,
            (None, 0) => h2,
            (e, d) => {
                let got = e.map(|v| tape.shape(v)).unwrap_or((0, 0));
                return Err(Error::dim("q_values embedding", got, (tape.shape(h2).0, d)));
            }
        };
        self.head.forward(tape, store, x)
    }
}

/// Plain-value forward of one agent: returns action values and the next
/// recurrent state.
pub fn agent_forward(
    store: &ParamStore,
    net: &AgentNet,
    observation: &[f64],
    prev: &AgentHidden,
    embedding: Option<&[f64]>,
) -> Result<(Vec<f64>, AgentHidden)> {
    let mut tape = Tape::new();
    let o = tape.constant(Tensor2::row_vector(observation.to_vec()));
    let h1 = tape.constant(Tensor2::row_vector(prev.h1.clone()));
    let h2 = tape.constant(Tensor2::row_vector(prev.h2.clone()));
    let (h1, h2) = net.recurrent(&mut tape, store, o, h1, h2)?;
    let e = embedding.map(|e| tape.constant(Tensor2::row_vector(e.to_vec())));
    let q = net.q_values(&mut tape, store, h2, e)?;
    Ok((
        tape.value(q).data().to_vec(),
        AgentHidden {
            h1: tape.value(h1).data().to_vec(),
            h2: tape.value(h2).data().to_vec(),
        },
    ))
}

/// Lowest index among the maxima.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// ε-greedy joint action. One uniform draw is consumed per agent whatever
/// the outcome, plus one more for each exploratory pick.
pub fn select_actions(values: &[Vec<f64>], epsilon: f64, rng: &mut Rng, legal: Option<&[Vec<bool>]>) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let mut actions = Vec::with_capacity(values.len());
    for (i, q) in values.iter().enumerate() {
        let allowed: Vec<usize> = match legal {
            Some(mask) => {
                let m = mask
                    .get(i)
                    .ok_or_else(|| Error::Domain(format!("no legal mask for agent {i}")))?;
                (0..q.len()).filter(|&a| m.get(a).copied().unwrap_or(false)).collect()
            }
            None => (0..q.len()).collect(),
        };
        if allowed.is_empty() {
            return Err(Error::Domain(format!("agent {i} has no legal action")));
        }
        let u: f64 = rng.random();
        let a = if u < epsilon {
            allowed[rng.random_range(0..allowed.len())]
        } else {
            let mut best = allowed[0];
            for &a in &allowed[1..] {
                if q[a] > q[best] {
                    best = a;
                }
            }
            best
        };
        actions.push(a);
    }
    Ok(actions)
}

/// Monotonic hypernetwork mixer. Every weight applied to the agent values
/// passes through `abs`, so `Q_tot` is nondecreasing in each of them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QmixMixer {
    pub hyper_w1: [Linear; 2],
    pub hyper_b1: Linear,
    pub hyper_w2: [Linear; 2],
    pub hyper_b2: [Linear; 2],
    pub n_agents: usize,
    pub cond_dim: usize,
    pub embed_dim: usize,
}

impl QmixMixer {
    pub fn new(store: &mut ParamStore, name: &str, n_agents: usize, cond_dim: usize, rng: &mut Rng) -> Self {
        let e = MIXER_EMBED;
        let h = HYPER_HIDDEN;
        let mut lin = |suffix: &str, i: usize, o: usize, rng: &mut Rng| Linear::new(store, &format!("{name}.{suffix}"), i, o, rng);
        let hyper_w1 = [lin("hw1.0", cond_dim, h, rng), lin("hw1.1", h, n_agents * e, rng)];
        let hyper_b1 = lin("hb1", cond_dim, e, rng);
        let hyper_w2 = [lin("hw2.0", cond_dim, h, rng), lin("hw2.1", h, e, rng)];
        let hyper_b2 = [lin("hb2.0", cond_dim, e, rng), lin("hb2.1", e, 1, rng)];
        Self {
            hyper_w1,
            hyper_b1,
            hyper_w2,
            hyper_b2,
            n_agents,
            cond_dim,
            embed_dim: e,
        }
    }

    fn two_layer(tape: &mut Tape, store: &ParamStore, layers: &[Linear; 2], cond: Var) -> Result<Var> {
        let x = layers[0].forward(tape, store, cond)?;
        let x = tape.relu(x);
        layers[1].forward(tape, store, x)
    }

    /// `qs` is `B × N`, `cond` is `B × C`; returns `B × 1`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, qs: Var, cond: Var) -> Result<Var> {
        let (b, n) = tape.shape(qs);
        let (bc, c) = tape.shape(cond);
        if n != self.n_agents || bc != b || c != self.cond_dim {
            return Err(Error::dim("mixer", (b, n), (bc, c)));
        }
        let w1 = Self::two_layer(tape, store, &self.hyper_w1, cond)?;
        let w1 = tape.abs(w1);
        let b1 = self.hyper_b1.forward(tape, store, cond)?;
        let hidden = tape.row_bmm(qs, w1)?;
        let hidden = tape.add(hidden, b1)?;
        let hidden = tape.elu(hidden);
        let w2 = Self::two_layer(tape, store, &self.hyper_w2, cond)?;
        let w2 = tape.abs(w2);
        let b2 = Self::two_layer(tape, store, &self.hyper_b2, cond)?;
        let out = tape.row_dot(hidden, w2)?;
        tape.add(out, b2)
    }
}

/// The mixer used by a learner. TIGER-MIX is a QMIX mixer whose
/// conditioning is the global state concatenated with all agent embeddings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mixer {
    Vdn,
    Hyper(QmixMixer),
}

impl Mixer {
    pub fn new(store: &mut ParamStore, algo: Algorithm, n_agents: usize, state_dim: usize, embed_dim: usize, rng: &mut Rng) -> Self {
        match algo {
            Algorithm::Vdn => Mixer::Vdn,
            Algorithm::Qmix => Mixer::Hyper(QmixMixer::new(store, "mixer", n_agents, state_dim, rng)),
            Algorithm::TigerMix => {
                Mixer::Hyper(QmixMixer::new(store, "mixer", n_agents, state_dim + n_agents * embed_dim, rng))
            }
        }
    }

    /// `cond` is ignored by the VDN sum.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, qs: Var, cond: Var) -> Result<Var> {
        match self {
            Mixer::Vdn => {
                let (_, n) = tape.shape(qs);
                let ones = tape.constant(Tensor2::filled(n, 1, 1.0));
                tape.matmul(qs, ones)
            }
            Mixer::Hyper(m) => m.forward(tape, store, qs, cond),
        }
    }
}

pub fn vdn_mix(agent_q: &[f64]) -> f64 {
    agent_q.iter().sum()
}

pub fn qmix_mix(store: &ParamStore, mixer: &QmixMixer, agent_q: &[f64], cond: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let q = tape.constant(Tensor2::row_vector(agent_q.to_vec()));
    let c = tape.constant(Tensor2::row_vector(cond.to_vec()));
    let out = mixer.forward(&mut tape, store, q, c)?;
    Ok(tape.value(out).data()[0])
}

/// Conditioning for TIGER-MIX: `s_t ‖ h_1(t) ‖ … ‖ h_N(t)`.
pub fn tiger_conditioning(state: &[f64], embeddings: &[Vec<f64>], n_agents: usize) -> Result<Vec<f64>> {
    if embeddings.len() != n_agents {
        return Err(Error::Domain(format!(
            "expected {n_agents} agent embeddings, got {}",
            embeddings.len()
        )));
    }
    let mut cond = state.to_vec();
    for e in embeddings {
        cond.extend_from_slice(e);
    }
    Ok(cond)
}

pub fn tiger_mix(store: &ParamStore, mixer: &QmixMixer, agent_q: &[f64], state: &[f64], embeddings: &[Vec<f64>]) -> Result<f64> {
    let cond = tiger_conditioning(state, embeddings, mixer.n_agents)?;
    qmix_mix(store, mixer, agent_q, &cond)
}

#[cfg(test)]
mod tests;
