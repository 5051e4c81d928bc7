use crate::diffcore::{AdamState, ParamStore, Tape, Tensor2, Var, DEFAULT_LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::marl::{AgentNet, Algorithm, Mixer};
use crate::rng::Rng;
use crate::tgat::{NodeHistory, TemporalEncoder, TgatParams, TimeEncoder};
use crate::tgraph::{construct_graph, GatScorer, GraphParams, TemporalGraph};

use super::{EpisodeBatch, LearnerConfig};

/// Graph scorer and temporal encoder used by TIGER-MIX.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphModule {
    pub scorer: GatScorer,
    pub encoder: TemporalEncoder,
}

/// Online and target parameters with the layer handles into them. Both
/// stores share one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub algorithm: Algorithm,
    pub graph_params: GraphParams,
    pub agent: AgentNet,
    pub graph: Option<GraphModule>,
    pub mixer: Mixer,
    pub online: ParamStore,
    pub target: ParamStore,
    pub adam: AdamState,
    pub n_agents: usize,
    pub n_actions: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
}

/// Result of one timestep of the agent forward pass over `B` episodes.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub h1: Var,
    pub h2: Var,
    /// `B·N × |A|` action values.
    pub q: Var,
    /// `B·N × d` temporal embeddings, when the model uses a graph.
    pub embeddings: Option<Var>,
    pub graphs: Vec<TemporalGraph>,
}

impl Model {
    pub fn new(
        cfg: &LearnerConfig,
        n_agents: usize,
        obs_dim: usize,
        state_dim: usize,
        n_actions: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.dims;
        let mut store = ParamStore::new();
        let uses_graph = cfg.algorithm.uses_graph();
        let embed = if uses_graph { d.embed_dim } else { 0 };
        let agent = AgentNet::new(&mut store, "agent", obs_dim, d.agent_hidden, n_actions, embed, rng);
        let graph = uses_graph.then(|| {
            let scorer = GatScorer::new(&mut store, "gat", d.agent_hidden, d.gat_dim, DEFAULT_LEAKY_SLOPE, rng);
            let time = TimeEncoder::new(&mut store, "time", d.time_dim);
            let tgat = TgatParams::new(
                &mut store,
                "tgat",
                d.agent_hidden,
                d.time_dim,
                d.attn_dim,
                obs_dim,
                d.embed_dim,
                d.embed_dim,
                rng,
            );
            GraphModule {
                scorer,
                encoder: TemporalEncoder { time, tgat },
            }
        });
        let mixer = Mixer::new(&mut store, cfg.algorithm, n_agents, state_dim, d.embed_dim, rng);
        let adam = AdamState::new(&store, cfg.adam);
        Ok(Self {
            algorithm: cfg.algorithm,
            graph_params: cfg.graph,
            agent,
            graph,
            mixer,
            target: store.clone(),
            online: store,
            adam,
            n_agents,
            n_actions,
            obs_dim,
            state_dim,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.agent.hidden_dim
    }

    /// Hard copy of every online parameter into the target set.
    pub fn sync_targets(&mut self) -> Result<()> {
        self.target.copy_from(&self.online)
    }

    /// Advances all agents of `B` episodes by one step. `history` holds the
    /// top-layer hidden states of earlier steps and gains this step's.
    #[allow(clippy::too_many_arguments)]
    pub fn step_forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        t: usize,
        obs: Var,
        h1: Var,
        h2: Var,
        history: &mut NodeHistory,
        n_episodes: usize,
    ) -> Result<StepOutput> {
        let (h1, h2) = self.agent.recurrent(tape, store, obs, h1, h2)?;
        let hidden = tape.value(h2).clone();
        let mut graphs = Vec::new();
        let embeddings = match &self.graph {
            Some(g) => {
                let n = self.n_agents;
                for b in 0..n_episodes {
                    let feats = hidden.slice_rows(b * n, n);
                    graphs.push(construct_graph(store, &g.scorer, &feats, t, &self.graph_params)?);
                }
                let e = g.encoder.encode_batch(tape, store, &graphs, h2, history, obs)?;
                Some(e)
            }
            None => None,
        };
        history.push(hidden);
        let q = self.agent.q_values(tape, store, h2, embeddings)?;
        Ok(StepOutput {
            h1,
            h2,
            q,
            embeddings,
            graphs,
        })
    }

    /// `Q_tot` per episode (`B × 1`) from chosen agent values laid out
    /// `B·N × 1`, states `B × S` and, for TIGER-MIX, embeddings `B·N × d`.
    pub fn mix(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        chosen: Var,
        states: Var,
        embeddings: Option<Var>,
    ) -> Result<Var> {
        let (rows, _) = tape.shape(chosen);
        let b = rows / self.n_agents;
        let qs = tape.reshape(chosen, b, self.n_agents)?;
        let cond = match (self.algorithm, embeddings) {
            (Algorithm::TigerMix, Some(e)) => {
                let (_, d) = tape.shape(e);
                let flat = tape.reshape(e, b, self.n_agents * d)?;
                tape.hcat(&[states, flat])?
            }
            (Algorithm::TigerMix, None) => {
                return Err(Error::Consistency("TIGER-MIX mixing needs agent embeddings".into()));
            }
            _ => states,
        };
        self.mixer.forward(tape, store, qs, cond)
    }

    /// Time-major forward over padded episodes. Rows past an episode's end
    /// see zero observations; callers mask them out.
    pub fn unroll(&self, tape: &mut Tape, store: &ParamStore, episodes: &[&EpisodeBatch]) -> Result<Vec<StepOutput>> {
        let b = episodes.len();
        let n = self.n_agents;
        let rows = b * n;
        let t_max = episodes.iter().map(|e| e.len()).max().unwrap_or(0);
        let mut h1 = tape.constant(Tensor2::zeros(rows, self.hidden_dim()));
        let mut h2 = tape.constant(Tensor2::zeros(rows, self.hidden_dim()));
        let mut history = NodeHistory::new();
        let mut out = Vec::with_capacity(t_max);
        for t in 0..t_max {
            let obs = tape.constant(padded_obs(episodes, t, n, self.obs_dim)?);
            let step = self.step_forward(tape, store, t, obs, h1, h2, &mut history, b)?;
            h1 = step.h1;
            h2 = step.h2;
            history.track_last(h2);
            out.push(step);
        }
        Ok(out)
    }
}

pub(crate) fn padded_obs(episodes: &[&EpisodeBatch], t: usize, n: usize, obs_dim: usize) -> Result<Tensor2> {
    let mut m = Tensor2::zeros(episodes.len() * n, obs_dim);
    for (b, ep) in episodes.iter().enumerate() {
        if let Some(o) = ep.obs.get(t) {
            if o.shape() != (n, obs_dim) {
                return Err(Error::dim("episode observations", o.shape(), (n, obs_dim)));
            }
            m.data_mut()[b * n * obs_dim..(b + 1) * n * obs_dim].copy_from_slice(o.data());
        }
    }
    Ok(m)
}

pub(crate) fn padded_states(episodes: &[&EpisodeBatch], t: usize, state_dim: usize) -> Result<Tensor2> {
    let mut m = Tensor2::zeros(episodes.len(), state_dim);
    for (b, ep) in episodes.iter().enumerate() {
        if let Some(s) = ep.states.get(t) {
            if s.len() != state_dim {
                return Err(Error::dim("episode state", (1, s.len()), (1, state_dim)));
            }
            m.row_mut(b).copy_from_slice(s);
        }
    }
    Ok(m)
}
