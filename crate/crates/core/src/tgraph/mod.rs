//! Dynamic temporal graphs over agents.
//!
//! At each timestep a GAT layer scores every agent pair, the highest scoring
//! fraction of pairs becomes the static edge set, and each agent is linked
//! to its own recent past and to the recent past of its static neighbours.

mod stats;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use stats::{episode_graph_stats, log_self_history_rule, neighborhood_size, GraphStats};

use crate::diffcore::{softmax, ParamId, ParamStore, Tensor2};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    /// Fraction of the `N(N-1)/2` agent pairs kept as static edges.
    pub k_stat_nbr: f64,
    /// Self-history horizon.
    pub k_past_self: usize,
    /// Neighbour-history horizon.
    pub k_past_nbr: usize,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            k_stat_nbr: 0.5,
            k_past_self: 1,
            k_past_nbr: 1,
        }
    }
}

impl GraphParams {
    pub fn new(k_stat_nbr: f64, k_past_self: usize, k_past_nbr: usize) -> Result<Self> {
        let p = Self {
            k_stat_nbr,
            k_past_self,
            k_past_nbr,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.k_stat_nbr) {
            return Err(Error::Config(format!(
                "k_stat_nbr must lie in [0, 1], got {}",
                self.k_stat_nbr
            )));
        }
        Ok(())
    }
}

/// Number of agent pairs in a complete graph.
pub fn pair_count(n_agents: usize) -> usize {
    n_agents * n_agents.saturating_sub(1) / 2
}

/// `⌈k · N(N-1)/2⌉`, robust to binary rounding of `k` (e.g. `0.3 · 10`).
pub fn static_edge_count(k_stat_nbr: f64, n_agents: usize) -> usize {
    let pairs = pair_count(n_agents);
    let raw = k_stat_nbr * pairs as f64;
    let count = (raw - 1e-9 * raw.max(1.0)).ceil().max(0.0) as usize;
    count.min(pairs)
}

/// A node of the time-unrolled graph: agent `agent` at timestep `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub agent: usize,
    pub t: usize,
}

/// Directed history edge from `(agent, t)` to `(other, tau)` with `tau < t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HistoryEdge {
    pub from: NodeRef,
    pub to: NodeRef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGraph {
    pub t: usize,
    pub n_agents: usize,
    pub nodes: Vec<NodeRef>,
    /// Unordered current-time pairs stored as `(i, j)` with `i < j`, sorted.
    pub static_edges: Vec<(usize, usize)>,
    pub self_history_edges: Vec<HistoryEdge>,
    pub nbr_history_edges: Vec<HistoryEdge>,
}

impl TemporalGraph {
    /// Current-time static neighbours of `agent`, ascending.
    pub fn static_neighbors(&self, agent: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .static_edges
            .iter()
            .filter_map(|&(i, j)| {
                if i == agent {
                    Some(j)
                } else if j == agent {
                    Some(i)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// `N(v_i^t)`: static neighbours, self history and neighbour history,
    /// sorted by `(agent, t)`.
    pub fn neighborhood(&self, agent: usize) -> Vec<NodeRef> {
        let mut set: BTreeSet<NodeRef> = self
            .static_neighbors(agent)
            .into_iter()
            .map(|j| NodeRef { agent: j, t: self.t })
            .collect();
        for e in self.self_history_edges.iter().chain(&self.nbr_history_edges) {
            if e.from.agent == agent {
                set.insert(e.to);
            }
        }
        set.into_iter().collect()
    }
}

/// GAT edge scorer: projection `W` (`d × d'`) and attention vector `a` (`2d'`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatScorer {
    pub weight: ParamId,
    pub attn: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub slope: f64,
}

impl GatScorer {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, slope: f64, rng: &mut Rng) -> Self {
        let weight = store.add_weight(format!("{name}.weight"), in_dim, out_dim, rng);
        let attn = store.add_weight(format!("{name}.attn"), 2 * out_dim, 1, rng);
        Self {
            weight,
            attn,
            in_dim,
            out_dim,
            slope,
        }
    }
}

/// Pairwise attention `α_ij`, normalised over `j ≠ i`; the diagonal is zero.
pub fn score_edges(store: &ParamStore, scorer: &GatScorer, node_feats: &Tensor2) -> Result<Tensor2> {
    let n = node_feats.rows();
    if n < 2 {
        return Err(Error::Domain(format!("edge scoring needs at least 2 agents, got {n}")));
    }
    if node_feats.cols() != scorer.in_dim {
        return Err(Error::dim("score_edges", node_feats.shape(), store.get(scorer.weight).shape()));
    }
    let proj = node_feats.matmul(store.get(scorer.weight))?;
    let a = store.get(scorer.attn).data();
    let d = scorer.out_dim;
    let left: Vec<f64> = (0..n).map(|i| dot(proj.row(i), &a[..d])).collect();
    let right: Vec<f64> = (0..n).map(|j| dot(proj.row(j), &a[d..])).collect();

    let mut attn = Tensor2::zeros(n, n);
    for i in 0..n {
        let logits: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let e = left[i] + right[j];
                if e >= 0.0 {
                    e
                } else {
                    scorer.slope * e
                }
            })
            .collect();
        let w = softmax(&logits)?;
        for (j, wj) in (0..n).filter(|&j| j != i).zip(w) {
            attn.set(i, j, wj);
        }
    }
    Ok(attn)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Keeps the `⌈k · N(N-1)/2⌉` pairs with the highest symmetric score
/// `(α_ij + α_ji)/2`. Ties go to the lexicographically smaller pair.
pub fn prune_topk(attn: &Tensor2, k_stat_nbr: f64) -> Vec<(usize, usize)> {
    let n = attn.rows();
    let keep = static_edge_count(k_stat_nbr, n);
    let mut pairs: Vec<((usize, usize), f64)> = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            pairs.push(((i, j), 0.5 * (attn.get(i, j) + attn.get(j, i))));
        }
    }
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<(usize, usize)> = pairs.into_iter().take(keep).map(|(p, _)| p).collect();
    kept.sort_unstable();
    kept
}

/// Adds self- and neighbour-history edges to a static edge set at time `t`.
/// History windows are truncated at the episode start.
pub fn build_temporal_neighborhood(
    n_agents: usize,
    static_edges: &[(usize, usize)],
    t: usize,
    params: &GraphParams,
) -> TemporalGraph {
    let mut static_edges: Vec<(usize, usize)> = static_edges
        .iter()
        .map(|&(i, j)| if i < j { (i, j) } else { (j, i) })
        .collect();
    static_edges.sort_unstable();
    static_edges.dedup();

    let self_depth = params.k_past_self.min(t);
    let nbr_depth = params.k_past_nbr.min(t);
    let mut self_history_edges = Vec::with_capacity(n_agents * self_depth);
    for agent in 0..n_agents {
        for delta in 1..=self_depth {
            self_history_edges.push(HistoryEdge {
                from: NodeRef { agent, t },
                to: NodeRef { agent, t: t - delta },
            });
        }
    }
    let mut nbr_history_edges = Vec::with_capacity(2 * static_edges.len() * nbr_depth);
    for &(i, j) in &static_edges {
        for (a, b) in [(i, j), (j, i)] {
            for delta in 1..=nbr_depth {
                nbr_history_edges.push(HistoryEdge {
                    from: NodeRef { agent: a, t },
                    to: NodeRef { agent: b, t: t - delta },
                });
            }
        }
    }
    nbr_history_edges.sort_unstable();

    let mut nodes: BTreeSet<NodeRef> = (0..n_agents).map(|agent| NodeRef { agent, t }).collect();
    for e in self_history_edges.iter().chain(&nbr_history_edges) {
        nodes.insert(e.to);
    }
    TemporalGraph {
        t,
        n_agents,
        nodes: nodes.into_iter().collect(),
        static_edges,
        self_history_edges,
        nbr_history_edges,
    }
}

/// Scores, prunes and extends with history in one call.
pub fn construct_graph(
    store: &ParamStore,
    scorer: &GatScorer,
    node_feats: &Tensor2,
    t: usize,
    params: &GraphParams,
) -> Result<TemporalGraph> {
    let n = node_feats.rows();
    let static_edges = if n >= 2 {
        let attn = score_edges(store, scorer, node_feats)?;
        prune_topk(&attn, params.k_stat_nbr)
    } else {
        Vec::new()
    };
    Ok(build_temporal_neighborhood(n, &static_edges, t, params))
}
