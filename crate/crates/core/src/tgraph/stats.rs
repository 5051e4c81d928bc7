//! Size accounting for time-unrolled agent graphs.

use serde::Serialize;

use super::{pair_count, static_edge_count, GraphParams};

/// Per-agent temporal neighbourhood size with the static edge pool counted
/// globally: `K_self + s + s·K_nbr` where `s = ⌈K_stat · N(N-1)/2⌉`.
pub fn neighborhood_size(params: &GraphParams, n_agents: usize) -> usize {
    let s = static_edge_count(params.k_stat_nbr, n_agents);
    params.k_past_self + s + s * params.k_past_nbr
}

/// `⌈ln(N·T)⌉`, the self-history depth that keeps self edges `O(NT)`.
pub fn log_self_history_rule(n_agents: usize, horizon: usize) -> usize {
    let nt = (n_agents * horizon).max(1) as f64;
    nt.ln().ceil() as usize
}

/// Edge and node totals for one episode of `horizon` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub n_agents: usize,
    pub horizon: usize,
    pub nodes: usize,
    /// `N(N-1)/2`, the complete graph at one timestep.
    pub static_edges_per_step: usize,
    /// Complete graph summed over the episode.
    pub static_edges_total: usize,
    /// Every node linked to all of its own past instances.
    pub self_history_total: usize,
    /// Every node linked to every past instance of every other agent.
    pub nbr_history_total: usize,
    /// Static edges kept per step after pruning.
    pub bounded_static_per_step: usize,
    pub bounded_static_total: usize,
    /// Self-history edges with the window truncated at `K_past_self` and at `t`.
    pub bounded_self_total: usize,
    /// Directed neighbour-history edges within `K_past_nbr`, both directions per pair.
    pub bounded_nbr_total: usize,
    pub neighborhood_size: usize,
    /// The `N + 1` neighbourhood figure quoted for the default configuration.
    pub compact_claim: usize,
    pub log_rule: usize,
}

pub fn episode_graph_stats(n_agents: usize, horizon: usize, params: &GraphParams) -> GraphStats {
    let pairs = pair_count(n_agents);
    let t_pairs = horizon * horizon.saturating_sub(1);
    let kept = static_edge_count(params.k_stat_nbr, n_agents);
    let window = |k: usize| -> usize { (0..horizon).map(|t| k.min(t)).sum() };
    GraphStats {
        n_agents,
        horizon,
        nodes: n_agents * horizon,
        static_edges_per_step: pairs,
        static_edges_total: pairs * horizon,
        self_history_total: n_agents * t_pairs / 2,
        nbr_history_total: pairs * t_pairs,
        bounded_static_per_step: kept,
        bounded_static_total: kept * horizon,
        bounded_self_total: n_agents * window(params.k_past_self),
        bounded_nbr_total: 2 * kept * window(params.k_past_nbr),
        neighborhood_size: neighborhood_size(params, n_agents),
        compact_claim: n_agents + 1,
        log_rule: log_self_history_rule(n_agents, horizon),
    }
}

impl GraphStats {
    /// Fixed-width text table, one quantity per line.
    pub fn render(&self) -> String {
        let rows: [(&str, usize); 14] = [
            ("agents (N)", self.n_agents),
            ("horizon (T)", self.horizon),
            ("nodes (N*T)", self.nodes),
            ("static edges per step", self.static_edges_per_step),
            ("static edges per episode", self.static_edges_total),
            ("self-history edges (unbounded)", self.self_history_total),
            ("neighbor-history edges (unbounded)", self.nbr_history_total),
            ("static edges per step (pruned)", self.bounded_static_per_step),
            ("static edges per episode (pruned)", self.bounded_static_total),
            ("self-history edges (bounded)", self.bounded_self_total),
            ("neighbor-history edges (bounded)", self.bounded_nbr_total),
            ("neighborhood size |N(v)|", self.neighborhood_size),
            ("compact neighborhood N+1", self.compact_claim),
            ("log-rule k_past_self", self.log_rule),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<36} {v:>12}\n"));
        }
        out
    }
}
