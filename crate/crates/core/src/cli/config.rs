//! Run configuration: a TOML file with `env`, `algo`, `graph`, `train`,
//! `eval` and `io` sections. Every key is optional.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffcore::AdamConfig;
use crate::envs::{EnvSpec, GatherConfig, TagConfig};
use crate::error::{Error, Result};
use crate::learner::{LearnerConfig, NetDims, Schedule, TdLambdaConfig};
use crate::marl::Algorithm;
use crate::tgraph::{log_self_history_rule, GraphParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvName {
    Gather,
    Tag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub name: EnvName,
    pub gather: GatherConfig,
    pub tag: TagConfig,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            name: EnvName::Gather,
            gather: GatherConfig::default(),
            tag: TagConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgoSection {
    pub name: Algorithm,
    pub agent_hidden: usize,
    pub gat_dim: usize,
    pub time_dim: usize,
    pub attn_dim: usize,
    pub embed_dim: usize,
}

impl Default for AlgoSection {
    fn default() -> Self {
        let d = NetDims::default();
        Self {
            name: Algorithm::TigerMix,
            agent_hidden: d.agent_hidden,
            gat_dim: d.gat_dim,
            time_dim: d.time_dim,
            attn_dim: d.attn_dim,
            embed_dim: d.embed_dim,
        }
    }
}

/// Self-history depth: a fixed count or `"log-rule"` for `⌈ln(N·T)⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PastSelf {
    Steps(usize),
    Rule(LogRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogRule {
    #[serde(rename = "log-rule")]
    LogRule,
}

impl std::fmt::Display for PastSelf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PastSelf::Steps(k) => write!(f, "{k}"),
            PastSelf::Rule(_) => f.write_str("log-rule"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    pub k_stat_nbr: f64,
    pub k_past_self: PastSelf,
    pub k_past_nbr: usize,
}

impl Default for GraphSection {
    fn default() -> Self {
        let g = GraphParams::default();
        Self {
            k_stat_nbr: g.k_stat_nbr,
            k_past_self: PastSelf::Steps(g.k_past_self),
            k_past_nbr: g.k_past_nbr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub total_env_steps: u64,
    pub seeds: Vec<u64>,
    pub gamma: f64,
    pub lambda: f64,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub target_update_interval: u64,
    pub grad_clip: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_steps: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let td = TdLambdaConfig::default();
        let adam = AdamConfig::default();
        let eps = Schedule::default();
        let l = LearnerConfig::default();
        Self {
            total_env_steps: 200_000,
            seeds: vec![0, 1, 2, 3, 4],
            gamma: td.gamma,
            lambda: td.lambda,
            lr: adam.lr,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_eps: adam.eps,
            buffer_capacity: l.buffer_capacity,
            batch_size: l.batch_size,
            target_update_interval: l.target_update_interval,
            grad_clip: l.grad_clip,
            epsilon_start: eps.start,
            epsilon_end: eps.end,
            epsilon_anneal_steps: eps.anneal_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub interval: u64,
    pub episodes: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            interval: 10_000,
            episodes: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub out_dir: PathBuf,
    /// Env steps between checkpoints; 0 keeps only the final one.
    pub checkpoint_interval: u64,
    /// Writes real elapsed time into metrics; off keeps files reproducible.
    pub record_wall_time: bool,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("runs"),
            checkpoint_interval: 50_000,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub env: EnvSection,
    pub algo: AlgoSection,
    pub graph: GraphSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub io: IoSection,
}

impl TrainConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
                .unwrap_or(0);
            Error::Parse {
                path: origin.to_string(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        cfg.validate().map_err(|e| match e {
            Error::Config(msg) => {
                let line = msg
                    .split_once(' ')
                    .and_then(|(key, _)| locate_key(text, key))
                    .map(|l| format!("{origin}:{l}: "))
                    .unwrap_or_else(|| format!("{origin}: "));
                Error::Config(format!("{line}{msg}"))
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn env_spec(&self) -> EnvSpec {
        match self.env.name {
            EnvName::Gather => EnvSpec::Gather(self.env.gather.clone()),
            EnvName::Tag => EnvSpec::Tag(self.env.tag.clone()),
        }
    }

    /// Graph parameters with the log rule resolved against the controlled
    /// agent count and horizon of the selected environment.
    pub fn graph_params(&self) -> GraphParams {
        let spec = self.env_spec();
        let k_past_self = match self.graph.k_past_self {
            PastSelf::Steps(k) => k,
            PastSelf::Rule(_) => log_self_history_rule(spec.n_agents(), spec.horizon()),
        };
        GraphParams {
            k_stat_nbr: self.graph.k_stat_nbr,
            k_past_self,
            k_past_nbr: self.graph.k_past_nbr,
        }
    }

    pub fn learner_config(&self) -> LearnerConfig {
        let t = &self.train;
        LearnerConfig {
            algorithm: self.algo.name,
            graph: self.graph_params(),
            dims: NetDims {
                agent_hidden: self.algo.agent_hidden,
                gat_dim: self.algo.gat_dim,
                time_dim: self.algo.time_dim,
                attn_dim: self.algo.attn_dim,
                embed_dim: self.algo.embed_dim,
            },
            td: TdLambdaConfig {
                gamma: t.gamma,
                lambda: t.lambda,
            },
            adam: AdamConfig {
                lr: t.lr,
                beta1: t.adam_beta1,
                beta2: t.adam_beta2,
                eps: t.adam_eps,
            },
            schedule: Schedule {
                start: t.epsilon_start,
                end: t.epsilon_end,
                anneal_steps: t.epsilon_anneal_steps,
            },
            buffer_capacity: t.buffer_capacity,
            batch_size: t.batch_size,
            target_update_interval: t.target_update_interval,
            grad_clip: t.grad_clip,
        }
    }

    /// Range checks. Messages start with the dotted key they concern.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: String| Err(Error::Config(format!("{key} {why}")));
        let g = &self.graph;
        if !(0.0..=1.0).contains(&g.k_stat_nbr) {
            return bad("graph.k_stat_nbr", format!("= {} is outside [0, 1]", g.k_stat_nbr));
        }
        let t = &self.train;
        if !(0.0..1.0).contains(&t.gamma) {
            return bad("train.gamma", format!("= {} is outside [0, 1)", t.gamma));
        }
        if !(0.0..=1.0).contains(&t.lambda) {
            return bad("train.lambda", format!("= {} is outside [0, 1]", t.lambda));
        }
        if !(t.lr > 0.0) {
            return bad("train.lr", format!("= {} must be positive", t.lr));
        }
        if !(0.0..1.0).contains(&t.adam_beta1) || !(0.0..1.0).contains(&t.adam_beta2) || !(t.adam_eps > 0.0) {
            return bad("train.adam_beta1", "/ adam_beta2 must lie in [0, 1) and adam_eps must be positive".into());
        }
        if t.batch_size == 0 {
            return bad("train.batch_size", "must be positive".into());
        }
        if t.buffer_capacity < t.batch_size {
            return bad(
                "train.buffer_capacity",
                format!("= {} is smaller than batch_size {}", t.buffer_capacity, t.batch_size),
            );
        }
        if t.target_update_interval == 0 {
            return bad("train.target_update_interval", "must be positive".into());
        }
        if !(t.grad_clip > 0.0) {
            return bad("train.grad_clip", format!("= {} must be positive", t.grad_clip));
        }
        if !(0.0..=1.0).contains(&t.epsilon_start) || !(0.0..=1.0).contains(&t.epsilon_end) || t.epsilon_end > t.epsilon_start {
            return bad(
                "train.epsilon_start",
                format!("/ epsilon_end must satisfy 0 <= end <= start <= 1 (got {} and {})", t.epsilon_start, t.epsilon_end),
            );
        }
        if t.seeds.is_empty() {
            return bad("train.seeds", "must list at least one seed".into());
        }
        if self.eval.interval == 0 || self.eval.episodes == 0 {
            return bad("eval.interval", "and eval.episodes must be positive".into());
        }
        let a = &self.algo;
        if [a.agent_hidden, a.gat_dim, a.time_dim, a.attn_dim, a.embed_dim].contains(&0) {
            return bad("algo.agent_hidden", "and the other network widths must be positive".into());
        }
        self.env.gather.validate()?;
        self.env.tag.validate()?;
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    TrainConfig::from_toml_str(&text, &path.display().to_string())
}

/// 1-based line of `section.key = ...` in a TOML document.
fn locate_key(text: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.rsplit_once('.')?;
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        let k = k.trim();
        if (current == section && k == key) || (current.is_empty() && k == dotted) {
            return Some(i + 1);
        }
    }
    None
}

fn describe(key: &str) -> &'static str {
    match key {
        "env.name" => "benchmark: gather | tag",
        "env.gather.n_agents" => "agents in Gather",
        "env.gather.horizon" => "maximum episode length",
        "env.gather.n_goals" => "number of goals",
        "env.gather.n_informed" => "agents told the optimal goal each episode",
        "env.tag.n_pursuers" => "learning pursuers",
        "env.tag.n_adversaries" => "scripted evaders",
        "env.tag.horizon" => "episode length",
        "env.tag.n_obstacles" => "static circular obstacles",
        "env.tag.obstacle_radius" => "obstacle radius",
        "env.tag.arena_half_width" => "arena spans [-w, w] on both axes",
        "env.tag.pursuer_speed" => "pursuer displacement per step",
        "env.tag.adversary_speed" => "evader displacement per step (must exceed pursuer_speed)",
        "env.tag.collision_radius" => "tag distance",
        "env.tag.max_placement_retries" => "rejection-sampling budget at reset",
        "algo.name" => "vdn | qmix | tiger-mix",
        "algo.agent_hidden" => "GRU width of each of the two agent layers",
        "algo.gat_dim" => "projection width of the static-graph scorer",
        "algo.time_dim" => "time-encoding width",
        "algo.attn_dim" => "query/key/value width of temporal attention",
        "algo.embed_dim" => "temporal embedding width",
        "graph.k_stat_nbr" => "fraction of agent pairs kept as static edges, in [0, 1]",
        "graph.k_past_self" => "self-history depth, integer or \"log-rule\"",
        "graph.k_past_nbr" => "neighbour-history depth",
        "train.total_env_steps" => "environment steps per seed",
        "train.seeds" => "independent trials",
        "train.gamma" => "discount factor",
        "train.lambda" => "TD(lambda) trace parameter",
        "train.lr" => "Adam learning rate",
        "train.adam_beta1" => "Adam first-moment decay",
        "train.adam_beta2" => "Adam second-moment decay",
        "train.adam_eps" => "Adam denominator offset",
        "train.buffer_capacity" => "episodes kept for replay",
        "train.batch_size" => "episodes per update",
        "train.target_update_interval" => "learner steps between target syncs",
        "train.grad_clip" => "global gradient-norm limit",
        "train.epsilon_start" => "initial exploration rate",
        "train.epsilon_end" => "final exploration rate",
        "train.epsilon_anneal_steps" => "env steps of linear annealing",
        "eval.interval" => "env steps between evaluations",
        "eval.episodes" => "greedy episodes per evaluation",
        "io.out_dir" => "output directory",
        "io.checkpoint_interval" => "env steps between checkpoints (0: final only)",
        "io.record_wall_time" => "write elapsed seconds into metrics",
        _ => "",
    }
}

/// Key reference with defaults, as printed by `--help-config`.
pub fn config_reference() -> String {
    let value = toml::Table::try_from(TrainConfig::default()).expect("config serializes");
    let mut out = String::from("# All keys are optional; values shown are the defaults.\n");
    fn walk(prefix: &str, table: &toml::Table, out: &mut String) {
        let (leaves, tables): (Vec<_>, Vec<_>) = table.iter().partition(|(_, v)| !v.is_table());
        if !leaves.is_empty() {
            let _ = writeln!(out, "\n[{prefix}]");
        }
        for (k, v) in leaves {
            let key = format!("{prefix}.{k}");
            let _ = writeln!(out, "{:<40} # {}", format!("{k} = {v}"), describe(&key));
        }
        for (k, v) in tables {
            let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            walk(&name, v.as_table().expect("table"), out);
        }
    }
    for section in ["env", "algo", "graph", "train", "eval", "io"] {
        if let Some(t) = value.get(section).and_then(|v| v.as_table()) {
            walk(section, t, &mut out);
        }
    }
    out
}
