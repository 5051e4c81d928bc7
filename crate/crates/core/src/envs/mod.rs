//! Cooperative benchmarks behind one episodic interface.

mod gather;
mod tag;
mod trace;

use std::collections::BTreeMap;

pub use gather::{Gather, GatherConfig};
pub use tag::{Tag, TagConfig};
pub use trace::{TraceRecord, TraceWriter};

use crate::error::Result;
use crate::rng::Rng;

/// Which benchmark to build, with its settings.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Gather(GatherConfig),
    Tag(TagConfig),
}

impl EnvSpec {
    pub fn build(&self) -> Result<Box<dyn Env>> {
        Ok(match self {
            EnvSpec::Gather(c) => Box::new(Gather::new(c.clone())?),
            EnvSpec::Tag(c) => Box::new(Tag::new(c.clone())?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::Gather(_) => "gather",
            EnvSpec::Tag(_) => "tag",
        }
    }

    /// Gather is scored by win rate, Tag by episode return.
    pub fn metric(&self) -> EvalMetric {
        match self {
            EnvSpec::Gather(_) => EvalMetric::WinRate,
            EnvSpec::Tag(_) => EvalMetric::Return,
        }
    }

    pub fn n_agents(&self) -> usize {
        match self {
            EnvSpec::Gather(c) => c.n_agents,
            EnvSpec::Tag(c) => c.n_pursuers,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvSpec::Gather(c) => c.horizon,
            EnvSpec::Tag(c) => c.horizon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMetric {
    WinRate,
    Return,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStepResult {
    pub observations: Vec<Vec<f64>>,
    pub global_state: Vec<f64>,
    /// Shared team reward.
    pub reward: f64,
    pub terminated: bool,
    pub info: BTreeMap<String, f64>,
}

pub trait Env: Send {
    fn name(&self) -> &'static str;
    fn n_agents(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn reset(&mut self, rng: &mut Rng) -> Result<EnvStepResult>;
    fn step(&mut self, actions: &[usize]) -> Result<EnvStepResult>;

    /// Whether the episode that just ended counts as a success.
    fn is_win(&self, info: &BTreeMap<String, f64>) -> bool {
        info.get("win").copied().unwrap_or(0.0) > 0.0
    }
}

pub(crate) fn check_actions(actions: &[usize], n_agents: usize, n_actions: usize) -> Result<()> {
    use crate::error::Error;
    if actions.len() != n_agents {
        return Err(Error::Domain(format!(
            "expected {n_agents} actions, got {}",
            actions.len()
        )));
    }
    if let Some((i, a)) = actions.iter().enumerate().find(|(_, &a)| a >= n_actions) {
        return Err(Error::Domain(format!(
            "agent {i} action {a} out of range 0..{n_actions}"
        )));
    }
    Ok(())
}
