//! Episode collection, replay, TD(λ) targets and the training loop.

mod buffer;
mod model;
mod rollout;
mod targets;
mod trainer;

pub use buffer::{EpisodeBatch, ReplayBuffer};
pub use model::{GraphModule, Model, StepOutput};
pub use rollout::{collect_episode, evaluate, mean_std, EpisodeSummary, EvalResult};
pub use targets::{lambda_returns, td_lambda_targets};
pub use trainer::{td_loss, TrainOutcome, Trainer};

use crate::diffcore::AdamConfig;
use crate::error::{Error, Result};
use crate::marl::Algorithm;
use crate::tgraph::GraphParams;

/// Linear ε anneal, clamped at `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            anneal_steps: 200_000,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.start) && (0.0..=1.0).contains(&self.end) && self.end <= self.start;
        if !ok {
            return Err(Error::Config(format!(
                "epsilon schedule must satisfy 0 <= end <= start <= 1 (got start {}, end {})",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

pub fn epsilon_at(schedule: &Schedule, step: u64) -> f64 {
    if schedule.anneal_steps == 0 || step >= schedule.anneal_steps {
        return schedule.end;
    }
    let frac = step as f64 / schedule.anneal_steps as f64;
    schedule.start + (schedule.end - schedule.start) * frac
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdLambdaConfig {
    pub gamma: f64,
    pub lambda: f64,
}

impl Default for TdLambdaConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.8,
        }
    }
}

impl TdLambdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Layer widths of every network in a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetDims {
    pub agent_hidden: usize,
    pub gat_dim: usize,
    pub time_dim: usize,
    pub attn_dim: usize,
    pub embed_dim: usize,
}

impl Default for NetDims {
    fn default() -> Self {
        Self {
            agent_hidden: 64,
            gat_dim: 32,
            time_dim: 16,
            attn_dim: 32,
            embed_dim: 32,
        }
    }
}

/// Everything the learner needs besides the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub graph: GraphParams,
    pub dims: NetDims,
    pub td: TdLambdaConfig,
    pub adam: AdamConfig,
    pub schedule: Schedule,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub target_update_interval: u64,
    pub grad_clip: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::TigerMix,
            graph: GraphParams::default(),
            dims: NetDims::default(),
            td: TdLambdaConfig::default(),
            adam: AdamConfig::default(),
            schedule: Schedule::default(),
            buffer_capacity: 5000,
            batch_size: 32,
            target_update_interval: 200,
            grad_clip: 10.0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.td.validate()?;
        self.schedule.validate()?;
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::Config(format!(
                "batch_size must be positive and at most buffer_capacity ({} vs {})",
                self.batch_size, self.buffer_capacity
            )));
        }
        if self.target_update_interval == 0 {
            return Err(Error::Config("target_update_interval must be positive".into()));
        }
        if !(self.grad_clip > 0.0) || !(self.adam.lr > 0.0) {
            return Err(Error::Config("grad_clip and lr must be positive".into()));
        }
        let d = self.dims;
        if [d.agent_hidden, d.gat_dim, d.time_dim, d.attn_dim, d.embed_dim].contains(&0) {
            return Err(Error::Config("network widths must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
