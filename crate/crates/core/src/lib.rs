//! Temporal-graph value decomposition for cooperative multi-agent
//! reinforcement learning.

pub mod cli;
pub mod diffcore;
pub mod envs;
pub mod error;
pub mod learner;
pub mod marl;
pub mod rng;
pub mod tgat;
pub mod tgraph;

pub use error::{Error, Result};
