//! Python bindings: environments, graph accounting, TD(λ) targets and the trainer.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tiger_core::cli::{run_train, Checkpoint, TrainConfig};
use tiger_core::envs::{Env, EnvStepResult, GatherConfig, TagConfig};
use tiger_core::learner::{TdLambdaConfig, TrainOutcome};
use tiger_core::rng::{seeded, Rng};
use tiger_core::tgraph::GraphParams;
use tiger_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Dimension { .. } | Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

type StepTuple = (Vec<Vec<f64>>, Vec<f64>, f64, bool, BTreeMap<String, f64>);

fn unpack(r: EnvStepResult) -> StepTuple {
    (r.observations, r.global_state, r.reward, r.terminated, r.info)
}

/// Shared environment wrapper with its own seeded generator.
struct EnvCore<E> {
    env: E,
    rng: Rng,
}

impl<E: Env> EnvCore<E> {
    fn reset(&mut self, seed: Option<u64>) -> PyResult<StepTuple> {
        if let Some(s) = seed {
            self.rng = seeded(s);
        }
        self.env.reset(&mut self.rng).map(unpack).map_err(to_py)
    }

    fn step(&mut self, actions: Vec<usize>) -> PyResult<StepTuple> {
        self.env.step(&actions).map(unpack).map_err(to_py)
    }
}

/// Goal-coordination game. `step` returns `(obs, state, reward, terminated, info)`.
#[pyclass]
struct Gather {
    core: EnvCore<tiger_core::envs::Gather>,
}

#[pymethods]
impl Gather {
    #[new]
    #[pyo3(signature = (n_agents=5, horizon=8, n_goals=3, n_informed=2, seed=0))]
    fn new(n_agents: usize, horizon: usize, n_goals: usize, n_informed: usize, seed: u64) -> PyResult<Self> {
        let cfg = GatherConfig {
            n_agents,
            horizon,
            n_goals,
            n_informed,
        };
        let env = tiger_core::envs::Gather::new(cfg).map_err(to_py)?;
        Ok(Self {
            core: EnvCore {
                env,
                rng: seeded(seed),
            },
        })
    }

    #[pyo3(signature = (seed=None))]
    fn reset(&mut self, seed: Option<u64>) -> PyResult<StepTuple> {
        self.core.reset(seed)
    }

    fn step(&mut self, actions: Vec<usize>) -> PyResult<StepTuple> {
        self.core.step(actions)
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.core.env.n_agents()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.core.env.n_actions()
    }
}

/// Predator-prey pursuit with scripted evaders.
#[pyclass]
struct Tag {
    core: EnvCore<tiger_core::envs::Tag>,
}

#[pymethods]
impl Tag {
    #[new]
    #[pyo3(signature = (n_pursuers=10, n_adversaries=3, horizon=100, seed=0))]
    fn new(n_pursuers: usize, n_adversaries: usize, horizon: usize, seed: u64) -> PyResult<Self> {
        let cfg = TagConfig {
            n_pursuers,
            n_adversaries,
            horizon,
            ..TagConfig::default()
        };
        let env = tiger_core::envs::Tag::new(cfg).map_err(to_py)?;
        Ok(Self {
            core: EnvCore {
                env,
                rng: seeded(seed),
            },
        })
    }

    #[pyo3(signature = (seed=None))]
    fn reset(&mut self, seed: Option<u64>) -> PyResult<StepTuple> {
        self.core.reset(seed)
    }

    fn step(&mut self, actions: Vec<usize>) -> PyResult<StepTuple> {
        self.core.step(actions)
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.core.env.n_agents()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.core.env.n_actions()
    }
}

/// Learner for one seed, configured from TOML text (empty for defaults).
#[pyclass(unsendable)]
struct Trainer {
    config: TrainConfig,
    inner: tiger_core::learner::Trainer,
}

#[pymethods]
impl Trainer {
    #[new]
    #[pyo3(signature = (config_toml="", seed=0))]
    fn new(config_toml: &str, seed: u64) -> PyResult<Self> {
        let config = TrainConfig::from_toml_str(config_toml, "<python>").map_err(to_py)?;
        let inner = tiger_core::learner::Trainer::new(config.learner_config(), config.env_spec(), seed).map_err(to_py)?;
        Ok(Self { config, inner })
    }

    /// Collects one episode and performs one update once the buffer is warm.
    /// Returns `(length, total_reward, won, loss)`; `loss` is None while warming up.
    fn run_episode(&mut self) -> PyResult<(usize, f64, bool, Option<f64>)> {
        let (summary, outcome) = self.inner.run_episode().map_err(to_py)?;
        let loss = match outcome {
            TrainOutcome::Updated { loss, .. } => Some(loss),
            TrainOutcome::WarmingUp { .. } => None,
        };
        Ok((summary.length, summary.total_reward, summary.won, loss))
    }

    /// Greedy evaluation: `(mean, std)` of the environment's metric.
    fn evaluate(&mut self, episodes: usize) -> PyResult<(f64, f64)> {
        let r = self.inner.evaluate(episodes).map_err(to_py)?;
        Ok((r.mean, r.std))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        Checkpoint::capture(&self.config, &self.inner).save(&path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (config, inner) = Checkpoint::load(&path).and_then(|c| c.restore()).map_err(to_py)?;
        Ok(Self { config, inner })
    }

    #[getter]
    fn env_steps(&self) -> u64 {
        self.inner.env_steps
    }

    #[getter]
    fn train_steps(&self) -> u64 {
        self.inner.train_steps
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    fn config_toml(&self) -> String {
        self.config.to_toml_string()
    }
}

/// Runs the full multi-seed training protocol; returns the final metric per seed.
#[pyfunction]
#[pyo3(signature = (config_toml, out_dir=None))]
fn train(config_toml: &str, out_dir: Option<PathBuf>) -> PyResult<Vec<(u64, f64)>> {
    let mut config = TrainConfig::from_toml_str(config_toml, "<python>").map_err(to_py)?;
    if let Some(d) = out_dir {
        config.io.out_dir = d;
    }
    let reports = run_train(&config, false).map_err(to_py)?;
    Ok(reports
        .iter()
        .map(|r| (r.seed, r.final_metric().unwrap_or(f64::NAN)))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (n_agents, horizon, k_stat_nbr=0.5, k_past_self=1, k_past_nbr=1))]
fn graph_stats(
    n_agents: usize,
    horizon: usize,
    k_stat_nbr: f64,
    k_past_self: usize,
    k_past_nbr: usize,
) -> PyResult<BTreeMap<&'static str, usize>> {
    let params = GraphParams::new(k_stat_nbr, k_past_self, k_past_nbr).map_err(to_py)?;
    let s = tiger_core::tgraph::episode_graph_stats(n_agents, horizon, &params);
    Ok(BTreeMap::from([
        ("nodes", s.nodes),
        ("static_edges_per_step", s.static_edges_per_step),
        ("static_edges_total", s.static_edges_total),
        ("self_history_total", s.self_history_total),
        ("nbr_history_total", s.nbr_history_total),
        ("bounded_static_total", s.bounded_static_total),
        ("bounded_self_total", s.bounded_self_total),
        ("bounded_nbr_total", s.bounded_nbr_total),
        ("neighborhood_size", s.neighborhood_size),
        ("log_rule", s.log_rule),
    ]))
}

#[pyfunction]
#[pyo3(signature = (n_agents, k_stat_nbr=0.5, k_past_self=1, k_past_nbr=1))]
fn neighborhood_size(n_agents: usize, k_stat_nbr: f64, k_past_self: usize, k_past_nbr: usize) -> PyResult<usize> {
    let params = GraphParams::new(k_stat_nbr, k_past_self, k_past_nbr).map_err(to_py)?;
    Ok(tiger_core::tgraph::neighborhood_size(&params, n_agents))
}

#[pyfunction]
fn log_rule(n_agents: usize, horizon: usize) -> usize {
    tiger_core::tgraph::log_self_history_rule(n_agents, horizon)
}

/// TD(λ) targets for one episode given target-network values `q_hat[t]`.
#[pyfunction]
#[pyo3(signature = (rewards, q_hat, gamma=0.99, lam=0.8))]
fn td_lambda_targets(rewards: Vec<f64>, q_hat: Vec<f64>, gamma: f64, lam: f64) -> PyResult<Vec<f64>> {
    if rewards.len() != q_hat.len() {
        return Err(PyValueError::new_err("rewards and q_hat must have the same length"));
    }
    let td = TdLambdaConfig { gamma, lambda: lam };
    td.validate().map_err(to_py)?;
    Ok(tiger_core::learner::td_lambda_targets(&rewards, &q_hat, &td))
}

#[pymodule]
fn _tiger(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Gather>()?;
    m.add_class::<Tag>()?;
    m.add_class::<Trainer>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(graph_stats, m)?)?;
    m.add_function(wrap_pyfunction!(neighborhood_size, m)?)?;
    m.add_function(wrap_pyfunction!(log_rule, m)?)?;
    m.add_function(wrap_pyfunction!(td_lambda_targets, m)?)?;
    Ok(())
}
