use crate::diffcore::{Tape, Tensor2};
use crate::envs::{Env, EvalMetric};
use crate::error::{Error, Result};
use crate::marl::select_actions;
use crate::rng::{seeded, Rng};
use crate::tgat::NodeHistory;

use super::{epsilon_at, EpisodeBatch, Model, Schedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub length: usize,
    pub total_reward: f64,
    pub won: bool,
}

impl From<&EpisodeBatch> for EpisodeSummary {
    fn from(ep: &EpisodeBatch) -> Self {
        Self {
            length: ep.len(),
            total_reward: ep.total_reward(),
            won: ep.won,
        }
    }
}

/// Runs one episode with the online parameters, acting ε-greedily with
/// ε taken from `schedule` at the running step counter, which advances by
/// one per environment step.
pub fn collect_episode(
    env: &mut dyn Env,
    model: &Model,
    schedule: &Schedule,
    env_steps: &mut u64,
    rng: &mut Rng,
) -> Result<EpisodeBatch> {
    run_policy(env, model, rng, |_| {
        let eps = epsilon_at(schedule, *env_steps);
        *env_steps += 1;
        eps
    })
}

fn run_policy(
    env: &mut dyn Env,
    model: &Model,
    rng: &mut Rng,
    mut epsilon: impl FnMut(usize) -> f64,
) -> Result<EpisodeBatch> {
    let n = model.n_agents;
    if env.n_agents() != n || env.obs_dim() != model.obs_dim || env.n_actions() != model.n_actions {
        return Err(Error::Consistency(format!(
            "{} environment does not match the model layout",
            env.name()
        )));
    }
    let store = &model.online;
    let hidden = model.hidden_dim();
    let mut h1 = Tensor2::zeros(n, hidden);
    let mut h2 = Tensor2::zeros(n, hidden);
    let mut history = NodeHistory::new();
    let mut ep = EpisodeBatch {
        obs: Vec::new(),
        states: Vec::new(),
        actions: Vec::new(),
        rewards: Vec::new(),
        won: false,
    };
    let mut current = env.reset(rng)?;
    let limit = env.horizon() + 1;
    for t in 0..limit {
        let obs = Tensor2::from_rows(&current.observations)?;
        let mut tape = Tape::new();
        let (o, a, b) = (tape.constant(obs.clone()), tape.constant(h1), tape.constant(h2));
        let step = model.step_forward(&mut tape, store, t, o, a, b, &mut history, 1)?;
        let q = tape.value(step.q);
        let values: Vec<Vec<f64>> = (0..n).map(|i| q.row(i).to_vec()).collect();
        let actions = select_actions(&values, epsilon(t), rng, None)?;
        h1 = tape.value(step.h1).clone();
        h2 = tape.value(step.h2).clone();

        let next = env.step(&actions)?;
        ep.obs.push(obs);
        ep.states.push(current.global_state.clone());
        ep.actions.push(actions);
        ep.rewards.push(next.reward);
        if next.terminated {
            ep.won = env.is_win(&next.info);
            return Ok(ep);
        }
        current = next;
    }
    Err(Error::Consistency(format!(
        "{} episode ran past its horizon of {}",
        env.name(),
        env.horizon()
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mean: f64,
    /// Population standard deviation over episodes.
    pub std: f64,
    pub values: Vec<f64>,
}

/// Greedy episodes with a private generator; the metric is the win flag
/// (Gather) or the episode return (Tag).
pub fn evaluate(env: &mut dyn Env, model: &Model, metric: EvalMetric, n_episodes: usize, seed: u64) -> Result<EvalResult> {
    let mut rng = seeded(seed);
    let mut values = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let ep = run_policy(env, model, &mut rng, |_| 0.0)?;
        values.push(match metric {
            EvalMetric::WinRate => f64::from(u8::from(ep.won)),
            EvalMetric::Return => ep.total_reward(),
        });
    }
    let (mean, std) = mean_std(&values);
    Ok(EvalResult { mean, std, values })
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
