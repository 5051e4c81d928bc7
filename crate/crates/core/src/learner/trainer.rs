use crate::diffcore::{clip_global_norm, ParamStore, Tape, Tensor2, Var};
use crate::envs::{Env, EnvSpec};
use crate::error::{Error, Result};
use crate::marl::argmax;
use crate::rng::{derived, Rng};

use super::model::padded_states;
use super::rollout::{collect_episode, evaluate, EpisodeSummary, EvalResult};
use super::{epsilon_at, td_lambda_targets, EpisodeBatch, LearnerConfig, Model, ReplayBuffer, TdLambdaConfig};

const INIT_SALT: u64 = 1;
const TRAIN_SALT: u64 = 2;
const EVAL_SALT: u64 = 0x0E7A_1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainOutcome {
    /// The buffer does not yet hold a full batch.
    WarmingUp { have: usize, need: usize },
    Updated { loss: f64, grad_norm: f64 },
}

/// Mean squared TD(λ) error of a batch, built on `tape` against the online
/// parameters in `online`. Targets come from `target` alone, except for the
/// greedy next actions, which the online values select.
pub fn td_loss(
    model: &Model,
    tape: &mut Tape,
    online: &ParamStore,
    target: &ParamStore,
    episodes: &[&EpisodeBatch],
    td: &TdLambdaConfig,
) -> Result<Var> {
    for ep in episodes {
        ep.validate()?;
    }
    let n = model.n_agents;
    let b = episodes.len();
    let steps = model.unroll(tape, online, episodes)?;
    let t_max = steps.len();

    let greedy: Vec<Vec<usize>> = steps
        .iter()
        .map(|s| {
            let q = tape.value(s.q);
            (0..q.rows()).map(|r| argmax(q.row(r))).collect()
        })
        .collect();

    let mut q_hat = vec![vec![0.0; t_max]; b];
    {
        let mut tt = Tape::new();
        let tsteps = model.unroll(&mut tt, target, episodes)?;
        for (t, s) in tsteps.iter().enumerate().skip(1) {
            let chosen = tt.pick_cols(s.q, &greedy[t])?;
            let states = tt.constant(padded_states(episodes, t, model.state_dim)?);
            let q = model.mix(&mut tt, target, chosen, states, s.embeddings)?;
            for (bi, row) in q_hat.iter_mut().enumerate() {
                row[t] = tt.value(q).get(bi, 0);
            }
        }
    }

    let mut y = Tensor2::zeros(t_max * b, 1);
    let mut mask = Tensor2::zeros(t_max * b, 1);
    for (bi, ep) in episodes.iter().enumerate() {
        let targets = td_lambda_targets(&ep.rewards, &q_hat[bi][..ep.len()], td);
        for (t, v) in targets.into_iter().enumerate() {
            y.set(t * b + bi, 0, v);
            mask.set(t * b + bi, 0, 1.0);
        }
    }
    let valid: f64 = mask.sum();

    let mut q_tot = Vec::with_capacity(t_max);
    for (t, s) in steps.iter().enumerate() {
        let actions: Vec<usize> = episodes
            .iter()
            .flat_map(|ep| match ep.actions.get(t) {
                Some(a) => a.clone(),
                None => vec![0; n],
            })
            .collect();
        let chosen = tape.pick_cols(s.q, &actions)?;
        let states = tape.constant(padded_states(episodes, t, model.state_dim)?);
        q_tot.push(model.mix(tape, online, chosen, states, s.embeddings)?);
    }
    let q_tot = tape.vcat(&q_tot)?;
    let y = tape.constant(y);
    let mask = tape.constant(mask);
    let diff = tape.sub(q_tot, y)?;
    let diff = tape.mul(diff, mask)?;
    let sq = tape.square(diff);
    let total = tape.sum(sq);
    Ok(tape.scale(total, 1.0 / valid.max(1.0)))
}

/// One learner: environment, model, replay and counters for a single seed.
pub struct Trainer {
    pub config: LearnerConfig,
    pub env_spec: EnvSpec,
    env: Box<dyn Env>,
    eval_env: Box<dyn Env>,
    pub model: Model,
    pub buffer: ReplayBuffer,
    pub rng: Rng,
    pub seed: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub train_steps: u64,
    pub loss_sum: f64,
    pub loss_count: u64,
}

impl Trainer {
    pub fn new(config: LearnerConfig, env_spec: EnvSpec, seed: u64) -> Result<Self> {
        config.validate()?;
        let env = env_spec.build()?;
        let eval_env = env_spec.build()?;
        let mut init = derived(seed, INIT_SALT);
        let model = Model::new(
            &config,
            env.n_agents(),
            env.obs_dim(),
            env.state_dim(),
            env.n_actions(),
            &mut init,
        )?;
        Ok(Self {
            buffer: ReplayBuffer::new(config.buffer_capacity),
            config,
            env_spec,
            env,
            eval_env,
            model,
            rng: derived(seed, TRAIN_SALT),
            seed,
            env_steps: 0,
            episodes: 0,
            train_steps: 0,
            loss_sum: 0.0,
            loss_count: 0,
        })
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_at(&self.config.schedule, self.env_steps)
    }

    /// Collects one episode, stores it and, once the buffer is warm,
    /// performs one update.
    pub fn run_episode(&mut self) -> Result<(EpisodeSummary, TrainOutcome)> {
        let ep = collect_episode(
            self.env.as_mut(),
            &self.model,
            &self.config.schedule,
            &mut self.env_steps,
            &mut self.rng,
        )?;
        let summary = EpisodeSummary::from(&ep);
        self.buffer.push(ep);
        self.episodes += 1;
        let outcome = self.train_step()?;
        Ok((summary, outcome))
    }

    pub fn train_step(&mut self) -> Result<TrainOutcome> {
        let need = self.config.batch_size;
        if self.buffer.len() < need {
            return Ok(TrainOutcome::WarmingUp {
                have: self.buffer.len(),
                need,
            });
        }
        let batch = self.buffer.sample(need, &mut self.rng)?;
        let mut tape = Tape::new();
        let loss = td_loss(&self.model, &mut tape, &self.model.online, &self.model.target, &batch, &self.config.td)?;
        let loss_value = tape.value(loss).get(0, 0);
        if !loss_value.is_finite() {
            return Err(Error::Training(format!(
                "non-finite loss {loss_value} at learner step {}",
                self.train_steps + 1
            )));
        }
        let mut grads = tape.backward(loss, &self.model.online)?;
        let grad_norm = clip_global_norm(&mut grads, self.config.grad_clip);
        self.model.adam.step(&mut self.model.online, &grads)?;
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.config.target_update_interval) {
            self.model.sync_targets()?;
        }
        self.loss_sum += loss_value;
        self.loss_count += 1;
        Ok(TrainOutcome::Updated {
            loss: loss_value,
            grad_norm,
        })
    }

    /// Greedy evaluation on a private environment and generator keyed by
    /// the seed and the current step count.
    pub fn evaluate(&mut self, n_episodes: usize) -> Result<EvalResult> {
        let seed = derived_seed(self.seed, EVAL_SALT ^ self.env_steps);
        evaluate(self.eval_env.as_mut(), &self.model, self.env_spec.metric(), n_episodes, seed)
    }

    /// Mean training loss since the last call (NaN when no update happened).
    pub fn take_mean_loss(&mut self) -> f64 {
        let mean = if self.loss_count == 0 {
            f64::NAN
        } else {
            self.loss_sum / self.loss_count as f64
        };
        self.loss_sum = 0.0;
        self.loss_count = 0;
        mean
    }
}

fn derived_seed(seed: u64, salt: u64) -> u64 {
    use rand::RngCore;
    derived(seed, salt).next_u64()
}
