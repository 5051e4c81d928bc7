use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_actions, Env, EnvStepResult};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const WIN_REWARD: f64 = 10.0;
pub const CONSENSUS_REWARD: f64 = 5.0;
pub const DISAGREE_REWARD: f64 = -5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatherConfig {
    pub n_agents: usize,
    pub horizon: usize,
    pub n_goals: usize,
    /// Agents per episode that see which goal is optimal.
    pub n_informed: usize,
}

impl Default for GatherConfig {
    fn default() -> Self {
        Self {
            n_agents: 5,
            horizon: 8,
            n_goals: 3,
            n_informed: 2,
        }
    }
}

impl GatherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 || self.horizon == 0 || self.n_goals == 0 {
            return Err(Error::Config("gather: n_agents, horizon and n_goals must be positive".into()));
        }
        if self.n_informed > self.n_agents {
            return Err(Error::Config(format!(
                "gather: n_informed {} exceeds n_agents {}",
                self.n_informed, self.n_agents
            )));
        }
        Ok(())
    }
}

/// One-shot goal coordination game: every agent names a goal each step.
///
/// Observation layout per agent:
/// `[goal one-hot | informed flag | own last action one-hot |
///   teammates' last-action histogram | last reward / 10 | t / horizon]`.
#[derive(Debug, Clone)]
pub struct Gather {
    config: GatherConfig,
    optimal: usize,
    informed: Vec<bool>,
    last_actions: Option<Vec<usize>>,
    last_reward: f64,
    t: usize,
    done: bool,
}

impl Gather {
    pub fn new(config: GatherConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_agents;
        Ok(Self {
            config,
            optimal: 0,
            informed: vec![false; n],
            last_actions: None,
            last_reward: 0.0,
            t: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &GatherConfig {
        &self.config
    }

    pub fn optimal_goal(&self) -> usize {
        self.optimal
    }

    pub fn informed(&self) -> &[bool] {
        &self.informed
    }

    /// Starts an episode with a chosen optimal goal and informed set.
    pub fn reset_with(&mut self, optimal: usize, informed: Vec<bool>) -> Result<EnvStepResult> {
        if optimal >= self.config.n_goals || informed.len() != self.config.n_agents {
            return Err(Error::Domain("gather: invalid scripted reset".into()));
        }
        self.optimal = optimal;
        self.informed = informed;
        self.last_actions = None;
        self.last_reward = 0.0;
        self.t = 0;
        self.done = false;
        Ok(self.result(0.0, false, false))
    }

    fn observation(&self, agent: usize) -> Vec<f64> {
        let g = self.config.n_goals;
        let n = self.config.n_agents;
        let mut o = vec![0.0; self.obs_dim()];
        if self.informed[agent] {
            o[self.optimal] = 1.0;
            o[g] = 1.0;
        }
        if let Some(last) = &self.last_actions {
            o[g + 1 + last[agent]] = 1.0;
            if n > 1 {
                for (j, &a) in last.iter().enumerate() {
                    if j != agent {
                        o[2 * g + 1 + a] += 1.0 / (n - 1) as f64;
                    }
                }
            }
        }
        o[3 * g + 1] = self.last_reward / WIN_REWARD;
        o[3 * g + 2] = self.t as f64 / self.config.horizon as f64;
        o
    }

    fn state(&self) -> Vec<f64> {
        let g = self.config.n_goals;
        let n = self.config.n_agents;
        let mut s = vec![0.0; self.state_dim()];
        s[self.optimal] = 1.0;
        for (i, &inf) in self.informed.iter().enumerate() {
            s[g + i] = if inf { 1.0 } else { 0.0 };
        }
        if let Some(last) = &self.last_actions {
            for (i, &a) in last.iter().enumerate() {
                s[g + n + i * g + a] = 1.0;
            }
        }
        s[g + n + n * g] = self.t as f64 / self.config.horizon as f64;
        s
    }

    fn result(&self, reward: f64, terminated: bool, win: bool) -> EnvStepResult {
        let mut info = BTreeMap::new();
        info.insert("win".to_string(), if win { 1.0 } else { 0.0 });
        info.insert("t".to_string(), self.t as f64);
        info.insert("optimal_goal".to_string(), self.optimal as f64);
        EnvStepResult {
            observations: (0..self.config.n_agents).map(|i| self.observation(i)).collect(),
            global_state: self.state(),
            reward,
            terminated,
            info,
        }
    }
}

impl Env for Gather {
    fn name(&self) -> &'static str {
        "gather"
    }

    fn n_agents(&self) -> usize {
        self.config.n_agents
    }

    fn n_actions(&self) -> usize {
        self.config.n_goals
    }

    fn obs_dim(&self) -> usize {
        3 * self.config.n_goals + 3
    }

    fn state_dim(&self) -> usize {
        self.config.n_goals + self.config.n_agents * (1 + self.config.n_goals) + 1
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, rng: &mut Rng) -> Result<EnvStepResult> {
        let optimal = rng.random_range(0..self.config.n_goals);
        let mut informed = vec![false; self.config.n_agents];
        for i in sample(rng, self.config.n_agents, self.config.n_informed) {
            informed[i] = true;
        }
        self.reset_with(optimal, informed)
    }

    fn step(&mut self, actions: &[usize]) -> Result<EnvStepResult> {
        if self.done {
            return Err(Error::Domain("gather: step after termination".into()));
        }
        check_actions(actions, self.config.n_agents, self.config.n_goals)?;
        self.t += 1;
        let first = actions[0];
        let agree = actions.iter().all(|&a| a == first);
        let (reward, win) = match (agree, first == self.optimal) {
            (true, true) => (WIN_REWARD, true),
            (true, false) => (CONSENSUS_REWARD, false),
            (false, _) => (DISAGREE_REWARD, false),
        };
        let terminated = agree || self.t >= self.config.horizon;
        self.done = terminated;
        self.last_actions = Some(actions.to_vec());
        self.last_reward = reward;
        Ok(self.result(reward, terminated, win))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn env5() -> Gather {
        Gather::new(GatherConfig::default()).unwrap()
    }

    #[test]
    fn reward_table() {
        let mut env = env5();
        let informed = vec![true, true, false, false, false];
        env.reset_with(1, informed.clone()).unwrap();
        let r = env.step(&[1; 5]).unwrap();
        assert_eq!((r.reward, r.terminated, env.is_win(&r.info)), (10.0, true, true));

        env.reset_with(1, informed.clone()).unwrap();
        let r = env.step(&[0; 5]).unwrap();
        assert_eq!((r.reward, r.terminated, env.is_win(&r.info)), (5.0, true, false));

        env.reset_with(1, informed).unwrap();
        let r = env.step(&[1, 1, 1, 1, 0]).unwrap();
        assert_eq!((r.reward, r.terminated), (-5.0, false));
    }

    #[test]
    fn masks_goal_for_uninformed_agents() {
        let mut env = env5();
        let mut rng = seeded(4);
        for _ in 0..20 {
            let r = env.reset(&mut rng).unwrap();
            let dim = r.observations[0].len();
            for (i, o) in r.observations.iter().enumerate() {
                assert_eq!(o.len(), dim);
                if !env.informed()[i] {
                    assert!(o[..3].iter().all(|&v| v == 0.0));
                } else {
                    assert_eq!(o[env.optimal_goal()], 1.0);
                }
            }
            assert_eq!(env.informed().iter().filter(|&&b| b).count(), 2);
            assert_eq!(r.reward, 0.0);
            assert!(!r.terminated);
        }
    }

    #[test]
    fn optimal_goal_is_uniform() {
        let mut env = env5();
        let mut rng = seeded(99);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            env.reset(&mut rng).unwrap();
            counts[env.optimal_goal()] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn disagreement_runs_to_horizon() {
        let mut env = env5();
        env.reset_with(0, vec![false; 5]).unwrap();
        for t in 1..=8 {
            let r = env.step(&[0, 1, 2, 0, 1]).unwrap();
            assert_eq!(r.reward, -5.0);
            assert_eq!(r.terminated, t == 8);
        }
        assert!(env.step(&[0; 5]).is_err());
    }

    #[test]
    fn rejects_bad_actions() {
        let mut env = env5();
        env.reset_with(0, vec![false; 5]).unwrap();
        assert!(env.step(&[0, 1, 3, 0, 0]).is_err());
        assert!(env.step(&[0, 1]).is_err());
    }

    #[test]
    fn teammates_actions_visible_next_step() {
        let mut env = Gather::new(GatherConfig {
            n_agents: 3,
            n_informed: 1,
            ..GatherConfig::default()
        })
        .unwrap();
        env.reset_with(2, vec![true, false, false]).unwrap();
        let r = env.step(&[2, 0, 2]).unwrap();
        let o = &r.observations[1];
        // own last action a0, teammates both chose a2
        assert_eq!(&o[4..7], &[1.0, 0.0, 0.0]);
        assert_eq!(&o[7..10], &[0.0, 0.0, 1.0]);
        assert_eq!(o[10], -0.5);
    }
}
