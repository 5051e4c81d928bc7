use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_actions, Env, EnvStepResult};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Unit displacements for the macroactions: no-op, +x, -x, +y, -y.
const MOVES: [[f64; 2]; 5] = [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TagConfig {
    pub n_pursuers: usize,
    pub n_adversaries: usize,
    pub horizon: usize,
    pub n_obstacles: usize,
    pub obstacle_radius: f64,
    pub arena_half_width: f64,
    pub pursuer_speed: f64,
    pub adversary_speed: f64,
    pub collision_radius: f64,
    pub max_placement_retries: usize,
}

impl Default for TagConfig {
    fn default() -> Self {
        Self {
            n_pursuers: 10,
            n_adversaries: 3,
            horizon: 100,
            n_obstacles: 2,
            obstacle_radius: 0.2,
            arena_half_width: 1.0,
            pursuer_speed: 0.05,
            adversary_speed: 0.065,
            collision_radius: 0.1,
            max_placement_retries: 10_000,
        }
    }
}

impl TagConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pursuers == 0 || self.horizon == 0 {
            return Err(Error::Config("tag: n_pursuers and horizon must be positive".into()));
        }
        if self.adversary_speed <= self.pursuer_speed {
            return Err(Error::Config(format!(
                "tag: adversary_speed {} must exceed pursuer_speed {}",
                self.adversary_speed, self.pursuer_speed
            )));
        }
        if self.arena_half_width <= 0.0 || self.collision_radius <= 0.0 || self.obstacle_radius < 0.0 {
            return Err(Error::Config("tag: geometry must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Body {
    pos: [f64; 2],
    vel: [f64; 2],
}

/// Pursuit on a bounded square with circular obstacles; the learner controls
/// the pursuers, adversaries follow a scripted evasion rule.
///
/// Observation per pursuer: own position and velocity, offsets to the other
/// pursuers, to the adversaries, and to the obstacle centres.
#[derive(Debug, Clone)]
pub struct Tag {
    config: TagConfig,
    pursuers: Vec<Body>,
    adversaries: Vec<Body>,
    obstacles: Vec<[f64; 2]>,
    t: usize,
    done: bool,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Tag {
    pub fn new(config: TagConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            pursuers: Vec::new(),
            adversaries: Vec::new(),
            obstacles: Vec::new(),
            t: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &TagConfig {
        &self.config
    }

    pub fn pursuer_positions(&self) -> Vec<[f64; 2]> {
        self.pursuers.iter().map(|b| b.pos).collect()
    }

    pub fn adversary_positions(&self) -> Vec<[f64; 2]> {
        self.adversaries.iter().map(|b| b.pos).collect()
    }

    pub fn obstacle_positions(&self) -> &[[f64; 2]] {
        &self.obstacles
    }

    /// Starts an episode from an explicit layout (velocities zero).
    pub fn reset_with_layout(
        &mut self,
        pursuers: &[[f64; 2]],
        adversaries: &[[f64; 2]],
        obstacles: &[[f64; 2]],
    ) -> Result<EnvStepResult> {
        if pursuers.len() != self.config.n_pursuers
            || adversaries.len() != self.config.n_adversaries
            || obstacles.len() != self.config.n_obstacles
        {
            return Err(Error::Domain("tag: layout does not match configured entity counts".into()));
        }
        let body = |p: &[f64; 2]| Body { pos: *p, vel: [0.0; 2] };
        self.pursuers = pursuers.iter().map(body).collect();
        self.adversaries = adversaries.iter().map(body).collect();
        self.obstacles = obstacles.to_vec();
        self.t = 0;
        self.done = false;
        Ok(self.result(0.0, false, 0))
    }

    /// Moves from `from` along `delta`, clamped to the arena and stopped at
    /// the first obstacle boundary crossed.
    fn advance(&self, from: [f64; 2], delta: [f64; 2]) -> [f64; 2] {
        let hw = self.config.arena_half_width;
        let mut s = 1.0f64;
        let r = self.config.obstacle_radius;
        let dd = delta[0] * delta[0] + delta[1] * delta[1];
        if dd > 0.0 {
            for c in &self.obstacles {
                let f = [from[0] - c[0], from[1] - c[1]];
                let b = f[0] * delta[0] + f[1] * delta[1];
                let cc = f[0] * f[0] + f[1] * f[1] - r * r;
                if cc < 0.0 {
                    // Already inside: only moves that exit are allowed.
                    if b < 0.0 {
                        s = 0.0;
                    }
                    continue;
                }
                let disc = b * b - dd * cc;
                if disc < 0.0 {
                    continue;
                }
                let hit = (-b - disc.sqrt()) / dd;
                if (0.0..s).contains(&hit) {
                    s = hit;
                }
            }
        }
        [
            (from[0] + s * delta[0]).clamp(-hw, hw),
            (from[1] + s * delta[1]).clamp(-hw, hw),
        ]
    }

    fn evade(&self, adversary: &Body, pursuers: &[Body]) -> [f64; 2] {
        let speed = self.config.adversary_speed;
        let mut best = adversary.pos;
        let mut best_score = f64::NEG_INFINITY;
        for m in MOVES {
            let cand = self.advance(adversary.pos, [m[0] * speed, m[1] * speed]);
            let nearest = pursuers
                .iter()
                .map(|p| dist(p.pos, cand))
                .fold(f64::INFINITY, f64::min);
            if nearest > best_score {
                best_score = nearest;
                best = cand;
            }
        }
        best
    }

    fn observation(&self, i: usize) -> Vec<f64> {
        let me = self.pursuers[i];
        let mut o = Vec::with_capacity(self.obs_dim());
        o.extend_from_slice(&me.pos);
        o.extend_from_slice(&me.vel);
        for (j, p) in self.pursuers.iter().enumerate() {
            if j != i {
                o.push(p.pos[0] - me.pos[0]);
                o.push(p.pos[1] - me.pos[1]);
            }
        }
        for a in &self.adversaries {
            o.push(a.pos[0] - me.pos[0]);
            o.push(a.pos[1] - me.pos[1]);
        }
        for c in &self.obstacles {
            o.push(c[0] - me.pos[0]);
            o.push(c[1] - me.pos[1]);
        }
        o
    }

    fn state(&self) -> Vec<f64> {
        self.pursuers
            .iter()
            .chain(&self.adversaries)
            .flat_map(|b| [b.pos[0], b.pos[1], b.vel[0], b.vel[1]])
            .collect()
    }

    fn result(&self, reward: f64, terminated: bool, captures: usize) -> EnvStepResult {
        let mut info = BTreeMap::new();
        info.insert("captures".to_string(), captures as f64);
        info.insert("t".to_string(), self.t as f64);
        EnvStepResult {
            observations: (0..self.config.n_pursuers).map(|i| self.observation(i)).collect(),
            global_state: self.state(),
            reward,
            terminated,
            info,
        }
    }
}

impl Env for Tag {
    fn name(&self) -> &'static str {
        "tag"
    }

    fn n_agents(&self) -> usize {
        self.config.n_pursuers
    }

    fn n_actions(&self) -> usize {
        MOVES.len()
    }

    fn obs_dim(&self) -> usize {
        4 + 2 * (self.config.n_pursuers - 1) + 2 * self.config.n_adversaries + 2 * self.config.n_obstacles
    }

    fn state_dim(&self) -> usize {
        4 * (self.config.n_pursuers + self.config.n_adversaries)
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, rng: &mut Rng) -> Result<EnvStepResult> {
        let cfg = &self.config;
        let hw = cfg.arena_half_width;
        let mut obstacles: Vec<[f64; 2]> = Vec::with_capacity(cfg.n_obstacles);
        let mut entities: Vec<[f64; 2]> = Vec::new();
        let mut tries = 0usize;
        let draw = |rng: &mut Rng, margin: f64| -> [f64; 2] {
            let lim = (hw - margin).max(0.0);
            [rng.random_range(-lim..=lim), rng.random_range(-lim..=lim)]
        };
        while obstacles.len() < cfg.n_obstacles {
            tries += 1;
            if tries > cfg.max_placement_retries {
                return Err(Error::Config("tag: could not place obstacles without overlap".into()));
            }
            let c = draw(rng, cfg.obstacle_radius);
            if obstacles.iter().all(|o| dist(*o, c) >= 2.0 * cfg.obstacle_radius) {
                obstacles.push(c);
            }
        }
        let n_entities = cfg.n_pursuers + cfg.n_adversaries;
        while entities.len() < n_entities {
            tries += 1;
            if tries > cfg.max_placement_retries {
                return Err(Error::Config("tag: could not place entities without overlap".into()));
            }
            let p = draw(rng, 0.0);
            let clear_of_entities = entities.iter().all(|e| dist(*e, p) >= cfg.collision_radius);
            let clear_of_obstacles = obstacles.iter().all(|o| dist(*o, p) >= cfg.obstacle_radius);
            if clear_of_entities && clear_of_obstacles {
                entities.push(p);
            }
        }
        let (pursuers, adversaries) = entities.split_at(cfg.n_pursuers);
        let (pursuers, adversaries) = (pursuers.to_vec(), adversaries.to_vec());
        self.reset_with_layout(&pursuers, &adversaries, &obstacles)
    }

    fn step(&mut self, actions: &[usize]) -> Result<EnvStepResult> {
        if self.done {
            return Err(Error::Domain("tag: step after termination".into()));
        }
        check_actions(actions, self.config.n_pursuers, MOVES.len())?;
        let before = self.pursuers.clone();
        let speed = self.config.pursuer_speed;

        let new_adv: Vec<[f64; 2]> = self.adversaries.iter().map(|a| self.evade(a, &before)).collect();
        for (i, &a) in actions.iter().enumerate() {
            let m = MOVES[a];
            let from = self.pursuers[i].pos;
            let to = self.advance(from, [m[0] * speed, m[1] * speed]);
            self.pursuers[i] = Body {
                pos: to,
                vel: [to[0] - from[0], to[1] - from[1]],
            };
        }
        for (adv, to) in self.adversaries.iter_mut().zip(new_adv) {
            adv.vel = [to[0] - adv.pos[0], to[1] - adv.pos[1]];
            adv.pos = to;
        }

        let r = self.config.collision_radius;
        let captures = self
            .pursuers
            .iter()
            .flat_map(|p| self.adversaries.iter().map(move |a| dist(p.pos, a.pos)))
            .filter(|&d| d < r)
            .count();
        self.t += 1;
        let terminated = self.t >= self.config.horizon;
        self.done = terminated;
        Ok(self.result(captures as f64, terminated, captures))
    }
}
