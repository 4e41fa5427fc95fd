//! Particle scenarios with three cooperative agents and one adversary.
//!
//! Per-step scores are accumulated internally; the team sees only the
//! episode mean on the final step.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_actions, StepOutcome, TeamEnv};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const N_LANDMARKS: usize = 2;
pub const CONTACT_SCORE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PhysicalDeception,
    KeepAway,
    PredatorPrey,
}

impl Scenario {
    /// Whether cooperative agents are told which landmark is the target.
    fn has_target(self) -> bool {
        !matches!(self, Scenario::PredatorPrey)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticleConfig {
    pub scenario: Scenario,
    pub n_good: usize,
    pub n_adv: usize,
    pub episode_length: usize,
    pub dt: f64,
    pub damping: f64,
    pub observation_radius: f64,
    pub half_extent: f64,
    pub good_accel: f64,
    pub adversary_accel: f64,
    pub contact_radius: f64,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::PhysicalDeception,
            n_good: 3,
            n_adv: 1,
            episode_length: 80,
            dt: 0.1,
            damping: 0.25,
            observation_radius: 1.0,
            half_extent: 1.0,
            good_accel: 0.8,
            adversary_accel: 1.0,
            contact_radius: 0.15,
        }
    }
}

impl ParticleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("env.particle.{m}")));
        if self.n_good == 0 {
            return bad("n_good must be positive");
        }
        if self.n_adv != 1 {
            return bad("n_adv must be 1");
        }
        if self.episode_length == 0 {
            return bad("episode_length must be positive");
        }
        if !(self.dt > 0.0) || !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("dt must be positive and damping in (0, 1)");
        }
        if !(self.observation_radius >= 0.0) || !(self.half_extent > 0.0) || !(self.contact_radius > 0.0) {
            return bad("observation_radius, half_extent and contact_radius must be positive");
        }
        if !(self.good_accel > 0.0) || !(self.adversary_accel > 0.0) {
            return bad("accelerations must be positive");
        }
        if self.scenario == Scenario::PredatorPrey && self.good_accel >= self.adversary_accel {
            return bad("good_accel must be below adversary_accel in predator_prey");
        }
        Ok(())
    }

    pub fn n_entities(&self) -> usize {
        self.n_good + self.n_adv
    }

    pub fn good_obs_dim(&self) -> usize {
        let target = if self.scenario.has_target() { N_LANDMARKS } else { 0 };
        4 + 2 * N_LANDMARKS + 2 * (self.n_entities() - 1) + target
    }

    pub fn adversary_obs_dim(&self) -> usize {
        4 + 2 * N_LANDMARKS + 2 * (self.n_entities() - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    /// Good agents first, then the adversary.
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub landmarks: Vec<[f64; 2]>,
    pub target: usize,
    pub t: usize,
    pub good_score_sum: f64,
    pub adversary_score_sum: f64,
    pub contacts: usize,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Per-step `(good, adversary, contacts)` scores for the current state.
pub fn scenario_step_scores(config: &ParticleConfig, state: &ParticleState) -> (f64, f64, usize) {
    let good = &state.positions[..config.n_good];
    let adv = state.positions[config.n_good];
    let target = state.landmarks[state.target];
    match config.scenario {
        Scenario::PhysicalDeception => {
            let closest = good.iter().map(|p| dist(*p, target)).fold(f64::INFINITY, f64::min);
            let score = -closest + dist(adv, target);
            (score, -score, 0)
        }
        Scenario::KeepAway => {
            let mean = good.iter().map(|p| dist(*p, target)).sum::<f64>() / good.len() as f64;
            (-mean, mean, 0)
        }
        Scenario::PredatorPrey => {
            let contacts = good.iter().filter(|p| dist(**p, adv) < config.contact_radius).count();
            let score = CONTACT_SCORE * contacts as f64;
            (score, -score, contacts)
        }
    }
}

/// Accumulated per-step scores scaled by `1 / episode_length`.
pub fn particle_terminal_team_reward(score_sum: f64, episode_length: usize) -> f64 {
    score_sum / episode_length as f64
}

pub struct ParticleEnv {
    config: ParticleConfig,
    state: ParticleState,
}

impl ParticleEnv {
    pub fn new(config: ParticleConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_entities();
        let state = ParticleState {
            positions: vec![[0.0; 2]; n],
            velocities: vec![[0.0; 2]; n],
            landmarks: vec![[0.0; 2]; N_LANDMARKS],
            target: 0,
            t: 0,
            good_score_sum: 0.0,
            adversary_score_sum: 0.0,
            contacts: 0,
        };
        Ok(Self { config, state })
    }

    pub fn config(&self) -> &ParticleConfig {
        &self.config
    }

    pub fn state(&self) -> &ParticleState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut ParticleState {
        &mut self.state
    }

    fn push_relative(&self, obs: &mut Vec<f64>, from: [f64; 2], to: [f64; 2]) {
        if dist(from, to) > self.config.observation_radius {
            obs.extend([0.0, 0.0]);
        } else {
            obs.extend([to[0] - from[0], to[1] - from[1]]);
        }
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        let s = &self.state;
        (0..self.config.n_entities())
            .map(|i| {
                let me = s.positions[i];
                let mut obs = Vec::with_capacity(self.config.good_obs_dim());
                obs.extend(s.velocities[i]);
                obs.extend(me);
                for lm in &s.landmarks {
                    self.push_relative(&mut obs, me, *lm);
                }
                for (j, other) in s.positions.iter().enumerate() {
                    if j != i {
                        self.push_relative(&mut obs, me, *other);
                    }
                }
                if i < self.config.n_good && self.config.scenario.has_target() {
                    obs.extend((0..N_LANDMARKS).map(|k| if k == s.target { 1.0 } else { 0.0 }));
                }
                obs
            })
            .collect()
    }
}

impl TeamEnv for ParticleEnv {
    fn name(&self) -> &'static str {
        match self.config.scenario {
            Scenario::PhysicalDeception => "physical_deception",
            Scenario::KeepAway => "keep_away",
            Scenario::PredatorPrey => "predator_prey",
        }
    }

    fn n_cooperative(&self) -> usize {
        self.config.n_good
    }

    fn n_adversaries(&self) -> usize {
        self.config.n_adv
    }

    fn obs_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.config.good_obs_dim(); self.config.n_good];
        dims.push(self.config.adversary_obs_dim());
        dims
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn episode_length(&self) -> usize {
        self.config.episode_length
    }

    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        let h = self.config.half_extent;
        let mut sample = || [rng.random_range(-h..=h), rng.random_range(-h..=h)];
        let n = self.config.n_entities();
        self.state.positions = (0..n).map(|_| sample()).collect();
        self.state.landmarks = (0..N_LANDMARKS).map(|_| sample()).collect();
        self.state.velocities = vec![[0.0; 2]; n];
        self.state.target = rng.random_range(0..N_LANDMARKS);
        self.state.t = 0;
        self.state.good_score_sum = 0.0;
        self.state.adversary_score_sum = 0.0;
        self.state.contacts = 0;
        Ok(self.observations())
    }

    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepOutcome> {
        let c = &self.config;
        check_actions(actions, c.n_entities(), 2)?;
        if self.state.t >= c.episode_length {
            return Err(Error::Environment("particle env stepped past the end of the episode".into()));
        }
        let bound = 2.0 * c.half_extent;
        for (i, a) in actions.iter().enumerate() {
            let scale = if i < c.n_good { c.good_accel } else { c.adversary_accel };
            let (p, v) = (&mut self.state.positions[i], &mut self.state.velocities[i]);
            for ax in 0..2 {
                v[ax] = v[ax] * (1.0 - c.damping) + a[ax].clamp(-1.0, 1.0) * scale * c.dt;
                p[ax] += v[ax] * c.dt;
                // Soft wall: stop at the boundary without a penalty.
                if p[ax].abs() > bound {
                    p[ax] = p[ax].clamp(-bound, bound);
                    v[ax] = 0.0;
                }
            }
        }
        let (good, adv, contacts) = scenario_step_scores(c, &self.state);
        self.state.good_score_sum += good;
        self.state.adversary_score_sum += adv;
        self.state.contacts += contacts;
        self.state.t += 1;
        let done = self.state.t == c.episode_length;
        let (team_reward, adversary_reward) = if done {
            (
                particle_terminal_team_reward(self.state.good_score_sum, c.episode_length),
                particle_terminal_team_reward(self.state.adversary_score_sum, c.episode_length),
            )
        } else {
            (0.0, 0.0)
        };
        Ok(StepOutcome {
            observations: self.observations(),
            team_reward,
            adversary_reward,
            saliency: vec![1.0; c.n_good],
            done,
        })
    }

    fn positions(&self) -> Vec<[f64; 2]> {
        self.state.positions[..self.config.n_good].to_vec()
    }

    fn world_bounds(&self) -> ([f64; 2], [f64; 2]) {
        let b = 2.0 * self.config.half_extent;
        ([-b, -b], [b, b])
    }
}
