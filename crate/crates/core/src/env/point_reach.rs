//! Single-agent navigation with a dense reward: the agent is paid the
//! negative distance to a goal on every step.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_actions, StepOutcome, TeamEnv};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointReachConfig {
    pub episode_length: usize,
    pub half_extent: f64,
    /// Largest displacement per step; actions are scaled by it and their
    /// norm is capped at 1.
    pub max_step: f64,
}

impl Default for PointReachConfig {
    fn default() -> Self {
        Self {
            episode_length: 25,
            half_extent: 1.0,
            max_step: 0.1,
        }
    }
}

impl PointReachConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episode_length == 0 || !(self.half_extent > 0.0) || !(self.max_step > 0.0) {
            return Err(Error::Config(
                "env.point_reach: episode_length, half_extent and max_step must be positive".into(),
            ));
        }
        Ok(())
    }
}

pub struct PointReachEnv {
    config: PointReachConfig,
    position: [f64; 2],
    goal: [f64; 2],
    t: usize,
}

impl PointReachEnv {
    pub fn new(config: PointReachConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            position: [0.0; 2],
            goal: [0.0; 2],
            t: 0,
        })
    }

    pub fn distance(&self) -> f64 {
        ((self.goal[0] - self.position[0]).powi(2) + (self.goal[1] - self.position[1]).powi(2)).sqrt()
    }

    fn observation(&self) -> Vec<f64> {
        vec![
            self.position[0],
            self.position[1],
            self.goal[0] - self.position[0],
            self.goal[1] - self.position[1],
        ]
    }

    /// Straight-line move that lands exactly on the goal when in reach.
    /// Greedy and optimal: every step reaches the least possible distance.
    pub fn optimal_action(&self) -> Vec<f64> {
        let d = self.distance();
        if d == 0.0 {
            return vec![0.0, 0.0];
        }
        let len = d.min(self.config.max_step) / self.config.max_step;
        vec![
            (self.goal[0] - self.position[0]) / d * len,
            (self.goal[1] - self.position[1]) / d * len,
        ]
    }
}

impl TeamEnv for PointReachEnv {
    fn name(&self) -> &'static str {
        "point_reach"
    }

    fn n_cooperative(&self) -> usize {
        1
    }

    fn n_adversaries(&self) -> usize {
        0
    }

    fn obs_dims(&self) -> Vec<usize> {
        vec![4]
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn episode_length(&self) -> usize {
        self.config.episode_length
    }

    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        let h = self.config.half_extent;
        self.position = [rng.random_range(-h..=h), rng.random_range(-h..=h)];
        self.goal = [rng.random_range(-h..=h), rng.random_range(-h..=h)];
        self.t = 0;
        Ok(vec![self.observation()])
    }

    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepOutcome> {
        check_actions(actions, 1, 2)?;
        if self.t >= self.config.episode_length {
            return Err(Error::Environment("point_reach stepped past the end of the episode".into()));
        }
        let a = &actions[0];
        let norm = (a[0] * a[0] + a[1] * a[1]).sqrt();
        let scale = self.config.max_step / norm.max(1.0);
        let bound = 2.0 * self.config.half_extent;
        for ax in 0..2 {
            self.position[ax] = (self.position[ax] + a[ax] * scale).clamp(-bound, bound);
        }
        self.t += 1;
        Ok(StepOutcome {
            observations: vec![self.observation()],
            team_reward: -self.distance(),
            adversary_reward: 0.0,
            saliency: vec![1.0],
            done: self.t == self.config.episode_length,
        })
    }

    fn positions(&self) -> Vec<[f64; 2]> {
        vec![self.position]
    }

    fn world_bounds(&self) -> ([f64; 2], [f64; 2]) {
        let b = 2.0 * self.config.half_extent;
        ([-b, -b], [b, b])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rollout(env: &mut PointReachEnv, policy: impl Fn(&PointReachEnv) -> Vec<f64>) -> f64 {
        let mut total = 0.0;
        loop {
            let a = policy(env);
            let out = env.step(&[a]).unwrap();
            total += out.team_reward;
            if out.done {
                return total;
            }
        }
    }

    #[test]
    fn optimal_beats_stationary_and_random_directions() {
        for seed in 0..20 {
            let mut e = PointReachEnv::new(PointReachConfig::default()).unwrap();
            let mut rng = Rng::seed_from_u64(seed);
            e.reset(&mut rng).unwrap();
            let d0 = e.distance();
            let opt = rollout(&mut e, |e| e.optimal_action());
            e.reset(&mut Rng::seed_from_u64(seed)).unwrap();
            let still = rollout(&mut e, |_| vec![0.0, 0.0]);
            assert!((still + 25.0 * d0).abs() < 1e-9);
            assert!(opt >= still);
            e.reset(&mut Rng::seed_from_u64(seed)).unwrap();
            let other = rollout(&mut e, |_| vec![0.6, -0.8]);
            assert!(opt >= other - 1e-12);
        }
    }

    #[test]
    fn action_norm_is_capped() {
        let mut e = PointReachEnv::new(PointReachConfig::default()).unwrap();
        e.reset(&mut Rng::seed_from_u64(0)).unwrap();
        let before = e.positions()[0];
        e.step(&[vec![30.0, 40.0]]).unwrap();
        let after = e.positions()[0];
        let moved = ((after[0] - before[0]).powi(2) + (after[1] - before[1]).powi(2)).sqrt();
        assert!(moved <= 0.1 + 1e-12);
    }
}
