//! Continuous multi-rover domain.
//!
//! Rovers move in a square world; a POI counts as observed once at least
//! `coupling` rovers are strictly inside its observation radius on the same
//! step. The team reward (observed POI value over total POI value) arrives
//! only at the final step.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_actions, StepOutcome, TeamEnv};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const SENSOR_CLIP: f64 = 10.0;
pub const MIN_SQ_DIST: f64 = 0.001;
pub const OBS_DIM: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Poi {
    pub position: [f64; 2],
    pub value: f64,
    #[serde(default = "default_poi_radius")]
    pub observation_radius: f64,
    pub coupling: usize,
}

fn default_poi_radius() -> f64 {
    4.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoverPreset {
    /// One POI near the east wall. The default world puts it 17 units east
    /// of the spawn cluster: 17 steps for a straight-line policy, while
    /// independent unit-Gaussian walks observe it at coupling 2 in fewer
    /// than 1 in 10^4 episodes.
    SinglePoi,
    /// Two POIs near opposite (west and east) walls.
    TwoPoi,
    /// Use `pois` as given.
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoverConfig {
    pub n_agents: usize,
    pub world_size: f64,
    pub episode_length: usize,
    pub max_step: f64,
    pub spawn_radius: f64,
    pub preset: RoverPreset,
    /// Coupling used by the presets.
    pub coupling: usize,
    /// Distance of preset POIs from the world centre.
    pub poi_distance: f64,
    pub poi_radius: f64,
    pub pois: Vec<Poi>,
}

impl Default for RoverConfig {
    fn default() -> Self {
        Self {
            n_agents: 3,
            world_size: 40.0,
            episode_length: 50,
            max_step: 1.0,
            spawn_radius: 2.0,
            preset: RoverPreset::SinglePoi,
            coupling: 2,
            poi_distance: 17.0,
            poi_radius: 4.0,
            pois: Vec::new(),
        }
    }
}

impl RoverConfig {
    pub fn center(&self) -> [f64; 2] {
        [self.world_size / 2.0, self.world_size / 2.0]
    }

    /// POIs after applying the preset.
    pub fn resolved_pois(&self) -> Vec<Poi> {
        let [cx, cy] = self.center();
        let poi = |x: f64| Poi {
            position: [x, cy],
            value: 1.0,
            observation_radius: self.poi_radius,
            coupling: self.coupling,
        };
        match self.preset {
            RoverPreset::SinglePoi => vec![poi(cx + self.poi_distance)],
            RoverPreset::TwoPoi => vec![poi(cx - self.poi_distance), poi(cx + self.poi_distance)],
            RoverPreset::Custom => self.pois.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Config("env.rover.n_agents must be positive".into()));
        }
        if !(self.world_size > 0.0) || !(self.max_step > 0.0) || self.spawn_radius < 0.0 {
            return Err(Error::Config("env.rover: world_size and max_step must be positive".into()));
        }
        if self.episode_length == 0 {
            return Err(Error::Config("env.rover.episode_length must be positive".into()));
        }
        let c = self.center();
        if c[0] - self.spawn_radius < 0.0 || c[0] + self.spawn_radius > self.world_size {
            return Err(Error::Config("env.rover.spawn_radius exceeds the world".into()));
        }
        let pois = self.resolved_pois();
        if pois.is_empty() {
            return Err(Error::Config("env.rover needs at least one POI".into()));
        }
        for (i, p) in pois.iter().enumerate() {
            if p.coupling == 0 {
                return Err(Error::Config(format!("POI {i}: coupling must be at least 1")));
            }
            if !(p.value > 0.0) {
                return Err(Error::Config(format!("POI {i}: value must be positive")));
            }
            if !(p.observation_radius > 0.0) {
                return Err(Error::Config(format!("POI {i}: observation radius must be positive")));
            }
            if p.position.iter().any(|&x| !(0.0..=self.world_size).contains(&x)) {
                return Err(Error::Config(format!("POI {i} lies outside the world")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoverState {
    pub positions: Vec<[f64; 2]>,
    pub observed: Vec<bool>,
    pub t: usize,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Quadrant 0..4 of `to` as seen from `from`, counter-clockwise from +x.
fn quadrant(from: [f64; 2], to: [f64; 2]) -> usize {
    let mut angle = (to[1] - from[1]).atan2(to[0] - from[0]);
    if angle < 0.0 {
        angle += 2.0 * PI;
    }
    ((angle / (PI / 2.0)) as usize).min(3)
}

/// Sets the POI's observed flag when `coupling` rovers are strictly inside
/// its radius right now; never clears it.
pub fn poi_simultaneity_check(positions: &[[f64; 2]], poi: &Poi, observed: bool) -> bool {
    if observed {
        return true;
    }
    let inside = positions
        .iter()
        .filter(|p| dist(**p, poi.position) < poi.observation_radius)
        .count();
    inside >= poi.coupling
}

/// Observed POI value over total POI value.
pub fn rover_team_reward(pois: &[Poi], observed: &[bool]) -> f64 {
    let total: f64 = pois.iter().map(|p| p.value).sum();
    let got: f64 = pois.iter().zip(observed).filter(|(_, o)| **o).map(|(p, _)| p.value).sum();
    got / total
}

/// Largest value among POIs whose radius strictly contains `position`.
pub fn rover_saliency(pois: &[Poi], position: [f64; 2]) -> f64 {
    pois.iter()
        .filter(|p| dist(position, p.position) < p.observation_radius)
        .map(|p| p.value)
        .fold(0.0, f64::max)
}

pub struct RoverEnv {
    config: RoverConfig,
    pois: Vec<Poi>,
    state: RoverState,
}

impl RoverEnv {
    pub fn new(config: RoverConfig) -> Result<Self> {
        config.validate()?;
        let pois = config.resolved_pois();
        let state = RoverState {
            positions: vec![config.center(); config.n_agents],
            observed: vec![false; pois.len()],
            t: 0,
        };
        Ok(Self { config, pois, state })
    }

    pub fn config(&self) -> &RoverConfig {
        &self.config
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn state(&self) -> &RoverState {
        &self.state
    }

    /// Places rovers explicitly (tests and scripted policies).
    pub fn set_positions(&mut self, positions: &[[f64; 2]]) -> Result<()> {
        Error::check_dim("rover positions", self.config.n_agents, positions.len())?;
        self.state.positions = positions.to_vec();
        Ok(())
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        let pos = &self.state.positions;
        (0..pos.len())
            .map(|i| {
                let mut obs = vec![0.0; OBS_DIM];
                for poi in &self.pois {
                    let q = quadrant(pos[i], poi.position);
                    let d2 = (dist(pos[i], poi.position)).powi(2).max(MIN_SQ_DIST);
                    obs[q] += poi.value / d2;
                }
                for (j, other) in pos.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let q = quadrant(pos[i], *other);
                    let d2 = (dist(pos[i], *other)).powi(2).max(MIN_SQ_DIST);
                    obs[4 + q] += 1.0 / d2;
                }
                obs.iter_mut().for_each(|v| *v = v.clamp(0.0, SENSOR_CLIP));
                obs
            })
            .collect()
    }

    pub fn saliency(&self, agent: usize) -> f64 {
        rover_saliency(&self.pois, self.state.positions[agent])
    }

    pub fn team_reward(&self) -> f64 {
        rover_team_reward(&self.pois, &self.state.observed)
    }
}

impl TeamEnv for RoverEnv {
    fn name(&self) -> &'static str {
        "rover"
    }

    fn n_cooperative(&self) -> usize {
        self.config.n_agents
    }

    fn n_adversaries(&self) -> usize {
        0
    }

    fn obs_dims(&self) -> Vec<usize> {
        vec![OBS_DIM; self.config.n_agents]
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn episode_length(&self) -> usize {
        self.config.episode_length
    }

    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        let c = self.config.center();
        let r_max = self.config.spawn_radius;
        self.state.positions = (0..self.config.n_agents)
            .map(|_| {
                let r = r_max * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                [c[0] + r * theta.cos(), c[1] + r * theta.sin()]
            })
            .collect();
        self.state.observed = vec![false; self.pois.len()];
        self.state.t = 0;
        Ok(self.observations())
    }

    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepOutcome> {
        check_actions(actions, self.config.n_agents, 2)?;
        if self.state.t >= self.config.episode_length {
            return Err(Error::Environment("rover stepped past the end of the episode".into()));
        }
        let (m, size) = (self.config.max_step, self.config.world_size);
        for (p, a) in self.state.positions.iter_mut().zip(actions) {
            for ax in 0..2 {
                p[ax] = (p[ax] + a[ax].clamp(-m, m)).clamp(0.0, size);
            }
        }
        for (flag, poi) in self.state.observed.iter_mut().zip(&self.pois) {
            *flag = poi_simultaneity_check(&self.state.positions, poi, *flag);
        }
        self.state.t += 1;
        let done = self.state.t == self.config.episode_length;
        Ok(StepOutcome {
            observations: self.observations(),
            team_reward: if done { self.team_reward() } else { 0.0 },
            adversary_reward: 0.0,
            saliency: (0..self.config.n_agents).map(|i| self.saliency(i)).collect(),
            done,
        })
    }

    fn positions(&self) -> Vec<[f64; 2]> {
        self.state.positions.clone()
    }

    fn world_bounds(&self) -> ([f64; 2], [f64; 2]) {
        ([0.0, 0.0], [self.config.world_size, self.config.world_size])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn env(n: usize, coupling: usize) -> RoverEnv {
        RoverEnv::new(RoverConfig {
            n_agents: n,
            coupling,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn presets() {
        let single = RoverConfig::default().resolved_pois();
        assert_eq!(single.len(), 1);
        let two = RoverConfig {
            preset: RoverPreset::TwoPoi,
            ..Default::default()
        }
        .resolved_pois();
        assert_eq!(two.len(), 2);
        assert!((two[0].position[0] - two[1].position[0]).abs() >= 20.0);
    }

    #[test]
    fn reset_is_seeded_and_spawns_in_cluster() {
        let mut a = env(5, 2);
        let mut b = env(5, 2);
        let oa = a.reset(&mut Rng::seed_from_u64(4)).unwrap();
        let ob = b.reset(&mut Rng::seed_from_u64(4)).unwrap();
        assert_eq!(oa, ob);
        for p in a.positions() {
            assert!(dist(p, a.config.center()) <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn motion_is_clamped_and_clipped() {
        let mut e = env(2, 1);
        e.reset(&mut Rng::seed_from_u64(0)).unwrap();
        let w = e.config.world_size;
        e.set_positions(&[[10.0, 10.0], [w, 5.0]]).unwrap();
        e.step(&[vec![0.0, 0.0], vec![0.5, 0.0]]).unwrap();
        assert_eq!(e.positions()[0], [10.0, 10.0]);
        assert_eq!(e.positions()[1], [w, 5.0]);
        e.step(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(e.positions()[0], [11.0, 10.0]);
    }

    #[test]
    fn coupling_requires_simultaneous_rovers() {
        let poi = Poi {
            position: [0.0, 0.0],
            value: 1.0,
            observation_radius: 4.0,
            coupling: 5,
        };
        let five = vec![[1.0, 0.0]; 5];
        assert!(poi_simultaneity_check(&five, &poi, false));
        assert!(!poi_simultaneity_check(&five[..4], &poi, false));
        let single = Poi {
            coupling: 1,
            ..poi.clone()
        };
        assert!(!poi_simultaneity_check(&[[4.0, 0.0]], &single, false));
        assert!(poi_simultaneity_check(&[[3.999, 0.0]], &single, false));
        assert!(poi_simultaneity_check(&[], &poi, true));
    }

    #[test]
    fn team_reward_normalization() {
        let p = |v| Poi {
            position: [0.0, 0.0],
            value: v,
            observation_radius: 1.0,
            coupling: 1,
        };
        assert_eq!(rover_team_reward(&[p(1.0)], &[true]), 1.0);
        assert_eq!(rover_team_reward(&[p(1.0)], &[false]), 0.0);
        assert_eq!(rover_team_reward(&[p(1.0), p(1.0)], &[true, false]), 0.5);
    }

    #[test]
    fn saliency_takes_max_covering_value() {
        let pois = vec![
            Poi {
                position: [0.0, 0.0],
                value: 0.5,
                observation_radius: 3.0,
                coupling: 1,
            },
            Poi {
                position: [1.0, 0.0],
                value: 1.0,
                observation_radius: 3.0,
                coupling: 1,
            },
        ];
        assert_eq!(rover_saliency(&pois, [20.0, 20.0]), 0.0);
        assert_eq!(rover_saliency(&pois, [-2.5, 0.0]), 0.5);
        assert_eq!(rover_saliency(&pois, [0.5, 0.0]), 1.0);
    }

    #[test]
    fn reward_only_at_horizon() {
        let mut e = RoverEnv::new(RoverConfig {
            n_agents: 2,
            coupling: 1,
            episode_length: 3,
            ..Default::default()
        })
        .unwrap();
        e.reset(&mut Rng::seed_from_u64(1)).unwrap();
        let poi = e.pois()[0].position;
        e.set_positions(&[poi, poi]).unwrap();
        let zero = vec![vec![0.0, 0.0]; 2];
        assert_eq!(e.step(&zero).unwrap().team_reward, 0.0);
        assert_eq!(e.step(&zero).unwrap().team_reward, 0.0);
        let last = e.step(&zero).unwrap();
        assert!(last.done);
        assert_eq!(last.team_reward, 1.0);
        assert!(e.step(&zero).is_err());
    }

    #[test]
    fn observations_are_bounded() {
        let mut e = env(4, 2);
        e.reset(&mut Rng::seed_from_u64(2)).unwrap();
        e.set_positions(&[[15.0, 15.0], [15.0, 15.0], [15.1, 15.0], [27.0, 15.0]])
            .unwrap();
        for o in e.observations() {
            assert_eq!(o.len(), OBS_DIM);
            assert!(o.iter().all(|v| (0.0..=SENSOR_CLIP).contains(v)));
        }
    }

    #[test]
    fn infeasible_coupling_never_pays() {
        let mut e = env(2, 3);
        let mut rng = Rng::seed_from_u64(3);
        e.reset(&mut rng).unwrap();
        let poi = e.pois()[0].position;
        e.set_positions(&[poi, poi]).unwrap();
        let mut last = 0.0;
        for _ in 0..50 {
            last = e.step(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap().team_reward;
        }
        assert_eq!(last, 0.0);
    }
}
