//! Environments. All share the [`TeamEnv`] interface: cooperative agents
//! come first in every per-agent vector, adversaries (if any) after them.

mod particle;
mod point_reach;
mod rover;
mod trace;

pub use particle::{particle_terminal_team_reward, scenario_step_scores, ParticleConfig, ParticleEnv, ParticleState, Scenario};
pub use point_reach::{PointReachConfig, PointReachEnv};
pub use rover::{poi_simultaneity_check, rover_saliency, rover_team_reward, Poi, RoverConfig, RoverEnv, RoverPreset, RoverState};
pub use trace::{read_trace_csv, write_trace_csv, TraceRow};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// One observation per agent (cooperative first).
    pub observations: Vec<Vec<f64>>,
    /// Reward to the cooperative team. Sparse environments emit it only on
    /// the final step.
    pub team_reward: f64,
    /// Reward to the adversary (0 when there is none).
    pub adversary_reward: f64,
    /// Saliency signal per cooperative agent (POI value in the rover
    /// domain, 1 elsewhere).
    pub saliency: Vec<f64>,
    pub done: bool,
}

pub trait TeamEnv: Send {
    fn name(&self) -> &'static str;
    fn n_cooperative(&self) -> usize;
    fn n_adversaries(&self) -> usize;
    /// Observation width per agent.
    fn obs_dims(&self) -> Vec<usize>;
    fn action_dim(&self) -> usize;
    fn episode_length(&self) -> usize;
    fn reset(&mut self, rng: &mut Rng) -> Result<Vec<Vec<f64>>>;
    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepOutcome>;
    /// Current 2-D positions of the cooperative agents.
    fn positions(&self) -> Vec<[f64; 2]>;
    /// `(min, max)` corners of the region agents can occupy.
    fn world_bounds(&self) -> ([f64; 2], [f64; 2]);

    fn n_agents(&self) -> usize {
        self.n_cooperative() + self.n_adversaries()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub rover: RoverConfig,
    pub particle: ParticleConfig,
    pub point_reach: PointReachConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Rover,
    Particle,
    PointReach,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            kind: EnvKind::Rover,
            rover: RoverConfig::default(),
            particle: ParticleConfig::default(),
            point_reach: PointReachConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EnvKind::Rover => self.rover.validate(),
            EnvKind::Particle => self.particle.validate(),
            EnvKind::PointReach => self.point_reach.validate(),
        }
    }

    pub fn episode_length(&self) -> usize {
        match self.kind {
            EnvKind::Rover => self.rover.episode_length,
            EnvKind::Particle => self.particle.episode_length,
            EnvKind::PointReach => self.point_reach.episode_length,
        }
    }

    pub fn build(&self) -> Result<Box<dyn TeamEnv>> {
        Ok(match self.kind {
            EnvKind::Rover => Box::new(RoverEnv::new(self.rover.clone())?),
            EnvKind::Particle => Box::new(ParticleEnv::new(self.particle.clone())?),
            EnvKind::PointReach => Box::new(PointReachEnv::new(self.point_reach.clone())?),
        })
    }
}

pub(crate) fn check_actions(actions: &[Vec<f64>], n: usize, dim: usize) -> Result<()> {
    use crate::error::Error;
    Error::check_dim("joint action agents", n, actions.len())?;
    for a in actions {
        Error::check_dim("action", dim, a.len())?;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Environment(format!("non-finite action {a:?}")));
        }
    }
    Ok(())
}
