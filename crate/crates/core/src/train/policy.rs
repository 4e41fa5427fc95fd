//! Policy bundles per role and the joint-policy interface used by
//! evaluation, traces and heat maps.

use serde::{Deserialize, Serialize};

use super::{Actor, Critic, PpoHyper, TrainConfig, ValueNorm};
use crate::env::TeamEnv;
use crate::error::{Error, Result};
use crate::neural::{sample_action, AdamState, RecurrentState};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    Cooperative,
    Adversary,
}

/// One parameter-shared actor plus its centralized critic, serving every
/// agent listed in `members`. Actor inputs carry a one-hot member id; the
/// critic sees the concatenated observations of `critic_sources` plus the
/// same one-hot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Role {
    pub kind: RoleKind,
    pub members: Vec<usize>,
    pub critic_sources: Vec<usize>,
    pub actor: Actor,
    pub critic: Critic,
    pub actor_params: Vec<f64>,
    pub critic_params: Vec<f64>,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
    pub value_norm: ValueNorm,
}

impl Role {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: RoleKind,
        members: Vec<usize>,
        critic_sources: Vec<usize>,
        obs_dims: &[usize],
        action_dim: usize,
        train: &TrainConfig,
        hyper: &PpoHyper,
        rng: &mut Rng,
    ) -> Result<Self> {
        let obs_dim = obs_dims[members[0]];
        if members.iter().any(|&m| obs_dims[m] != obs_dim) {
            return Err(Error::Config(
                "agents sharing an actor must have equal observation widths".into(),
            ));
        }
        let n = members.len();
        let critic_in = critic_sources.iter().map(|&s| obs_dims[s]).sum::<usize>() + n;
        let actor = Actor::new(obs_dim + n, &train.actor_hidden, action_dim)?;
        let critic = Critic::new(critic_in, &train.critic_hidden)?;
        let actor_params = actor.init_params(rng);
        let critic_params = critic.init_params(rng);
        Ok(Self {
            kind,
            actor_adam: AdamState::new(actor.n_params, hyper.actor_lr),
            critic_adam: AdamState::new(critic.n_params, hyper.critic_lr),
            value_norm: ValueNorm::new(hyper.value_norm),
            members,
            critic_sources,
            actor,
            critic,
            actor_params,
            critic_params,
        })
    }

    pub fn actor_input(&self, observations: &[Vec<f64>], member: usize) -> Vec<f64> {
        let obs = &observations[self.members[member]];
        let mut x = Vec::with_capacity(obs.len() + self.members.len());
        x.extend_from_slice(obs);
        x.extend((0..self.members.len()).map(|j| if j == member { 1.0 } else { 0.0 }));
        x
    }

    pub fn critic_input(&self, observations: &[Vec<f64>], member: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.critic.input_dim());
        for &s in &self.critic_sources {
            x.extend_from_slice(&observations[s]);
        }
        x.extend((0..self.members.len()).map(|j| if j == member { 1.0 } else { 0.0 }));
        x
    }

    /// Value estimate in reward units.
    pub fn value(&self, critic_input: &[f64]) -> Result<f64> {
        Ok(self
            .value_norm
            .denormalize(self.critic.value(&self.critic_params, critic_input)?))
    }
}

/// Cooperative role first, then the adversary role if the env has one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policies {
    pub roles: Vec<Role>,
}

impl Policies {
    pub fn new(env: &dyn TeamEnv, train: &TrainConfig, hyper: &PpoHyper, rng: &mut Rng) -> Result<Self> {
        let dims = env.obs_dims();
        let n_coop = env.n_cooperative();
        let n = env.n_agents();
        let coop: Vec<usize> = (0..n_coop).collect();
        let mut roles = vec![Role::new(
            RoleKind::Cooperative,
            coop.clone(),
            coop,
            &dims,
            env.action_dim(),
            train,
            hyper,
            rng,
        )?];
        if n > n_coop {
            roles.push(Role::new(
                RoleKind::Adversary,
                (n_coop..n).collect(),
                (0..n).collect(),
                &dims,
                env.action_dim(),
                train,
                hyper,
                rng,
            )?);
        }
        Ok(Self { roles })
    }

    pub fn cooperative(&self) -> &Role {
        &self.roles[0]
    }

    pub fn n_agents(&self) -> usize {
        self.roles.iter().map(|r| r.members.len()).sum()
    }
}

/// Anything that can drive all agents of an environment.
pub trait JointPolicy {
    fn reset(&mut self);
    fn act(&mut self, env: &dyn TeamEnv, observations: &[Vec<f64>], rng: &mut Rng) -> Result<Vec<Vec<f64>>>;
}

/// Runs trained policies, either with sampled actions or with the mean.
pub struct PolicyRunner<'a> {
    policies: &'a Policies,
    deterministic: bool,
    states: Vec<Vec<RecurrentState>>,
}

impl<'a> PolicyRunner<'a> {
    pub fn new(policies: &'a Policies, deterministic: bool) -> Self {
        let mut runner = Self {
            policies,
            deterministic,
            states: Vec::new(),
        };
        runner.reset();
        runner
    }
}

impl JointPolicy for PolicyRunner<'_> {
    fn reset(&mut self) {
        self.states = self
            .policies
            .roles
            .iter()
            .map(|r| vec![r.actor.initial_state(); r.members.len()])
            .collect();
    }

    fn act(&mut self, _env: &dyn TeamEnv, observations: &[Vec<f64>], rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        let mut actions = vec![Vec::new(); self.policies.n_agents()];
        for (role, states) in self.policies.roles.iter().zip(&mut self.states) {
            for (m, state) in states.iter_mut().enumerate() {
                let input = role.actor_input(observations, m);
                let (mean, next) = role.actor.step(&role.actor_params, &input, state)?;
                *state = next;
                actions[role.members[m]] = if self.deterministic {
                    mean
                } else {
                    sample_action(&mean, role.actor.log_std(&role.actor_params), rng)?.0
                };
            }
        }
        Ok(actions)
    }
}

/// Wraps a closure `(env, observations) -> actions`.
pub struct ScriptedPolicy<F>(pub F);

impl<F> JointPolicy for ScriptedPolicy<F>
where
    F: FnMut(&dyn TeamEnv, &[Vec<f64>]) -> Vec<Vec<f64>>,
{
    fn reset(&mut self) {}

    fn act(&mut self, env: &dyn TeamEnv, observations: &[Vec<f64>], _rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        Ok((self.0)(env, observations))
    }
}
