//! Rollout collection, evaluation and trace recording.

use serde::{Deserialize, Serialize};

use super::{JointPolicy, Policies, PpoHyper};
use crate::env::{TeamEnv, TraceRow};
use crate::error::{Error, Result};
use crate::intrinsic::{combine_rewards, CclStepDiagnostics, IntrinsicConfig, IntrinsicEngine, SaliencyMode};
use crate::neural::sample_action;
use crate::rng::Rng;

/// One agent's trajectory through one episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sequence {
    pub episode: usize,
    pub member: usize,
    pub actor_inputs: Vec<Vec<f64>>,
    pub critic_inputs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    /// Value estimates in reward units at collection time.
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Per-step intrinsic reward breakdown for one cooperative agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: usize,
    pub agent: usize,
    pub saliency: f64,
    pub team_reward: f64,
    pub ccl: f64,
    pub oem: f64,
    pub combined: f64,
    pub ccl_detail: Option<CclStepDiagnostics>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBuffer {
    /// Sequences per role, ordered by episode then member.
    pub roles: Vec<Vec<Sequence>>,
    pub n_episodes: usize,
    pub episode_length: usize,
    /// Team reward summed over each episode.
    pub team_returns: Vec<f64>,
    /// Mean per-step CCL and OEM reward per cooperative agent.
    pub mean_ccl: Vec<f64>,
    pub mean_oem: Vec<f64>,
    /// Breakdown of the first episode.
    pub diagnostics: Vec<DiagnosticRecord>,
}

impl RolloutBuffer {
    pub fn env_steps(&self) -> usize {
        self.n_episodes * self.episode_length
    }
}

fn saliency(mode: SaliencyMode, env_value: f64) -> f64 {
    match mode {
        SaliencyMode::PoiGated => env_value,
        SaliencyMode::ConstantOne => 1.0,
    }
}

/// Steps `env` for `hyper.rollout_steps` steps in whole episodes, sampling
/// actions from the policies and scoring intrinsic rewards online.
pub fn collect_rollout(
    policies: &Policies,
    env: &mut dyn TeamEnv,
    mut engine: Option<&mut IntrinsicEngine>,
    intrinsic: &IntrinsicConfig,
    hyper: &PpoHyper,
    env_rng: &mut Rng,
    action_rng: &mut Rng,
) -> Result<RolloutBuffer> {
    let t_max = env.episode_length();
    let n_episodes = hyper.episodes_per_rollout(t_max)?;
    let n_coop = env.n_cooperative();
    let mut buffer = RolloutBuffer {
        roles: vec![Vec::new(); policies.roles.len()],
        n_episodes,
        episode_length: t_max,
        team_returns: Vec::with_capacity(n_episodes),
        mean_ccl: vec![0.0; n_coop],
        mean_oem: vec![0.0; n_coop],
        diagnostics: Vec::new(),
    };

    for episode in 0..n_episodes {
        let mut obs = env.reset(env_rng)?;
        if let Some(e) = engine.as_deref_mut() {
            e.reset(&obs[..n_coop])?;
        }
        let mut seqs: Vec<Vec<Sequence>> = policies
            .roles
            .iter()
            .map(|r| {
                (0..r.members.len())
                    .map(|member| Sequence {
                        episode,
                        member,
                        ..Default::default()
                    })
                    .collect()
            })
            .collect();
        let mut states: Vec<Vec<_>> = policies
            .roles
            .iter()
            .map(|r| vec![r.actor.initial_state(); r.members.len()])
            .collect();
        let mut team_return = 0.0;

        for t in 0..t_max {
            let mut actions = vec![Vec::new(); policies.n_agents()];
            for (ri, role) in policies.roles.iter().enumerate() {
                for m in 0..role.members.len() {
                    let x = role.actor_input(&obs, m);
                    let c = role.critic_input(&obs, m);
                    let (mean, next) = role.actor.step(&role.actor_params, &x, &states[ri][m])?;
                    states[ri][m] = next;
                    let (a, lp) = sample_action(&mean, role.actor.log_std(&role.actor_params), action_rng)?;
                    let s = &mut seqs[ri][m];
                    s.values.push(role.value(&c)?);
                    s.actor_inputs.push(x);
                    s.critic_inputs.push(c);
                    s.log_probs.push(lp);
                    actions[role.members[m]] = a.clone();
                    s.actions.push(a);
                }
            }

            let out = env.step(&actions)?;
            if out.done != (t + 1 == t_max) {
                return Err(Error::Environment(format!("episode ended at step {} of {t_max}", t + 1)));
            }
            team_return += out.team_reward;
            let intr = match engine.as_deref_mut() {
                Some(e) => Some(e.step(&out.observations[..n_coop])?),
                None => None,
            };

            for (ri, role) in policies.roles.iter().enumerate() {
                for m in 0..role.members.len() {
                    let agent = role.members[m];
                    let reward = if ri == 0 {
                        let (ccl, oem) = intr.as_ref().map_or((0.0, 0.0), |s| (s.ccl[agent], s.oem[agent]));
                        let v = saliency(intrinsic.saliency, out.saliency[agent]);
                        let r = combine_rewards(out.team_reward, v, ccl, oem, intrinsic);
                        buffer.mean_ccl[agent] += ccl;
                        buffer.mean_oem[agent] += oem;
                        if episode == 0 {
                            buffer.diagnostics.push(DiagnosticRecord {
                                t: t + 1,
                                agent,
                                saliency: v,
                                team_reward: out.team_reward,
                                ccl,
                                oem,
                                combined: r,
                                ccl_detail: intr.as_ref().and_then(|s| s.diagnostics.get(agent).cloned()),
                            });
                        }
                        r
                    } else {
                        out.adversary_reward
                    };
                    let s = &mut seqs[ri][m];
                    s.rewards.push(reward);
                    s.dones.push(out.done);
                }
            }
            obs = out.observations;
        }
        buffer.team_returns.push(team_return);
        for (ri, role_seqs) in seqs.into_iter().enumerate() {
            buffer.roles[ri].extend(role_seqs);
        }
    }
    let steps = (n_episodes * t_max) as f64;
    buffer
        .mean_ccl
        .iter_mut()
        .chain(buffer.mean_oem.iter_mut())
        .for_each(|v| *v /= steps);
    Ok(buffer)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub returns: Vec<f64>,
}

/// Runs `episodes` fresh episodes and reports the team return of each.
/// Touches nothing but the environment and `rng`.
pub fn evaluate(policy: &mut dyn JointPolicy, env: &mut dyn TeamEnv, episodes: usize, rng: &mut Rng) -> Result<EvalResult> {
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        policy.reset();
        let mut obs = env.reset(rng)?;
        let mut total = 0.0;
        loop {
            let actions = policy.act(env, &obs, rng)?;
            let out = env.step(&actions)?;
            total += out.team_reward;
            obs = out.observations;
            if out.done {
                break;
            }
        }
        returns.push(total);
    }
    let n = returns.len().max(1) as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let std = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(EvalResult { mean, std, returns })
}

/// One episode as trace rows (cooperative agents only), starting with the
/// spawn positions at `t = 0`.
pub fn record_trace(
    policy: &mut dyn JointPolicy,
    env: &mut dyn TeamEnv,
    mut engine: Option<&mut IntrinsicEngine>,
    intrinsic: &IntrinsicConfig,
    rng: &mut Rng,
) -> Result<Vec<TraceRow>> {
    let n_coop = env.n_cooperative();
    policy.reset();
    let mut obs = env.reset(rng)?;
    if let Some(e) = engine.as_deref_mut() {
        e.reset(&obs[..n_coop])?;
    }
    let mut rows: Vec<TraceRow> = env
        .positions()
        .iter()
        .enumerate()
        .map(|(agent, p)| TraceRow {
            t: 0,
            agent,
            x: p[0],
            y: p[1],
            saliency: 0.0,
            team_reward: 0.0,
            ccl: 0.0,
            oem: 0.0,
            combined: 0.0,
        })
        .collect();
    let mut t = 0;
    loop {
        let actions = policy.act(env, &obs, rng)?;
        let out = env.step(&actions)?;
        t += 1;
        let intr = match engine.as_deref_mut() {
            Some(e) => Some(e.step(&out.observations[..n_coop])?),
            None => None,
        };
        for (agent, p) in env.positions().iter().enumerate() {
            let (ccl, oem) = intr.as_ref().map_or((0.0, 0.0), |s| (s.ccl[agent], s.oem[agent]));
            let v = saliency(intrinsic.saliency, out.saliency[agent]);
            rows.push(TraceRow {
                t,
                agent,
                x: p[0],
                y: p[1],
                saliency: v,
                team_reward: out.team_reward,
                ccl,
                oem,
                combined: combine_rewards(out.team_reward, v, ccl, oem, intrinsic),
            });
        }
        obs = out.observations;
        if out.done {
            return Ok(rows);
        }
    }
}
