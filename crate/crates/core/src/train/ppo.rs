//! Clipped-surrogate PPO update with whole-episode recurrent minibatches.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::rollout::Sequence;
use super::{compute_gae, normalize_advantages, Actor, Critic, PpoHyper, Role, ValueNorm};
use crate::error::{Error, Result};
use crate::neural::gaussian::{log_prob_grad, log_prob_unchecked};
use crate::neural::{clip_grad_norm, gaussian_entropy};
use crate::rng::Rng;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ActorLossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticLossStats {
    pub loss: f64,
}

/// Minibatch means, averaged over every minibatch of the update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
}

/// GAE per sequence, value-normalizer update from the returns, then
/// (optionally) buffer-wide advantage normalization.
pub fn prepare_advantages(role: &mut Role, seqs: &mut [Sequence], hyper: &PpoHyper) -> Result<()> {
    let mut all_returns = Vec::new();
    for s in seqs.iter_mut() {
        let (adv, ret) = compute_gae(&s.rewards, &s.values, &s.dones, hyper.gamma, hyper.gae_lambda)?;
        all_returns.extend_from_slice(&ret);
        s.advantages = adv;
        s.returns = ret;
    }
    role.value_norm.update(&all_returns);
    if hyper.normalize_advantages {
        let mut flat: Vec<f64> = seqs.iter().flat_map(|s| s.advantages.iter().copied()).collect();
        normalize_advantages(&mut flat);
        let mut it = flat.into_iter();
        for s in seqs.iter_mut() {
            for a in s.advantages.iter_mut() {
                *a = it.next().unwrap_or(0.0);
            }
        }
    }
    Ok(())
}

/// Clipped surrogate plus entropy bonus, averaged over every step of the
/// batch. Accumulates the gradient into `grads` when given.
pub fn actor_loss_grad(
    actor: &Actor,
    params: &[f64],
    batch: &[&Sequence],
    clip: f64,
    entropy_coef: f64,
    mut grads: Option<&mut [f64]>,
) -> Result<ActorLossStats> {
    let n: usize = batch.iter().map(|s| s.len()).sum();
    if n == 0 {
        return Err(Error::Training("empty actor minibatch".into()));
    }
    let inv_n = 1.0 / n as f64;
    let log_std = actor.log_std(params).to_vec();
    let ad = actor.action_dim();
    let mut d_log_std = vec![0.0; ad];
    let mut stats = ActorLossStats::default();
    for seq in batch {
        let trace = actor.forward_sequence(params, &seq.actor_inputs)?;
        let mut d_means = vec![vec![0.0; ad]; seq.len()];
        for t in 0..seq.len() {
            let mean = &trace.means[t];
            let lp = log_prob_unchecked(mean, &log_std, &seq.actions[t]);
            let log_ratio = lp - seq.log_probs[t];
            let ratio = log_ratio.exp();
            let adv = seq.advantages[t];
            let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
            let (s1, s2) = (ratio * adv, clipped * adv);
            stats.policy_loss -= s1.min(s2) * inv_n;
            stats.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
            if (ratio - 1.0).abs() > clip {
                stats.clip_fraction += inv_n;
            }
            // d(-min(s1, s2))/d(log_prob); zero when the clipped branch binds.
            let g = if s1 <= s2 || clipped == ratio { -adv * ratio } else { 0.0 };
            if g != 0.0 && grads.is_some() {
                log_prob_grad(mean, &log_std, &seq.actions[t], g * inv_n, &mut d_means[t], &mut d_log_std);
            }
        }
        if let Some(gr) = grads.as_deref_mut() {
            actor.backward_sequence(params, &trace, &d_means, gr);
        }
    }
    stats.entropy = gaussian_entropy(&log_std);
    stats.loss = stats.policy_loss - entropy_coef * stats.entropy;
    if !stats.loss.is_finite() {
        return Err(Error::Training(format!("non-finite actor loss: {stats:?}")));
    }
    if let Some(gr) = grads {
        for (g, d) in gr[actor.log_std_range()].iter_mut().zip(&d_log_std) {
            *g += d - entropy_coef;
        }
    }
    Ok(stats)
}

/// Clipped value loss `0.5 * max((v - R)^2, (v_clip - R)^2)` on the
/// normalized scale, averaged over the batch.
pub fn critic_loss_grad(
    critic: &Critic,
    params: &[f64],
    value_norm: &ValueNorm,
    batch: &[&Sequence],
    clip: f64,
    mut grads: Option<&mut [f64]>,
) -> Result<CriticLossStats> {
    let n: usize = batch.iter().map(|s| s.len()).sum();
    if n == 0 {
        return Err(Error::Training("empty critic minibatch".into()));
    }
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    for seq in batch {
        for t in 0..seq.len() {
            let cache = critic.value_cached(params, &seq.critic_inputs[t]);
            let v = cache.output[0];
            let target = value_norm.normalize(seq.returns[t]);
            let old = value_norm.normalize(seq.values[t]);
            let delta = (v - old).clamp(-clip, clip);
            let v_clip = old + delta;
            let (l1, l2) = ((v - target).powi(2), (v_clip - target).powi(2));
            loss += 0.5 * l1.max(l2) * inv_n;
            let g = if l1 >= l2 {
                v - target
            } else if delta == v - old {
                v_clip - target
            } else {
                0.0
            };
            if let Some(gr) = grads.as_deref_mut() {
                if g != 0.0 {
                    critic.backward(params, &cache, g * inv_n, gr);
                }
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::Training(format!("non-finite critic loss {loss}")));
    }
    Ok(CriticLossStats { loss })
}

/// `hyper.epochs` passes over the buffer in shuffled whole-episode
/// minibatches. Sequences must already carry advantages and returns.
pub fn ppo_update(
    role: &mut Role,
    seqs: &[Sequence],
    hyper: &PpoHyper,
    episode_length: usize,
    rng: &mut Rng,
) -> Result<UpdateStats> {
    let mut episodes: Vec<usize> = seqs.iter().map(|s| s.episode).collect();
    episodes.sort_unstable();
    episodes.dedup();
    let per_batch = hyper.episodes_per_minibatch(episode_length);
    let mut by_episode: Vec<Vec<&Sequence>> = vec![Vec::new(); episodes.last().map_or(0, |e| e + 1)];
    for s in seqs {
        by_episode[s.episode].push(s);
    }

    let mut stats = UpdateStats::default();
    let mut n_batches = 0usize;
    let mut actor_grads = vec![0.0; role.actor.n_params];
    let mut critic_grads = vec![0.0; role.critic.n_params];
    let ls = role.actor.log_std_range();
    for _ in 0..hyper.epochs {
        episodes.shuffle(rng);
        for chunk in episodes.chunks(per_batch) {
            let batch: Vec<&Sequence> = chunk.iter().flat_map(|&e| by_episode[e].iter().copied()).collect();

            actor_grads.fill(0.0);
            let a = actor_loss_grad(
                &role.actor,
                &role.actor_params,
                &batch,
                hyper.clip,
                hyper.entropy_coef,
                Some(&mut actor_grads),
            )?;
            stats.actor_grad_norm += clip_grad_norm(&mut actor_grads, hyper.max_grad_norm);
            role.actor_adam.update(&mut role.actor_params, &actor_grads)?;
            for p in &mut role.actor_params[ls.clone()] {
                *p = p.clamp(hyper.log_std_min, hyper.log_std_max);
            }

            critic_grads.fill(0.0);
            let c = critic_loss_grad(
                &role.critic,
                &role.critic_params,
                &role.value_norm,
                &batch,
                hyper.clip,
                Some(&mut critic_grads),
            )?;
            stats.critic_grad_norm += clip_grad_norm(&mut critic_grads, hyper.max_grad_norm);
            role.critic_adam.update(&mut role.critic_params, &critic_grads)?;

            stats.policy_loss += a.policy_loss;
            stats.entropy += a.entropy;
            stats.clip_fraction += a.clip_fraction;
            stats.approx_kl += a.approx_kl;
            stats.value_loss += c.loss;
            n_batches += 1;
        }
    }
    let k = n_batches.max(1) as f64;
    for v in [
        &mut stats.policy_loss,
        &mut stats.value_loss,
        &mut stats.entropy,
        &mut stats.clip_fraction,
        &mut stats.approx_kl,
        &mut stats.actor_grad_norm,
        &mut stats.critic_grad_norm,
    ] {
        *v /= k;
    }
    Ok(stats)
}
