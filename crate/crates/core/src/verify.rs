//! Self-checks run by `ccl verify`: the reward kernels against plain
//! reimplementations, exact harmonic numbers, GAE against direct
//! summation, and gradient checks of the training losses.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::density::{digamma_of_count, EULER_GAMMA};
use crate::error::Result;
use crate::intrinsic::{
    ccl_raw, oem_reward, shape_ccl, AgentObservationHistory, EpisodicJointMemory, IntrinsicConfig, IntrinsicEngine,
};
use crate::neural::finite_diff_check;
use crate::rng::Rng;
use crate::train::{actor_loss_grad, compute_gae, critic_loss_grad, Actor, Critic, Sequence, ValueNorm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub seconds: f64,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &str, max_error: f64, tolerance: f64, start: Instant, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: max_error <= tolerance,
            max_error,
            tolerance,
            seconds: start.elapsed().as_secs_f64(),
            detail,
        }
    }
}

fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn naive_digamma(n: usize) -> f64 {
    -EULER_GAMMA + (1..=n).map(|j| 1.0 / j as f64).sum::<f64>()
}

/// CCL raw value written out directly: sort joint distances, take the k-th
/// (capped by the memory size), share the larger radius, count strictly
/// closer entries in the agent's block.
pub fn ccl_oracle(agent: usize, d: usize, actual: &[f64], cfact: &[f64], memory: &[Vec<f64>], k: usize) -> f64 {
    if memory.is_empty() {
        return 0.0;
    }
    let kth = |q: &[f64]| {
        let mut ds: Vec<f64> = memory.iter().map(|m| chebyshev(q, m)).collect();
        ds.sort_by(f64::total_cmp);
        ds[k.min(ds.len()) - 1]
    };
    let eps = kth(actual).max(kth(cfact));
    let b = agent * d..(agent + 1) * d;
    let count = |q: &[f64]| {
        memory
            .iter()
            .filter(|m| chebyshev(&q[b.clone()], &m[b.clone()]) < eps)
            .count()
    };
    naive_digamma(count(actual)) - naive_digamma(count(cfact))
}

/// OEM reward written out directly with sorted Euclidean distances.
pub fn oem_oracle(obs: &[f64], history: &[Vec<f64>], k_set: &[usize]) -> f64 {
    let mut ds: Vec<f64> = history.iter().map(|h| euclidean(obs, h)).collect();
    ds.sort_by(f64::total_cmp);
    k_set.iter().map(|&k| (1.0 + ds[k.min(ds.len()) - 1]).ln()).sum::<f64>() / k_set.len() as f64
}

/// Advantages by explicit discounted sums of TD errors within episodes.
pub fn gae_oracle(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let ends = |t: usize| dones[t] || t + 1 == n;
    let delta: Vec<f64> = (0..n)
        .map(|t| rewards[t] + if ends(t) { 0.0 } else { gamma * values[t + 1] } - values[t])
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for u in t..n {
                sum += w * delta[u];
                if ends(u) {
                    break;
                }
                w *= gamma * lambda;
            }
            sum
        })
        .collect()
}

/// Exact H_1..=H_n as rationals.
pub fn exact_harmonics(n: usize) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(n);
    let mut h = BigRational::zero();
    for j in 1..=n {
        h += BigRational::new(BigInt::from(1), BigInt::from(j));
        out.push(h.clone());
    }
    out
}

pub fn check_ccl_kernel(instances: usize, seed: u64) -> Result<CheckReport> {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(seed);
    let d = 4;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = [2, 3, 5][rng.random_range(0..3)];
        let m = rng.random_range(1..80);
        let k = [3, 5, 7][rng.random_range(0..3)];
        let agent = rng.random_range(0..n);
        // Coarse values make ties and zero distances common.
        let mut draw = |w: usize| (0..w).map(|_| (rng.random_range(-4..=4) as f64) * 0.25).collect::<Vec<f64>>();
        let rows: Vec<Vec<f64>> = (0..m).map(|_| draw(n * d)).collect();
        let actual = draw(n * d);
        let mut cfact = actual.clone();
        cfact[agent * d..(agent + 1) * d].copy_from_slice(&draw(d));
        let mut mem = EpisodicJointMemory::new(n, d);
        for r in &rows {
            mem.append(r)?;
        }
        let got = ccl_raw(agent, &actual, &cfact, &mem, k)?;
        worst = worst.max((got - ccl_oracle(agent, d, &actual, &cfact, &rows, k)).abs());
    }
    Ok(CheckReport::new(
        "ccl_kernel",
        worst,
        1e-12,
        start,
        format!("{instances} random instances"),
    ))
}

pub fn check_oem(instances: usize, seed: u64) -> Result<CheckReport> {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(seed);
    let k_set = [3, 5, 7];
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let dim = rng.random_range(1..9);
        let len = rng.random_range(1..60);
        let hist: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let obs: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut h = AgentObservationHistory::new(&[dim]);
        h.reset(&[hist[0].clone()])?;
        for p in &hist[1..] {
            h.agent_mut(0).push(p)?;
        }
        let got = oem_reward(0, &obs, &mut h, &k_set)?;
        worst = worst.max((got - oem_oracle(&obs, &hist, &k_set)).abs());
    }
    Ok(CheckReport::new(
        "oem",
        worst,
        1e-12,
        start,
        format!("{instances} random histories"),
    ))
}

pub fn check_shaping(samples: usize) -> CheckReport {
    let start = Instant::now();
    let mut raws: Vec<f64> = (0..samples).map(|i| -1e3 + 2e3 * i as f64 / (samples - 1) as f64).collect();
    raws.sort_by(f64::total_cmp);
    let out: Vec<f64> = raws.iter().map(|&r| shape_ccl(r, 1.0, 5.0)).collect();
    let in_range = out.iter().all(|&v| v > 0.0 && v <= 5.0);
    let monotone = out.windows(2).all(|w| w[1] <= w[0]);
    let err = (shape_ccl(0.0, 1.0, 5.0) - std::f64::consts::LN_2).abs();
    let mut r = CheckReport::new(
        "shaping",
        err,
        1e-12,
        start,
        format!("in (0, 5]: {in_range}, monotone: {monotone}"),
    );
    r.passed &= in_range && monotone;
    r
}

/// Team of point agents whose observations are their positions; agent 0
/// never moves, so its counterfactual equals the actual joint.
pub fn check_counterfactual_identity(seed: u64) -> Result<CheckReport> {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(seed);
    let n = 3;
    let mut engine = IntrinsicEngine::new(IntrinsicConfig::default(), &[2; 3], seed)?;
    let mut pos: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)])
        .collect();
    engine.reset(&pos)?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        for p in pos.iter_mut().skip(1) {
            p[0] += rng.random_range(-1.0..1.0);
            p[1] += rng.random_range(-1.0..1.0);
        }
        let step = engine.step(&pos)?;
        let diag = &step.diagnostics[0];
        worst = worst.max(diag.raw_mean.abs());
        worst = worst.max(diag.per_k.iter().map(|k| k.raw.abs()).fold(0.0, f64::max));
        worst = worst.max((step.ccl[0] - std::f64::consts::LN_2).abs());
    }
    Ok(CheckReport::new(
        "counterfactual_identity",
        worst,
        1e-15,
        start,
        "50 steps, agent 0 fixed".into(),
    ))
}

pub fn check_digamma(max_n: usize) -> CheckReport {
    let start = Instant::now();
    let exact = exact_harmonics(max_n);
    let mut worst = (digamma_of_count(0) + EULER_GAMMA).abs();
    for (i, h) in exact.iter().enumerate() {
        let want = h.to_f64().unwrap_or(f64::NAN) - EULER_GAMMA;
        worst = worst.max((digamma_of_count(i + 1) - want).abs());
    }
    CheckReport::new("digamma", worst, 1e-12, start, format!("n = 0..={max_n}"))
}

pub fn check_gae(sequences: usize, seed: u64) -> Result<CheckReport> {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..sequences {
        let n = 100;
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..n).map(|t| t + 1 == n || rng.random_bool(0.05)).collect();
        let gamma = rng.random_range(0.9..1.0);
        let lambda = rng.random_range(0.8..1.0);
        let (adv, ret) = compute_gae(&rewards, &values, &dones, gamma, lambda)?;
        let want = gae_oracle(&rewards, &values, &dones, gamma, lambda);
        for t in 0..n {
            worst = worst.max((adv[t] - want[t]).abs()).max((ret[t] - want[t] - values[t]).abs());
        }
    }
    Ok(CheckReport::new(
        "gae",
        worst,
        1e-10,
        start,
        format!("{sequences} sequences of 100 steps"),
    ))
}

/// Random PPO batch for an actor of the given shape, with old log-probs
/// near the current policy so some ratios clip and some do not.
pub fn random_actor_batch(actor: &Actor, params: &[f64], episodes: usize, len: usize, rng: &mut Rng) -> Result<Vec<Sequence>> {
    let mut seqs = Vec::new();
    for e in 0..episodes {
        let inputs: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..actor.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let trace = actor.forward_sequence(params, &inputs)?;
        let actions: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..actor.action_dim()).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let log_probs = trace
            .means
            .iter()
            .zip(&actions)
            .map(|(m, a)| {
                crate::neural::gaussian_log_prob(m, actor.log_std(params), a).map(|lp| lp + rng.random_range(-0.4..0.4))
            })
            .collect::<Result<Vec<_>>>()?;
        seqs.push(Sequence {
            episode: e,
            member: 0,
            critic_inputs: inputs.iter().map(|x| x[..x.len().min(6)].to_vec()).collect(),
            actor_inputs: inputs,
            actions,
            log_probs,
            values: (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            rewards: vec![0.0; len],
            dones: (0..len).map(|t| t + 1 == len).collect(),
            advantages: (0..len).map(|_| rng.random_range(-2.0..2.0)).collect(),
            returns: (0..len).map(|_| rng.random_range(-2.0..2.0)).collect(),
        });
    }
    Ok(seqs)
}

pub fn check_gradients(seed: u64) -> Result<CheckReport> {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(seed);
    let actor = Actor::new(6, &[16, 16], 2)?;
    let mut params = actor.init_params(&mut rng);
    for p in params.iter_mut() {
        *p += rng.random_range(-0.1..0.1);
    }
    let seqs = random_actor_batch(&actor, &params, 2, 6, &mut rng)?;
    let batch: Vec<&Sequence> = seqs.iter().collect();
    let mut grads = vec![0.0; actor.n_params];
    actor_loss_grad(&actor, &params, &batch, 0.2, 0.01, Some(&mut grads))?;
    let loss = |p: &[f64]| {
        actor_loss_grad(&actor, p, &batch, 0.2, 0.01, None)
            .map(|s| s.loss)
            .unwrap_or(f64::NAN)
    };
    let actor_err = finite_diff_check(loss, &params, &grads, 1e-5);

    let critic = Critic::new(6, &[16, 16])?;
    let cparams = critic.init_params(&mut rng);
    let mut vn = ValueNorm::new(true);
    vn.update(&[0.5, -1.0, 2.0]);
    let mut cgrads = vec![0.0; critic.n_params];
    critic_loss_grad(&critic, &cparams, &vn, &batch, 0.2, Some(&mut cgrads))?;
    let closs = |p: &[f64]| {
        critic_loss_grad(&critic, p, &vn, &batch, 0.2, None)
            .map(|s| s.loss)
            .unwrap_or(f64::NAN)
    };
    let critic_err = finite_diff_check(closs, &cparams, &cgrads, 1e-5);
    Ok(CheckReport::new(
        "gradients",
        actor_err.max(critic_err),
        1e-4,
        start,
        format!("actor {actor_err:.2e}, critic {critic_err:.2e}"),
    ))
}

/// Every check at full size.
pub fn run_all(seed: u64) -> Result<Vec<CheckReport>> {
    Ok(vec![
        check_ccl_kernel(500, seed)?,
        check_oem(500, seed)?,
        check_shaping(100_000),
        check_counterfactual_identity(seed)?,
        check_digamma(10_000),
        check_gae(100, seed)?,
        check_gradients(seed)?,
    ])
}
