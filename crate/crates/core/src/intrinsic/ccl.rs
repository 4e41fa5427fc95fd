use serde::{Deserialize, Serialize};

use super::memory::EpisodicJointMemory;
use super::{IntrinsicConfig, ShapingOrder};
use crate::density::{count_within_radius, digamma_of_count, kth_nearest_radius};
use crate::encoder::{joint_embedding, EncoderBank};
use crate::error::{Error, Result};

/// Intermediate quantities of one single-k CCL evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CclKDiagnostics {
    pub k: usize,
    pub eps_act: f64,
    pub eps_cfact: f64,
    pub eps_shared: f64,
    pub n_act: usize,
    pub n_cfact: usize,
    pub raw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CclStepDiagnostics {
    pub agent: usize,
    pub per_k: Vec<CclKDiagnostics>,
    /// Mean of the per-k raw values.
    pub raw_mean: f64,
    pub shaped: f64,
}

/// Raw CCL for one agent and one k, with its intermediates. An empty memory
/// yields `None`.
pub fn ccl_raw_detailed(
    agent: usize,
    actual_joint: &[f64],
    cfact_joint: &[f64],
    memory: &EpisodicJointMemory,
    k: usize,
) -> Result<Option<CclKDiagnostics>> {
    let width = memory.n_agents() * memory.embed_dim();
    Error::check_dim("actual joint embedding", width, actual_joint.len())?;
    Error::check_dim("counterfactual joint embedding", width, cfact_joint.len())?;
    if memory.is_empty() {
        return Ok(None);
    }
    let eps_act = kth_nearest_radius(actual_joint, memory.joint(), k)?;
    let eps_cfact = kth_nearest_radius(cfact_joint, memory.joint(), k)?;
    let eps_shared = eps_act.max(eps_cfact);

    let d = memory.embed_dim();
    let block = agent * d..(agent + 1) * d;
    let view = memory.per_agent_view(agent);
    let n_act = count_within_radius(&actual_joint[block.clone()], &view, eps_shared);
    let n_cfact = count_within_radius(&cfact_joint[block], &view, eps_shared);
    let raw = digamma_of_count(n_act) - digamma_of_count(n_cfact);
    Ok(Some(CclKDiagnostics {
        k,
        eps_act,
        eps_cfact,
        eps_shared,
        n_act,
        n_cfact,
        raw,
    }))
}

/// ψ(n_act + 1) − ψ(n_cfact + 1) under the shared-radius rule; 0 for an
/// empty memory.
pub fn ccl_raw(agent: usize, actual_joint: &[f64], cfact_joint: &[f64], memory: &EpisodicJointMemory, k: usize) -> Result<f64> {
    Ok(ccl_raw_detailed(agent, actual_joint, cfact_joint, memory, k)?.map_or(0.0, |d| d.raw))
}

/// Overflow-safe `ln(1 + e^x)`.
///
/// Below about -745 the true value is smaller than the least subnormal; it
/// is rounded up to that subnormal so the result stays strictly positive.
#[inline]
pub fn softplus(x: f64) -> f64 {
    let v = x.max(0.0) + (-x.abs()).exp().ln_1p();
    if v > 0.0 {
        v
    } else {
        f64::from_bits(1)
    }
}

/// `min(beta * softplus(-raw), cap)`.
pub fn shape_ccl(raw: f64, beta: f64, cap: f64) -> f64 {
    (beta * softplus(-raw)).min(cap)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CclStep {
    pub rewards: Vec<f64>,
    pub diagnostics: Vec<CclStepDiagnostics>,
}

/// Shaped CCL reward of every agent for one environment step, then appends
/// the actual joint embedding to `memory`.
///
/// Each agent's counterfactual swaps its own block for the embedding of its
/// previous observation; the other blocks stay at their current values.
pub fn ccl_rewards_step(
    observations: &[Vec<f64>],
    previous: &[Vec<f64>],
    memory: &mut EpisodicJointMemory,
    encoders: &EncoderBank,
    config: &IntrinsicConfig,
) -> Result<CclStep> {
    let n = memory.n_agents();
    Error::check_dim("previous observations", n, previous.len())?;
    let current = encoders.encode_all(observations)?;
    let held = encoders.encode_all(previous)?;
    let z = joint_embedding(&current);
    let d = memory.embed_dim();

    let mut rewards = Vec::with_capacity(n);
    let mut diagnostics = Vec::with_capacity(n);
    let mut cfact = z.clone();
    for agent in 0..n {
        let block = agent * d..(agent + 1) * d;
        cfact[block.clone()].copy_from_slice(held[agent].as_slice());

        let mut per_k = Vec::with_capacity(config.k_set.len());
        for &k in &config.k_set {
            let diag = ccl_raw_detailed(agent, &z, &cfact, memory, k)?.unwrap_or(CclKDiagnostics {
                k,
                eps_act: 0.0,
                eps_cfact: 0.0,
                eps_shared: 0.0,
                n_act: 0,
                n_cfact: 0,
                raw: 0.0,
            });
            per_k.push(diag);
        }
        let m = per_k.len() as f64;
        let raw_mean = per_k.iter().map(|p| p.raw).sum::<f64>() / m;
        let shaped = match config.shaping_order {
            ShapingOrder::AverageThenShape => shape_ccl(raw_mean, config.beta, config.cap),
            ShapingOrder::ShapeThenAverage => per_k.iter().map(|p| shape_ccl(p.raw, config.beta, config.cap)).sum::<f64>() / m,
        };
        rewards.push(shaped);
        diagnostics.push(CclStepDiagnostics {
            agent,
            per_k,
            raw_mean,
            shaped,
        });

        cfact[block.clone()].copy_from_slice(&z[block]);
    }
    memory.append(&z)?;
    Ok(CclStep { rewards, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shaping_reference_values() {
        assert!((shape_ccl(0.0, 1.0, 5.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(shape_ccl(-100.0, 1.0, 5.0), 5.0);
        // ln(1 + e^-1) = 0.31326168751822283...
        assert!((shape_ccl(1.0, 1.0, 5.0) - 0.313_261_687_518_222_83).abs() < 1e-15);
        assert!(shape_ccl(1e6, 1.0, 5.0) > 0.0);
        assert!(softplus(800.0).is_finite());
    }

    #[test]
    fn identical_blocks_give_zero_raw() {
        let mut mem = EpisodicJointMemory::new(2, 2);
        mem.append(&[0.0, 0.0, 1.0, 1.0]).unwrap();
        mem.append(&[0.5, 0.2, 1.0, 0.0]).unwrap();
        let z = [0.1, 0.1, 0.9, 0.9];
        assert_eq!(ccl_raw(0, &z, &z, &mem, 1).unwrap(), 0.0);
    }

    #[test]
    fn constructed_counts_give_minus_one() {
        // Agent 0's actual block sits far from memory, its counterfactual on
        // top of the single stored entry: n_act = 0, n_cfact = 1.
        let mut mem = EpisodicJointMemory::new(2, 1);
        mem.append(&[0.0, 0.0]).unwrap();
        let actual = [5.0, 0.0];
        let cfact = [0.0, 0.0];
        let d = ccl_raw_detailed(0, &actual, &cfact, &mem, 1).unwrap().unwrap();
        assert_eq!((d.n_act, d.n_cfact), (0, 1));
        assert_eq!(d.raw, -1.0);
    }

    #[test]
    fn empty_memory_is_neutral() {
        let mem = EpisodicJointMemory::new(2, 1);
        assert_eq!(ccl_raw(1, &[1.0, 2.0], &[1.0, 3.0], &mem, 3).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn shaped_bounds_and_monotone(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (s_lo, s_hi) = (shape_ccl(lo, 1.0, 5.0), shape_ccl(hi, 1.0, 5.0));
            prop_assert!(s_hi <= s_lo);
            prop_assert!(s_hi > 0.0 && s_lo <= 5.0);
        }
    }
}
