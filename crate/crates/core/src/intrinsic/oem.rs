use super::memory::AgentObservationHistory;
use crate::density::kth_nearest_radius;
use crate::error::Result;

/// Local observation-entropy reward `log(d_k + 1)` averaged over `k_set`,
/// with `d_k` the Euclidean k-NN distance of `observation` within the
/// agent's history. The observation is appended to the history afterwards.
pub fn oem_reward(agent: usize, observation: &[f64], history: &mut AgentObservationHistory, k_set: &[usize]) -> Result<f64> {
    let set = history.agent(agent);
    let mut total = 0.0;
    for &k in k_set {
        let d = kth_nearest_radius(observation, set, k)?;
        total += d.ln_1p();
    }
    let reward = total / k_set.len() as f64;
    history.agent_mut(agent).push(observation)?;
    Ok(reward)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_point_scores_zero() {
        let mut h = AgentObservationHistory::new(&[2]);
        h.reset(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(oem_reward(0, &[1.0, 2.0], &mut h, &[1]).unwrap(), 0.0);
        assert_eq!(h.agent(0).iter().count(), 2);
    }

    #[test]
    fn hand_evaluated_distance() {
        let mut h = AgentObservationHistory::new(&[1]);
        h.reset(&[vec![0.0]]).unwrap();
        let r = oem_reward(0, &[3.0], &mut h, &[1]).unwrap();
        assert!((r - 4.0f64.ln()).abs() < 1e-15);
    }
}
