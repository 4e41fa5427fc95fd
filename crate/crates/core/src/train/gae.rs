//! Generalized advantage estimation and advantage normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Backward GAE recursion. A step flagged done has no successor (its
/// bootstrap value is 0) and cuts the trace; so does the end of the slice.
pub fn compute_gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    Error::check_dim("gae values", n, values.len())?;
    Error::check_dim("gae dones", n, dones.len())?;
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let terminal = dones[t] || t + 1 == n;
        let next_value = if terminal { 0.0 } else { values[t + 1] };
        if terminal {
            running = 0.0;
        }
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts to mean 0 and scales to unit (population) standard deviation.
/// A constant input becomes all zeros.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = if std > 1e-12 * mean.abs().max(1.0) { 1.0 / std } else { 0.0 };
    for a in adv.iter_mut() {
        *a = (*a - mean) * scale;
    }
}

/// Running statistics of value targets. The critic regresses normalized
/// targets; its outputs are mapped back before advantages are computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueNorm {
    pub enabled: bool,
    pub beta: f64,
    pub running_mean: f64,
    pub running_mean_sq: f64,
    pub debias: f64,
}

impl ValueNorm {
    pub const VAR_FLOOR: f64 = 1e-2;

    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            beta: 0.99999,
            running_mean: 0.0,
            running_mean_sq: 0.0,
            debias: 0.0,
        }
    }

    fn stats(&self) -> (f64, f64) {
        if !self.enabled || self.debias == 0.0 {
            return (0.0, 1.0);
        }
        let mean = self.running_mean / self.debias;
        let sq = self.running_mean_sq / self.debias;
        (mean, (sq - mean * mean).max(Self::VAR_FLOOR).sqrt())
    }

    pub fn update(&mut self, targets: &[f64]) {
        if !self.enabled || targets.is_empty() {
            return;
        }
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let sq = targets.iter().map(|x| x * x).sum::<f64>() / n;
        let b = self.beta;
        self.running_mean = b * self.running_mean + (1.0 - b) * mean;
        self.running_mean_sq = b * self.running_mean_sq + (1.0 - b) * sq;
        self.debias = b * self.debias + (1.0 - b);
    }

    pub fn normalize(&self, x: f64) -> f64 {
        let (m, s) = self.stats();
        (x - m) / s
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        let (m, s) = self.stats();
        x * s + m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        let (a, r) = compute_gae(&[1.0], &[0.4], &[true], 0.99, 0.95).unwrap();
        assert!((a[0] - 0.6).abs() < 1e-15);
        assert!((r[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_limit() {
        let rewards = [0.5, -1.0, 2.0, 0.25];
        let (a, _) = compute_gae(&rewards, &[0.0; 4], &[false, false, false, true], 1.0, 1.0).unwrap();
        assert_eq!(a, vec![1.75, 1.25, 2.25, 0.25]);
    }

    #[test]
    fn done_cuts_the_trace() {
        let (a, _) = compute_gae(&[0.0, 1.0, 5.0], &[0.0; 3], &[false, true, true], 1.0, 1.0).unwrap();
        assert_eq!(a, vec![1.0, 1.0, 5.0]);
    }

    #[test]
    fn normalization_properties() {
        let mut a = vec![1.0, 2.0, 3.0, 6.0];
        normalize_advantages(&mut a);
        let mean: f64 = a.iter().sum::<f64>() / 4.0;
        let var: f64 = a.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-15 && (var - 1.0).abs() < 1e-12);
        let mut c = vec![3.0; 5];
        normalize_advantages(&mut c);
        assert_eq!(c, vec![0.0; 5]);
    }

    #[test]
    fn value_norm_round_trip() {
        let mut vn = ValueNorm::new(true);
        assert_eq!(vn.normalize(3.0), 3.0);
        vn.update(&[10.0, 20.0, 30.0]);
        assert!((vn.normalize(20.0)).abs() < 1e-9);
        let x = 17.25;
        assert!((vn.denormalize(vn.normalize(x)) - x).abs() < 1e-12);
        let off = ValueNorm::new(false);
        assert_eq!(off.normalize(5.0), 5.0);
    }
}
