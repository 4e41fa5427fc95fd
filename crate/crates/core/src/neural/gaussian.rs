use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dense, ParamLayout};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// ln(2π)
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Initial value of the trainable log standard deviation.
pub const INIT_LOG_STD: f64 = 0.01;

/// Diagonal-Gaussian policy head: a linear mean layer plus a
/// state-independent, trainable `log_std` vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussianHead {
    pub mean: Dense,
    pub log_std_offset: usize,
}

impl GaussianHead {
    pub fn new(layout: &mut ParamLayout, n_in: usize, action_dim: usize) -> Self {
        let mean = Dense::new(layout, n_in, action_dim);
        let log_std_offset = layout.alloc(action_dim);
        Self { mean, log_std_offset }
    }

    pub fn action_dim(&self) -> usize {
        self.mean.n_out
    }

    pub fn init(&self, params: &mut [f64], gain: f64, rng: &mut Rng) {
        self.mean.init(params, gain, rng);
        let n = self.action_dim();
        params[self.log_std_offset..self.log_std_offset + n].fill(INIT_LOG_STD);
    }

    pub fn log_std<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.log_std_offset..self.log_std_offset + self.action_dim()]
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> Result<f64> {
    Error::check_dim("gaussian log_std", mean.len(), log_std.len())?;
    Error::check_dim("gaussian action", mean.len(), action.len())?;
    Ok(log_prob_unchecked(mean, log_std, action))
}

pub(crate) fn log_prob_unchecked(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Accumulates `scale * d(log_prob)/d(mean)` and `.../d(log_std)`.
pub(crate) fn log_prob_grad(
    mean: &[f64],
    log_std: &[f64],
    action: &[f64],
    scale: f64,
    d_mean: &mut [f64],
    d_log_std: &mut [f64],
) {
    for j in 0..mean.len() {
        let inv_var = (-2.0 * log_std[j]).exp();
        let diff = action[j] - mean[j];
        d_mean[j] += scale * diff * inv_var;
        d_log_std[j] += scale * (diff * diff * inv_var - 1.0);
    }
}

/// Differential entropy of the diagonal Gaussian.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (1.0 + LN_2PI)).sum()
}

/// Reparameterized draw `mean + exp(log_std) * eps` and its log-density.
pub fn sample_action(mean: &[f64], log_std: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
    Error::check_dim("gaussian log_std", mean.len(), log_std.len())?;
    let action: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(&m, &ls)| {
            let eps: f64 = StandardNormal.sample(rng);
            m + ls.exp() * eps
        })
        .collect();
    let lp = log_prob_unchecked(mean, log_std, &action);
    Ok((action, lp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn standard_normal_at_mode() {
        let lp = gaussian_log_prob(&[0.3], &[0.0], &[0.3]).unwrap();
        assert!((lp - (-0.918_938_533_204_672_7)).abs() < 1e-12);
    }

    #[test]
    fn unit_z_score() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[1.0]).unwrap();
        assert!((lp - (-0.5 - 0.5 * LN_2PI)).abs() < 1e-15);
    }

    #[test]
    fn mode_is_the_mean() {
        let (m, ls) = ([0.4, -1.2], [0.3, -0.7]);
        let at_mode = gaussian_log_prob(&m, &ls, &m).unwrap();
        for d in [-0.1, 0.05, 0.2] {
            let a = [m[0] + d, m[1] - d];
            assert!(gaussian_log_prob(&m, &ls, &a).unwrap() < at_mode);
        }
    }

    #[test]
    fn zero_variance_limit() {
        let mut rng = Rng::seed_from_u64(0);
        let (a, _) = sample_action(&[1.5, -2.0], &[-20.0, -20.0], &mut rng).unwrap();
        assert!((a[0] - 1.5).abs() < 1e-8 && (a[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn sampling_is_seed_deterministic_and_consistent() {
        let (m, ls) = ([0.1, 0.2], [0.0, -0.5]);
        let a = sample_action(&m, &ls, &mut Rng::seed_from_u64(9)).unwrap();
        let b = sample_action(&m, &ls, &mut Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!((gaussian_log_prob(&m, &ls, &a.0).unwrap() - a.1).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_moments() {
        let mut rng = Rng::seed_from_u64(2024);
        let n = 100_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_action(&[0.0], &[0.0], &mut rng).unwrap().0[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02);
        assert!((var.sqrt() - 1.0).abs() < 0.02);
    }

    #[test]
    fn shape_mismatch() {
        assert!(gaussian_log_prob(&[0.0, 1.0], &[0.0], &[0.0, 0.0]).is_err());
    }
}
