use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam moments and hyper-parameters for one flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected step. Rejects non-finite gradients before touching
    /// any state.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        Error::check_dim("adam params", self.m.len(), params.len())?;
        Error::check_dim("adam grads", self.m.len(), grads.len())?;
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite gradient {} at parameter index {i}",
                grads[i]
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

pub fn adam_update(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    state.update(params, grads)
}

/// Rescales `grads` so the global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = vec![1.0, -2.0, 3.5];
        let before = p.clone();
        let mut st = AdamState::new(3, 1e-3);
        for _ in 0..25 {
            st.update(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.step, 25);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![0.5];
        let mut st = AdamState::new(1, 1e-3);
        st.update(&mut p, &[1.0]).unwrap();
        assert!((0.5 - p[0] - 1e-3).abs() < 1e-10);
    }

    #[test]
    fn quadratic_loss_decreases() {
        let mut p = vec![2.0];
        let mut st = AdamState::new(1, 0.1);
        let loss = |x: f64| 0.5 * x * x;
        let mut prev = loss(p[0]);
        for _ in 0..2 {
            let g = [p[0]];
            st.update(&mut p, &g).unwrap();
            let l = loss(p[0]);
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let mut p = vec![0.0, 0.0];
        let mut st = AdamState::new(2, 1e-3);
        let err = st.update(&mut p, &[0.1, f64::NAN]).unwrap_err();
        assert!(err.to_string().contains("index 1"));
        assert_eq!(st.step, 0);
    }

    proptest! {
        #[test]
        fn clipped_norm_is_bounded(g in proptest::collection::vec(-1e6f64..1e6, 1..64)) {
            let mut g = g;
            clip_grad_norm(&mut g, 1.0);
            let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(n <= 1.0 + 1e-9);
        }
    }
}
