//! Actor and critic networks over flat parameter vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{Activation, GaussianHead, LstmCell, LstmStepCache, Mlp, MlpCache, ParamLayout, RecurrentState};
use crate::rng::Rng;

pub const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
pub const POLICY_OUTPUT_GAIN: f64 = 0.01;
pub const VALUE_OUTPUT_GAIN: f64 = 1.0;

/// ReLU trunk, one LSTM layer, diagonal Gaussian head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub trunk: Mlp,
    pub lstm: LstmCell,
    pub head: GaussianHead,
    pub n_params: usize,
}

/// Everything a sequence forward pass keeps for backprop.
#[derive(Clone, Debug)]
pub struct ActorTrace {
    trunk: Vec<MlpCache>,
    lstm: Vec<LstmStepCache>,
    hidden: Vec<Vec<f64>>,
    pub means: Vec<Vec<f64>>,
}

impl Actor {
    pub fn new(input_dim: usize, hidden: &[usize], action_dim: usize) -> Result<Self> {
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Config(format!(
                "actor hidden sizes must be non-empty and positive, got {hidden:?}"
            )));
        }
        let mut layout = ParamLayout::new();
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        let trunk = Mlp::new(&mut layout, &sizes, Activation::Relu, true, false);
        let h = *hidden.last().unwrap_or(&input_dim);
        let lstm = LstmCell::new(&mut layout, h, h);
        let head = GaussianHead::new(&mut layout, h, action_dim);
        Ok(Self {
            trunk,
            lstm,
            head,
            n_params: layout.len(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.head.action_dim()
    }

    pub fn init_params(&self, rng: &mut Rng) -> Vec<f64> {
        let mut params = vec![0.0; self.n_params];
        self.trunk.init(&mut params, HIDDEN_GAIN, HIDDEN_GAIN, rng);
        self.lstm.init(&mut params, rng);
        self.head.init(&mut params, POLICY_OUTPUT_GAIN, rng);
        params
    }

    pub fn initial_state(&self) -> RecurrentState {
        RecurrentState::zeros(self.lstm.hidden)
    }

    pub fn log_std<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        self.head.log_std(params)
    }

    pub fn log_std_range(&self) -> std::ops::Range<usize> {
        self.head.log_std_offset..self.head.log_std_offset + self.action_dim()
    }

    /// Action mean for one step, advancing the recurrent state.
    pub fn step(&self, params: &[f64], input: &[f64], state: &RecurrentState) -> Result<(Vec<f64>, RecurrentState)> {
        let z = self.trunk.forward(params, input)?;
        let (h, next) = self.lstm.step(params, &z, state)?;
        let mut mean = vec![0.0; self.action_dim()];
        self.head.mean.forward(params, &h, &mut mean);
        Ok((mean, next))
    }

    /// Replays a whole sequence from the zero state.
    pub fn forward_sequence(&self, params: &[f64], inputs: &[Vec<f64>]) -> Result<ActorTrace> {
        let mut trace = ActorTrace {
            trunk: Vec::with_capacity(inputs.len()),
            lstm: Vec::with_capacity(inputs.len()),
            hidden: Vec::with_capacity(inputs.len()),
            means: Vec::with_capacity(inputs.len()),
        };
        let mut state = self.initial_state();
        for x in inputs {
            Error::check_dim("actor input", self.input_dim(), x.len())?;
            let tc = self.trunk.forward_cached(params, x);
            let (next, lc) = self.lstm.step_cached(params, &tc.output, &state);
            let mut mean = vec![0.0; self.action_dim()];
            self.head.mean.forward(params, &next.hidden, &mut mean);
            trace.hidden.push(next.hidden.clone());
            trace.trunk.push(tc);
            trace.lstm.push(lc);
            trace.means.push(mean);
            state = next;
        }
        Ok(trace)
    }

    /// Backprop through time given the loss gradient for every step's mean.
    /// The `log_std` gradient is the caller's business.
    pub fn backward_sequence(&self, params: &[f64], trace: &ActorTrace, d_means: &[Vec<f64>], grads: &mut [f64]) {
        let h = self.lstm.hidden;
        let mut carry = RecurrentState::zeros(h);
        for t in (0..trace.means.len()).rev() {
            let mut dh = carry.hidden;
            self.head
                .mean
                .backward(params, &trace.hidden[t], &d_means[t], grads, Some(&mut dh));
            let mut dz = vec![0.0; self.lstm.n_in];
            carry = self
                .lstm
                .backward_step(params, &trace.lstm[t], &dh, &carry.cell, grads, &mut dz);
            self.trunk.backward(params, &trace.trunk[t], &dz, grads, None);
        }
    }
}

/// Feed-forward value network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub mlp: Mlp,
    pub n_params: usize,
}

impl Critic {
    pub fn new(input_dim: usize, hidden: &[usize]) -> Result<Self> {
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Config(format!(
                "critic hidden sizes must be non-empty and positive, got {hidden:?}"
            )));
        }
        let mut layout = ParamLayout::new();
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mlp = Mlp::new(&mut layout, &sizes, Activation::Relu, false, false);
        Ok(Self {
            mlp,
            n_params: layout.len(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn init_params(&self, rng: &mut Rng) -> Vec<f64> {
        let mut params = vec![0.0; self.n_params];
        self.mlp.init(&mut params, HIDDEN_GAIN, VALUE_OUTPUT_GAIN, rng);
        params
    }

    pub fn value(&self, params: &[f64], input: &[f64]) -> Result<f64> {
        Ok(self.mlp.forward(params, input)?[0])
    }

    pub fn value_cached(&self, params: &[f64], input: &[f64]) -> MlpCache {
        self.mlp.forward_cached(params, input)
    }

    pub fn backward(&self, params: &[f64], cache: &MlpCache, d_value: f64, grads: &mut [f64]) {
        self.mlp.backward(params, cache, &[d_value], grads, None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::finite_diff_check;
    use rand::{Rng as _, SeedableRng};

    #[test]
    fn sequence_matches_stepwise() {
        let actor = Actor::new(5, &[8, 8], 2).unwrap();
        let mut rng = Rng::seed_from_u64(0);
        let params = actor.init_params(&mut rng);
        let inputs: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let trace = actor.forward_sequence(&params, &inputs).unwrap();
        let mut state = actor.initial_state();
        for (x, m) in inputs.iter().zip(&trace.means) {
            let (mean, next) = actor.step(&params, x, &state).unwrap();
            assert_eq!(&mean, m);
            state = next;
        }
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let actor = Actor::new(3, &[6], 2).unwrap();
        let mut rng = Rng::seed_from_u64(1);
        let mut params = actor.init_params(&mut rng);
        // Make the head non-trivial so every path carries gradient.
        for p in params.iter_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
        let inputs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..5)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let loss = |p: &[f64]| {
            let tr = actor.forward_sequence(p, &inputs).unwrap();
            tr.means
                .iter()
                .zip(&targets)
                .map(|(m, y)| m.iter().zip(y).map(|(a, b)| 0.5 * (a - b).powi(2)).sum::<f64>())
                .sum::<f64>()
        };
        let trace = actor.forward_sequence(&params, &inputs).unwrap();
        let d: Vec<Vec<f64>> = trace
            .means
            .iter()
            .zip(&targets)
            .map(|(m, y)| m.iter().zip(y).map(|(a, b)| a - b).collect())
            .collect();
        let mut grads = vec![0.0; actor.n_params];
        actor.backward_sequence(&params, &trace, &d, &mut grads);
        let err = finite_diff_check(loss, &params, &grads, 1e-6);
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn critic_gradient() {
        let critic = Critic::new(4, &[5, 5]).unwrap();
        let mut rng = Rng::seed_from_u64(2);
        let params = critic.init_params(&mut rng);
        let x = [0.3, -0.2, 0.9, 0.1];
        let cache = critic.value_cached(&params, &x);
        let mut grads = vec![0.0; critic.n_params];
        critic.backward(&params, &cache, 2.0 * (cache.output[0] - 1.5), &mut grads);
        let err = finite_diff_check(|p| (critic.value(p, &x).unwrap() - 1.5).powi(2), &params, &grads, 1e-6);
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn initial_policy_is_near_zero_mean() {
        let actor = Actor::new(10, &[32, 32], 2).unwrap();
        let params = actor.init_params(&mut Rng::seed_from_u64(3));
        let (mean, _) = actor.step(&params, &[1.0; 10], &actor.initial_state()).unwrap();
        assert!(mean.iter().all(|m| m.abs() < 0.1));
        assert_eq!(actor.log_std(&params), &[0.01, 0.01]);
    }
}
