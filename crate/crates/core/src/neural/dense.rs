use serde::{Deserialize, Serialize};

use super::init::orthogonal;
use super::{axpy, dot, ParamLayout};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Variance floor for layer normalization.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Silu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Silu => x / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-pre).exp());
                s * (1.0 + pre * (1.0 - s))
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer. Weights are `n_out x n_in` row-major starting at
/// `offset`, followed by `n_out` biases.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub offset: usize,
}

impl Dense {
    pub fn new(layout: &mut ParamLayout, n_in: usize, n_out: usize) -> Self {
        let offset = layout.alloc(n_out * (n_in + 1));
        Self { n_in, n_out, offset }
    }

    pub fn len(&self) -> usize {
        self.n_out * (self.n_in + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.n_out * self.n_in
    }

    pub fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.bias_offset()]
    }

    pub fn biases<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.bias_offset()..self.offset + self.len()]
    }

    /// Orthogonal weights scaled by `gain`, zero biases.
    pub fn init(&self, params: &mut [f64], gain: f64, rng: &mut Rng) {
        let w = orthogonal(self.n_out, self.n_in, gain, rng);
        params[self.offset..self.bias_offset()].copy_from_slice(&w);
        params[self.bias_offset()..self.offset + self.len()].fill(0.0);
    }

    pub fn forward(&self, params: &[f64], x: &[f64], y: &mut [f64]) {
        let w = self.weights(params);
        let b = self.biases(params);
        for (o, yo) in y.iter_mut().enumerate() {
            *yo = b[o] + dot(&w[o * self.n_in..(o + 1) * self.n_in], x);
        }
    }

    /// Accumulates parameter gradients into `grads` and, when given, the
    /// input gradient into `dx`.
    pub fn backward(&self, params: &[f64], x: &[f64], dy: &[f64], grads: &mut [f64], dx: Option<&mut [f64]>) {
        let w = self.weights(params);
        let (gw, gb) = grads[self.offset..self.offset + self.len()].split_at_mut(self.n_out * self.n_in);
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            axpy(d, x, &mut gw[o * self.n_in..(o + 1) * self.n_in]);
        }
        if let Some(dx) = dx {
            for (o, &d) in dy.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &w[o * self.n_in..(o + 1) * self.n_in], dx);
                }
            }
        }
    }
}

/// In-place layer normalization without affine parameters.
pub fn layer_norm(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    for v in x.iter_mut() {
        *v = (*v - mean) * inv;
    }
}

/// Stack of dense layers. Hidden layers are followed by (optional layer
/// norm and) the activation; the last layer is activated only when
/// `activate_output` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
    pub activate_output: bool,
    pub layer_norm: bool,
}

/// Per-layer inputs and pre-activations recorded for backprop.
#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Mlp {
    /// `sizes` = `[input, hidden..., output]`.
    pub fn new(
        layout: &mut ParamLayout,
        sizes: &[usize],
        activation: Activation,
        activate_output: bool,
        layer_norm: bool,
    ) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = sizes.windows(2).map(|w| Dense::new(layout, w[0], w[1])).collect();
        Self {
            layers,
            activation,
            activate_output,
            layer_norm,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    fn activated(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.activate_output
    }

    /// Hidden layers get `hidden_gain`, the last layer `output_gain`.
    pub fn init(&self, params: &mut [f64], hidden_gain: f64, output_gain: f64, rng: &mut Rng) {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.init(params, if i == last { output_gain } else { hidden_gain }, rng);
        }
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim("mlp input", self.input_dim(), input.len())?;
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = vec![0.0; layer.n_out];
            layer.forward(params, &x, &mut y);
            if self.activated(i) {
                if self.layer_norm {
                    layer_norm(&mut y);
                }
                for v in &mut y {
                    *v = self.activation.apply(*v);
                }
            }
            x = y;
        }
        Ok(x)
    }

    /// Forward pass that keeps what `backward` needs. Not available for
    /// layer-normalized stacks, which are only ever used frozen.
    pub fn forward_cached(&self, params: &[f64], input: &[f64]) -> MlpCache {
        assert!(!self.layer_norm, "backprop through layer norm is not supported");
        debug_assert_eq!(input.len(), self.input_dim());
        let mut cache = MlpCache::default();
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut pre = vec![0.0; layer.n_out];
            layer.forward(params, &x, &mut pre);
            let y = if self.activated(i) {
                pre.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                pre.clone()
            };
            cache.inputs.push(std::mem::replace(&mut x, y));
            cache.pre.push(pre);
        }
        cache.output = x;
        cache
    }

    pub fn backward(&self, params: &[f64], cache: &MlpCache, d_output: &[f64], grads: &mut [f64], dx: Option<&mut [f64]>) {
        let mut dy = d_output.to_vec();
        let mut dx = dx;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if self.activated(i) {
                for (d, &p) in dy.iter_mut().zip(&cache.pre[i]) {
                    *d *= self.activation.derivative(p);
                }
            }
            if i == 0 {
                layer.backward(params, &cache.inputs[0], &dy, grads, dx.take());
            } else {
                let mut d_in = vec![0.0; layer.n_in];
                layer.backward(params, &cache.inputs[i], &dy, grads, Some(&mut d_in));
                dy = d_in;
            }
        }
    }
}

/// Forward pass of `mlp` under `params`; fails on an input of the wrong width.
pub fn mlp_forward(mlp: &Mlp, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
    mlp.forward(params, input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};

    fn net(sizes: &[usize], act: Activation, activate_output: bool) -> (Mlp, usize) {
        let mut layout = ParamLayout::new();
        let mlp = Mlp::new(&mut layout, sizes, act, activate_output, false);
        (mlp, layout.len())
    }

    #[test]
    fn zero_network_gives_zero() {
        let (mlp, n) = net(&[3, 5, 2], Activation::Relu, true);
        let out = mlp_forward(&mlp, &vec![0.0; n], &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_with_relu() {
        let (mlp, _) = net(&[2, 2], Activation::Relu, true);
        let params = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert_eq!(mlp_forward(&mlp, &params, &[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let (mlp, n) = net(&[3, 2], Activation::Relu, false);
        assert!(matches!(
            mlp_forward(&mlp, &vec![0.0; n], &[1.0]),
            Err(Error::Dimension {
                expected: 3,
                actual: 1,
                ..
            })
        ));
    }

    #[test]
    fn matches_matrix_multiply_oracle() {
        let mut rng = Rng::seed_from_u64(11);
        let sizes = [5, 7, 6, 3];
        let (mlp, n) = net(&sizes, Activation::Relu, false);
        let params: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let input: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();

        // Oracle: explicit nested loops over (out, in) with a separate bias pass.
        let mut x = input.clone();
        let mut off = 0;
        for (li, w) in sizes.windows(2).enumerate() {
            let (ni, no) = (w[0], w[1]);
            let mut y = vec![0.0; no];
            for o in 0..no {
                let mut s = 0.0;
                for i in 0..ni {
                    s += params[off + o * ni + i] * x[i];
                }
                y[o] = s + params[off + no * ni + o];
            }
            off += no * (ni + 1);
            if li + 2 < sizes.len() {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            x = y;
        }
        let got = mlp.forward(&params, &input).unwrap();
        for (a, b) in got.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_of_constant_is_finite() {
        let mut v = vec![3.0; 8];
        layer_norm(&mut v);
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn silu_derivative_matches_difference() {
        for &x in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
            let h = 1e-6;
            let num = (Activation::Silu.apply(x + h) - Activation::Silu.apply(x - h)) / (2.0 * h);
            assert!((num - Activation::Silu.derivative(x)).abs() < 1e-8);
        }
    }
}
