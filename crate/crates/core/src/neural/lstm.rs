use serde::{Deserialize, Serialize};

use super::init::orthogonal;
use super::{axpy, dot, ParamLayout};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Hidden and cell vectors carried between LSTM steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrentState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl RecurrentState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden: vec![0.0; hidden],
            cell: vec![0.0; hidden],
        }
    }
}

/// Single LSTM layer.
///
/// Gate weights are stacked `[input; forget; cell; output]`, each block
/// `hidden x (n_in + hidden)` acting on `[x; h_prev]`, then `4 * hidden`
/// biases.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmCell {
    pub n_in: usize,
    pub hidden: usize,
    pub offset: usize,
}

#[derive(Clone, Debug)]
pub struct LstmStepCache {
    xh: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates, same stacking as the weights.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmCell {
    pub fn new(layout: &mut ParamLayout, n_in: usize, hidden: usize) -> Self {
        let offset = layout.alloc(4 * hidden * (n_in + hidden + 1));
        Self { n_in, hidden, offset }
    }

    pub fn len(&self) -> usize {
        4 * self.hidden * (self.n_in + self.hidden + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn width(&self) -> usize {
        self.n_in + self.hidden
    }

    fn bias_offset(&self) -> usize {
        self.offset + 4 * self.hidden * self.width()
    }

    /// Orthogonal input and recurrent blocks, zero biases.
    pub fn init(&self, params: &mut [f64], rng: &mut Rng) {
        let (h, w) = (self.hidden, self.width());
        let wi = orthogonal(4 * h, self.n_in, 1.0, rng);
        let wh: Vec<Vec<f64>> = (0..4).map(|_| orthogonal(h, h, 1.0, rng)).collect();
        for r in 0..4 * h {
            let row = &mut params[self.offset + r * w..self.offset + (r + 1) * w];
            row[..self.n_in].copy_from_slice(&wi[r * self.n_in..(r + 1) * self.n_in]);
            let (g, gr) = (r / h, r % h);
            row[self.n_in..].copy_from_slice(&wh[g][gr * h..(gr + 1) * h]);
        }
        params[self.bias_offset()..self.offset + self.len()].fill(0.0);
    }

    fn check(&self, x: &[f64], state: &RecurrentState) -> Result<()> {
        Error::check_dim("lstm input", self.n_in, x.len())?;
        Error::check_dim("lstm hidden state", self.hidden, state.hidden.len())?;
        Error::check_dim("lstm cell state", self.hidden, state.cell.len())
    }

    pub fn step(&self, params: &[f64], x: &[f64], state: &RecurrentState) -> Result<(Vec<f64>, RecurrentState)> {
        self.check(x, state)?;
        let (next, _) = self.step_cached(params, x, state);
        Ok((next.hidden.clone(), next))
    }

    pub fn step_cached(&self, params: &[f64], x: &[f64], state: &RecurrentState) -> (RecurrentState, LstmStepCache) {
        let (h, w) = (self.hidden, self.width());
        let mut xh = Vec::with_capacity(w);
        xh.extend_from_slice(x);
        xh.extend_from_slice(&state.hidden);
        let weights = &params[self.offset..self.bias_offset()];
        let biases = &params[self.bias_offset()..self.offset + self.len()];
        let mut gates = vec![0.0; 4 * h];
        for (r, g) in gates.iter_mut().enumerate() {
            let z = biases[r] + dot(&weights[r * w..(r + 1) * w], &xh);
            *g = if r / h == 2 { z.tanh() } else { sigmoid(z) };
        }
        let mut cell = vec![0.0; h];
        let mut hidden = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            cell[j] = f * state.cell[j] + i * g;
            tanh_c[j] = cell[j].tanh();
            hidden[j] = o * tanh_c[j];
        }
        let cache = LstmStepCache {
            xh,
            c_prev: state.cell.clone(),
            gates,
            tanh_c,
        };
        (RecurrentState { hidden, cell }, cache)
    }

    /// Backprop one step. `dh`/`dc` are the gradients arriving at this
    /// step's outputs; returns the gradients for the previous state and
    /// accumulates the input gradient into `dx`.
    pub fn backward_step(
        &self,
        params: &[f64],
        cache: &LstmStepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut [f64],
        dx: &mut [f64],
    ) -> RecurrentState {
        let (h, w) = (self.hidden, self.width());
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for j in 0..h {
            let (i, f, gc, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = cache.tanh_c[j];
            let d_o = dh[j] * tc;
            let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
            dz[j] = dct * gc * i * (1.0 - i);
            dz[h + j] = dct * cache.c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dct * i * (1.0 - gc * gc);
            dz[3 * h + j] = d_o * o * (1.0 - o);
            dc_prev[j] = dct * f;
        }
        let bias_off = self.bias_offset();
        let weights = &params[self.offset..bias_off];
        let mut dxh = vec![0.0; w];
        {
            let (gw, gb) = grads[self.offset..self.offset + self.len()].split_at_mut(4 * h * w);
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb[r] += d;
                axpy(d, &cache.xh, &mut gw[r * w..(r + 1) * w]);
                axpy(d, &weights[r * w..(r + 1) * w], &mut dxh);
            }
        }
        for (a, b) in dx.iter_mut().zip(&dxh[..self.n_in]) {
            *a += b;
        }
        RecurrentState {
            hidden: dxh[self.n_in..].to_vec(),
            cell: dc_prev,
        }
    }
}

/// One LSTM step; the output is the new hidden vector.
pub fn lstm_step(cell: &LstmCell, params: &[f64], input: &[f64], state: &RecurrentState) -> Result<(Vec<f64>, RecurrentState)> {
    cell.step(params, input, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng};

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_params_zero_state() {
        let mut layout = ParamLayout::new();
        let cell = LstmCell::new(&mut layout, 3, 4);
        let params = vec![0.0; layout.len()];
        let (out, next) = lstm_step(&cell, &params, &[1.0, -1.0, 2.0], &RecurrentState::zeros(4)).unwrap();
        assert_eq!(out, vec![0.0; 4]);
        assert_eq!(next.cell, vec![0.0; 4]);
    }

    #[test]
    fn open_gates_give_tanh_of_tanh() {
        let mut layout = ParamLayout::new();
        let cell = LstmCell::new(&mut layout, 1, 1);
        // rows: i, f, g, o ; each row = [w_x, w_h]; then biases
        let mut params = vec![0.0; layout.len()];
        params[4] = 1.0; // cell candidate reads x
        params[8] = 50.0; // input gate bias
        params[9] = 50.0; // forget gate bias
        params[11] = 50.0; // output gate bias
        for &x in &[-2.0, -0.3, 0.0, 0.8, 1.7] {
            let (h, _) = lstm_step(&cell, &params, &[x], &RecurrentState::zeros(1)).unwrap();
            let want = (x as f64).tanh().tanh();
            assert!((h[0] - want).abs() < 1e-12, "x={x}: {} vs {want}", h[0]);
        }
    }

    #[test]
    fn matches_scalar_gate_oracle() {
        let mut rng = Rng::seed_from_u64(5);
        let (n_in, hid) = (3, 4);
        let mut layout = ParamLayout::new();
        let cell = LstmCell::new(&mut layout, n_in, hid);
        let params: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
        let state = RecurrentState {
            hidden: (0..hid).map(|_| rng.random_range(-1.0..1.0)).collect(),
            cell: (0..hid).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let w = n_in + hid;
        let bias0 = 4 * hid * w;
        let pre = |gate: usize, j: usize| {
            let row = gate * hid + j;
            let mut s = params[bias0 + row];
            for k in 0..n_in {
                s += params[row * w + k] * x[k];
            }
            for k in 0..hid {
                s += params[row * w + n_in + k] * state.hidden[k];
            }
            s
        };
        let (out, next) = lstm_step(&cell, &params, &x, &state).unwrap();
        for j in 0..hid {
            let i = sig(pre(0, j));
            let f = sig(pre(1, j));
            let g = pre(2, j).tanh();
            let o = sig(pre(3, j));
            let c = f * state.cell[j] + i * g;
            assert!((next.cell[j] - c).abs() < 1e-12);
            assert!((out[j] - o * c.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_state_width() {
        let mut layout = ParamLayout::new();
        let cell = LstmCell::new(&mut layout, 2, 3);
        let params = vec![0.0; layout.len()];
        assert!(lstm_step(&cell, &params, &[0.0, 0.0], &RecurrentState::zeros(2)).is_err());
    }
}
