//! Small differentiable kernels: dense layers, an LSTM cell, a diagonal
//! Gaussian policy head and Adam.
//!
//! Every network keeps its trainable parameters in one flat `Vec<f64>`.
//! Layers are plain layout descriptors (`offset` + shape) that index into
//! that buffer, so optimizers, gradient clipping, finite-difference checks
//! and checkpoints all work on a single slice. Gradients use the same
//! layout. Backward passes are written out by hand for the fixed graphs
//! used here.

pub mod adam;
pub mod dense;
pub mod gaussian;
pub mod gradcheck;
pub mod init;
pub mod lstm;
mod ops;

pub use adam::{adam_update, clip_grad_norm, AdamState};
pub use dense::{layer_norm, mlp_forward, Activation, Dense, Mlp, MlpCache};
pub use gaussian::{gaussian_entropy, gaussian_log_prob, sample_action, GaussianHead};
pub use gradcheck::finite_diff_check;
pub use lstm::{lstm_step, LstmCell, LstmStepCache, RecurrentState};
pub(crate) use ops::{axpy, dot};

/// Hands out consecutive ranges of a flat parameter vector.
#[derive(Clone, Debug, Default)]
pub struct ParamLayout {
    len: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&mut self, n: usize) -> usize {
        let offset = self.len;
        self.len += n;
        offset
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}
