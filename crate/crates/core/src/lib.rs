//! Counterfactual conditional likelihood (CCL) and local observation
//! entropy (OEM) intrinsic rewards for cooperative multi-agent learning,
//! with sparse-reward rover and particle environments and a MAPPO trainer.

pub mod config;
pub mod density;
pub mod encoder;
pub mod env;
pub mod error;
pub mod heatmap;
pub mod intrinsic;
pub mod neural;
pub mod rng;
pub mod sweep;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
