//! Fixed random observation encoder.
//!
//! Three 64-unit layers, each `dense -> layer norm -> SiLU`, then a linear
//! projection to the embedding width. Weights are drawn once from a seed and
//! never trained.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{Activation, Mlp, ParamLayout};
use crate::rng::Rng;
use rand::SeedableRng;

pub const ENCODER_WIDTH: usize = 64;
pub const ENCODER_DEPTH: usize = 3;
pub const EMBEDDING_DIM: usize = 4;

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const OUTPUT_GAIN: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomEncoder {
    pub seed: u64,
    pub obs_dim: usize,
    pub embed_dim: usize,
    mlp: Mlp,
    params: Vec<f64>,
}

/// Low-dimensional code of one local observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl RandomEncoder {
    pub fn new(seed: u64, obs_dim: usize, embed_dim: usize) -> Result<Self> {
        if obs_dim == 0 || embed_dim == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        let mut layout = ParamLayout::new();
        let mut sizes = vec![obs_dim];
        sizes.extend([ENCODER_WIDTH; ENCODER_DEPTH]);
        sizes.push(embed_dim);
        let mlp = Mlp::new(&mut layout, &sizes, Activation::Silu, false, true);
        let mut params = vec![0.0; layout.len()];
        let mut rng = Rng::seed_from_u64(seed);
        mlp.init(&mut params, HIDDEN_GAIN, OUTPUT_GAIN, &mut rng);
        Ok(Self {
            seed,
            obs_dim,
            embed_dim,
            mlp,
            params,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn encode(&self, observation: &[f64]) -> Result<Embedding> {
        Error::check_dim("encoder observation", self.obs_dim, observation.len())?;
        self.mlp.forward(&self.params, observation).map(Embedding)
    }
}

/// Encoder with the default 4-dimensional embedding.
pub fn init_encoder(seed: u64, obs_dim: usize) -> Result<RandomEncoder> {
    RandomEncoder::new(seed, obs_dim, EMBEDDING_DIM)
}

pub fn encode(encoder: &RandomEncoder, observation: &[f64]) -> Result<Embedding> {
    encoder.encode(observation)
}

/// Concatenates per-agent embeddings in agent-index order.
pub fn joint_embedding(embeddings: &[Embedding]) -> Vec<f64> {
    embeddings.iter().flat_map(|e| e.0.iter().copied()).collect()
}

/// Encoders for a set of agents. Agents sharing an observation width (and a
/// role) share one encoder when `shared` is set; otherwise each agent gets
/// its own seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderBank {
    encoders: Vec<RandomEncoder>,
    agent_encoder: Vec<usize>,
}

impl EncoderBank {
    pub fn new(master_seed: u64, obs_dims: &[usize], embed_dim: usize, shared: bool) -> Result<Self> {
        let mut encoders: Vec<RandomEncoder> = Vec::new();
        let mut agent_encoder = Vec::with_capacity(obs_dims.len());
        for (agent, &dim) in obs_dims.iter().enumerate() {
            let existing = if shared {
                encoders.iter().position(|e| e.obs_dim == dim)
            } else {
                None
            };
            let idx = match existing {
                Some(i) => i,
                None => {
                    let label = if shared {
                        format!("encoder/dim{dim}")
                    } else {
                        format!("encoder/agent{agent}")
                    };
                    let seed = crate::rng::derive_seed(master_seed, &label);
                    encoders.push(RandomEncoder::new(seed, dim, embed_dim)?);
                    encoders.len() - 1
                }
            };
            agent_encoder.push(idx);
        }
        Ok(Self { encoders, agent_encoder })
    }

    pub fn n_agents(&self) -> usize {
        self.agent_encoder.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.encoders.first().map_or(EMBEDDING_DIM, |e| e.embed_dim)
    }

    pub fn for_agent(&self, agent: usize) -> &RandomEncoder {
        &self.encoders[self.agent_encoder[agent]]
    }

    pub fn encoders(&self) -> &[RandomEncoder] {
        &self.encoders
    }

    pub fn encode_all(&self, observations: &[Vec<f64>]) -> Result<Vec<Embedding>> {
        Error::check_dim("joint observation agents", self.n_agents(), observations.len())?;
        observations
            .iter()
            .enumerate()
            .map(|(i, o)| self.for_agent(i).encode(o))
            .collect()
    }
}
