use super::ccl::{ccl_rewards_step, CclStepDiagnostics};
use super::memory::{AgentObservationHistory, EpisodicJointMemory};
use super::oem::oem_reward;
use super::IntrinsicConfig;
use crate::encoder::EncoderBank;
use crate::error::{Error, Result};

/// Per-episode intrinsic reward state for a team.
///
/// `reset` takes the initial observations: it seeds every agent's OEM
/// history with them and runs the first CCL step (empty memory, so the
/// rewards are neutral and discarded), leaving one joint embedding in
/// memory. Each `step` then scores the observations reached by a
/// transition against everything seen earlier in the episode.
#[derive(Clone, Debug)]
pub struct IntrinsicEngine {
    config: IntrinsicConfig,
    encoders: EncoderBank,
    memory: EpisodicJointMemory,
    history: AgentObservationHistory,
    previous: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntrinsicStep {
    pub ccl: Vec<f64>,
    pub oem: Vec<f64>,
    pub diagnostics: Vec<CclStepDiagnostics>,
}

impl IntrinsicEngine {
    pub fn new(config: IntrinsicConfig, obs_dims: &[usize], encoder_seed: u64) -> Result<Self> {
        config.validate()?;
        let encoders = EncoderBank::new(encoder_seed, obs_dims, config.embed_dim, config.shared_encoder)?;
        Ok(Self {
            memory: EpisodicJointMemory::new(obs_dims.len(), config.embed_dim),
            history: AgentObservationHistory::new(obs_dims),
            encoders,
            config,
            previous: None,
        })
    }

    pub fn config(&self) -> &IntrinsicConfig {
        &self.config
    }

    pub fn encoders(&self) -> &EncoderBank {
        &self.encoders
    }

    pub fn memory(&self) -> &EpisodicJointMemory {
        &self.memory
    }

    pub fn history(&self) -> &AgentObservationHistory {
        &self.history
    }

    pub fn n_agents(&self) -> usize {
        self.memory.n_agents()
    }

    pub fn reset(&mut self, initial: &[Vec<f64>]) -> Result<()> {
        Error::check_dim("initial observations", self.n_agents(), initial.len())?;
        self.memory.clear();
        self.history.reset(initial)?;
        if self.config.mode.uses_ccl() {
            ccl_rewards_step(initial, initial, &mut self.memory, &self.encoders, &self.config)?;
        }
        self.previous = Some(initial.to_vec());
        Ok(())
    }

    pub fn step(&mut self, observations: &[Vec<f64>]) -> Result<IntrinsicStep> {
        let n = self.n_agents();
        Error::check_dim("observations", n, observations.len())?;
        let previous = self
            .previous
            .take()
            .ok_or_else(|| Error::Config("intrinsic engine stepped before reset".into()))?;

        let (ccl, diagnostics) = if self.config.mode.uses_ccl() {
            let out = ccl_rewards_step(observations, &previous, &mut self.memory, &self.encoders, &self.config)?;
            (out.rewards, out.diagnostics)
        } else {
            (vec![0.0; n], Vec::new())
        };
        let oem = if self.config.mode.uses_oem() {
            (0..n)
                .map(|i| oem_reward(i, &observations[i], &mut self.history, &self.config.k_set))
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![0.0; n]
        };
        self.previous = Some(observations.to_vec());
        Ok(IntrinsicStep { ccl, oem, diagnostics })
    }
}
