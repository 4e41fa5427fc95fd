use crate::density::{BlockView, Metric, PointSet, PointView};
use crate::error::{Error, Result};

/// Per-episode store of joint embeddings (Chebyshev metric). Agent `i`'s
/// view is the `i`-th embedding block of every stored entry.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodicJointMemory {
    joint: PointSet,
    n_agents: usize,
    embed_dim: usize,
}

impl EpisodicJointMemory {
    pub fn new(n_agents: usize, embed_dim: usize) -> Self {
        Self {
            joint: PointSet::new(n_agents * embed_dim, Metric::Chebyshev),
            n_agents,
            embed_dim,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn len(&self) -> usize {
        self.joint.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint.is_empty()
    }

    pub fn joint(&self) -> &PointSet {
        &self.joint
    }

    pub fn per_agent_view(&self, agent: usize) -> BlockView<'_> {
        assert!(agent < self.n_agents, "agent index out of range");
        self.joint.block(agent * self.embed_dim, self.embed_dim)
    }

    pub fn append(&mut self, joint_embedding: &[f64]) -> Result<()> {
        self.joint.push(joint_embedding)
    }

    pub fn clear(&mut self) {
        self.joint.clear();
    }
}

/// Each agent's raw local observations this episode (Euclidean metric).
#[derive(Clone, Debug, PartialEq)]
pub struct AgentObservationHistory {
    per_agent: Vec<PointSet>,
}

impl AgentObservationHistory {
    pub fn new(obs_dims: &[usize]) -> Self {
        Self {
            per_agent: obs_dims.iter().map(|&d| PointSet::new(d, Metric::Euclidean)).collect(),
        }
    }

    /// Clears every history and seeds it with the initial observations.
    pub fn reset(&mut self, initial: &[Vec<f64>]) -> Result<()> {
        Error::check_dim("history agents", self.per_agent.len(), initial.len())?;
        for (set, o) in self.per_agent.iter_mut().zip(initial) {
            set.clear();
            set.push(o)?;
        }
        Ok(())
    }

    pub fn agent(&self, agent: usize) -> &PointSet {
        &self.per_agent[agent]
    }

    pub(crate) fn agent_mut(&mut self, agent: usize) -> &mut PointSet {
        &mut self.per_agent[agent]
    }

    pub fn n_agents(&self) -> usize {
        self.per_agent.len()
    }
}
