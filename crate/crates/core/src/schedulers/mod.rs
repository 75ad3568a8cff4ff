//! Migration policies behind a single decision interface, plus the reward
//! they optimise.

mod actor_critic;
mod dqn;
mod hyper;
mod ucb;
mod worst_fit;

use std::fmt;
use std::str::FromStr;

pub use actor_critic::{discounted_returns, sample_categorical, ActorCritic, Episode};
pub use dqn::{DqnAgent, QInput};
pub use hyper::Hyperparameters;
pub use ucb::{BanditState, MabUcb};
pub use worst_fit::{worst_fit_assign, WorstFit};

use crate::error::{Error, Result};
use crate::infrastructure::{Cell, EdgeServer};
use crate::workload::Service;

/// Normalized per-server observation, every entry in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerFeatures {
    pub available_cpu: f64,
    pub available_memory: f64,
    pub available_disk: f64,
    pub current_power: f64,
}

impl ServerFeatures {
    pub const WIDTH: usize = 4;

    pub fn of(server: &EdgeServer) -> Self {
        let free = server.free();
        let cap = &server.capacity;
        let ratio = |f: f64, c: f64| (f / c).clamp(0.0, 1.0);
        Self {
            available_cpu: ratio(free.cpu, cap.cpu),
            available_memory: ratio(free.memory, cap.memory),
            available_disk: ratio(free.disk, cap.disk),
            current_power: (server.power() / server.max_power).clamp(0.0, 1.0),
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.available_cpu, self.available_memory, self.available_disk, self.current_power]
    }
}

pub fn server_features(servers: &[EdgeServer]) -> Vec<ServerFeatures> {
    servers.iter().map(ServerFeatures::of).collect()
}

/// Concatenation of every server's feature vector, in server order.
pub fn concat_features(features: &[ServerFeatures]) -> Vec<f64> {
    features.iter().flat_map(|f| f.to_vec()).collect()
}

/// Sum over servers of `1 / power`.
pub fn reward(servers: &[EdgeServer]) -> f64 {
    reward_from_power(&servers.iter().map(EdgeServer::power).collect::<Vec<_>>())
}

pub fn reward_from_power(power: &[f64]) -> f64 {
    power.iter().map(|p| 1.0 / p).sum()
}

/// Largest discounted return the reward admits: every server idle forever,
/// `sum(1 / idle) / (1 - gamma)`; the undiscounted per-step bound when `gamma = 1`.
pub fn return_upper_bound(servers: &[EdgeServer], gamma: f64) -> f64 {
    let r_max = reward_from_power(&servers.iter().map(|s| s.idle_power).collect::<Vec<_>>());
    if gamma < 1.0 {
        r_max / (1.0 - gamma)
    } else {
        r_max
    }
}

/// What a policy sees when asked to place one service.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub timestep: u64,
    /// The service being placed. If it was hosted, its demand has already been
    /// released from its host.
    pub service: &'a Service,
    pub servers: &'a [EdgeServer],
    pub features: &'a [ServerFeatures],
    pub server_graph: &'a [Vec<usize>],
    /// Owner's cell; only populated when the scenario opts in.
    pub owner_cell: Option<Cell>,
}

/// End-of-step measurement handed back to the policy.
#[derive(Debug, Clone, Copy)]
pub struct StepFeedback<'a> {
    pub timestep: u64,
    pub reward: f64,
    pub server_power: &'a [f64],
    pub features: &'a [ServerFeatures],
    pub server_graph: &'a [Vec<usize>],
}

/// A migration policy. `decide` returns a raw server choice (or `None` for no
/// placement); the simulator applies the capacity check afterwards.
pub trait SchedulerPolicy: Send {
    fn name(&self) -> &'static str;

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Option<usize>>;

    fn observe(&mut self, _feedback: &StepFeedback<'_>) -> Result<()> {
        Ok(())
    }

    /// Called once when the run ends.
    fn end_episode(&mut self) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKind {
    WorstFit,
    MabUcb,
    Dqn,
    DqnGnn,
    ActorCritic,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::WorstFit,
        PolicyKind::MabUcb,
        PolicyKind::Dqn,
        PolicyKind::DqnGnn,
        PolicyKind::ActorCritic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::WorstFit => "worst_fit",
            PolicyKind::MabUcb => "mab_ucb",
            PolicyKind::Dqn => "dqn",
            PolicyKind::DqnGnn => "dqn_gnn",
            PolicyKind::ActorCritic => "actor_critic",
        }
    }

    /// Builds a fresh policy for a run over `servers`. Learned policies draw
    /// their initialization, exploration and dropout randomness from streams
    /// of `seed`. Q-networks start at the return bound of [`return_upper_bound`].
    pub fn build(self, servers: &[EdgeServer], hp: &Hyperparameters, seed: u64) -> Result<Box<dyn SchedulerPolicy>> {
        hp.validate()?;
        let n = servers.len();
        let q0 = return_upper_bound(servers, hp.gamma);
        Ok(match self {
            PolicyKind::WorstFit => Box::new(WorstFit),
            PolicyKind::MabUcb => Box::new(MabUcb::new(n, hp.ucb_c)),
            PolicyKind::Dqn => Box::new(DqnAgent::new(n, false, hp, seed)?.with_optimistic_init(q0)),
            PolicyKind::DqnGnn => Box::new(DqnAgent::new(n, true, hp, seed)?.with_optimistic_init(q0)),
            PolicyKind::ActorCritic => Box::new(ActorCritic::new(n, hp, seed)?),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownPolicy(s.to_string()))
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
