//! Deterministic discrete-time simulator of edge-computing infrastructure in
//! which pluggable schedulers decide where services run, scored by the power
//! the servers draw.
//!
//! The crate is organised bottom-up:
//!
//! * [`infrastructure`]: servers, base stations, switches, power models.
//! * [`network`]: migration flows and max-min fair bandwidth sharing.
//! * [`workload`]: services, user mobility, the migration queue.
//! * [`neural`]: dense networks and GNN message passing.
//! * [`schedulers`]: worst-fit, UCB bandits, DQN, DQN+GNN, actor-critic.
//! * [`sim`]: the step loop and metrics.
//! * [`scenario`] and [`experiment`]: JSON scenarios, CSV/JSON outputs.

pub mod error;
pub mod experiment;
pub mod infrastructure;
pub mod network;
pub mod neural;
pub mod rng;
pub mod scenario;
pub mod schedulers;
pub mod sim;
pub mod workload;

pub use error::{Error, Result};
