//! The discrete-time loop.
//!
//! Each call to [`SimulationState::step`] runs five phases in a fixed order:
//! user mobility, flow reallocation and progress, one decision per queued
//! service, power measurement, and policy feedback.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infrastructure::{EdgeServer, Endpoint, Resources, Topology};
use crate::network::{advance_flows, max_min_allocate, shortest_path, NetworkFlow, STEP_SECONDS};
use crate::rng::{stream, Stream, StreamRng};
use crate::scenario::Scenario;
use crate::schedulers::{reward_from_power, server_features, DecisionContext, SchedulerPolicy, StepFeedback};
use crate::workload::{enqueue_migrations, mobility_step, QosPolicy, Service, User};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub timestep: u64,
    pub per_server_power: Vec<f64>,
    pub total_power: f64,
    pub reward: f64,
    /// Host changes applied this step, initial placements included.
    pub migrations_performed: u64,
}

/// Clock, entities, in-flight transfers and the metrics gathered so far.
#[derive(Debug, Clone)]
pub struct SimulationState {
    clock: u64,
    rng_seed: u64,
    servers: Vec<EdgeServer>,
    /// Pre-existing load per server, not owned by any service.
    base_demand: Vec<Resources>,
    topology: Topology,
    server_graph: Vec<Vec<usize>>,
    users: Vec<User>,
    services: Vec<Service>,
    flows: Vec<NetworkFlow>,
    next_flow_id: usize,
    qos_policy: QosPolicy,
    instant_migrations: bool,
    p_move: f64,
    expose_user_positions: bool,
    mobility: StreamRng,
    metrics: Vec<MetricsRecord>,
}

impl SimulationState {
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self> {
        check_scenario(scenario)?;
        let base_demand: Vec<Resources> = scenario.servers.iter().map(|s| s.demand).collect();
        let mut state = Self {
            clock: 0,
            rng_seed: seed,
            servers: scenario.servers.clone(),
            base_demand,
            topology: scenario.topology.clone(),
            server_graph: scenario.topology.server_graph(&scenario.servers),
            users: scenario.users.clone(),
            services: scenario.services.clone(),
            flows: Vec::new(),
            next_flow_id: 0,
            qos_policy: scenario.qos_policy,
            instant_migrations: scenario.instant_migrations,
            p_move: scenario.p_move,
            expose_user_positions: scenario.expose_user_positions,
            mobility: stream(seed, Stream::Mobility),
            metrics: Vec::new(),
        };
        state.refresh_demand();
        if let Some(i) = state.servers.iter().position(|s| !s.demand.fits_within(&s.capacity)) {
            return Err(Error::validation(format!("servers[{i}]"), "initial placements exceed capacity"));
        }
        Ok(state)
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn servers(&self) -> &[EdgeServer] {
        &self.servers
    }

    pub fn base_demand(&self) -> &[Resources] {
        &self.base_demand
    }

    pub fn services(&self) -> &[Service] {
        &self.services
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn flows(&self) -> &[NetworkFlow] {
        &self.flows
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn server_graph(&self) -> &[Vec<usize>] {
        &self.server_graph
    }

    pub fn metrics(&self) -> &[MetricsRecord] {
        &self.metrics
    }

    pub fn into_metrics(self) -> Vec<MetricsRecord> {
        self.metrics
    }

    /// Services waiting for a host.
    pub fn queued(&self) -> Vec<usize> {
        self.services.iter().filter(|s| !s.is_hosted()).map(|s| s.id).collect()
    }

    /// Server demand = base demand + demands of hosted services, summed in
    /// service id order so the totals never drift.
    fn refresh_demand(&mut self) {
        for (server, base) in self.servers.iter_mut().zip(&self.base_demand) {
            server.demand = *base;
        }
        for s in &self.services {
            if let Some(h) = s.host {
                self.servers[h].demand = self.servers[h].demand + s.demand;
            }
        }
    }

    fn start_transfer(&mut self, service: usize, from: usize, to: usize) -> Result<()> {
        let src = Endpoint::BaseStation(self.servers[from].base_station);
        let dst = Endpoint::BaseStation(self.servers[to].base_station);
        let path = shortest_path(&self.topology, src, dst)?;
        if path.is_empty() {
            return Ok(());
        }
        let size_mb = self.services[service].demand.memory;
        let flow = NetworkFlow::new(self.next_flow_id, service, from, to, path, size_mb);
        self.next_flow_id += 1;
        if flow.is_active() {
            self.services[service].in_flight = true;
            self.flows.push(flow);
        }
        Ok(())
    }

    fn decide_one(&mut self, id: usize, policy: &mut dyn SchedulerPolicy) -> Result<bool> {
        let previous = self.services[id].host.take();
        if previous.is_some() {
            self.refresh_demand();
        }
        let features = server_features(&self.servers);
        let owner_cell = match (self.expose_user_positions, self.services[id].owner) {
            (true, Some(u)) => Some(self.users[u].cell),
            _ => None,
        };
        let ctx = DecisionContext {
            timestep: self.clock,
            service: &self.services[id],
            servers: &self.servers,
            features: &features,
            server_graph: &self.server_graph,
            owner_cell,
        };
        let choice = policy.decide(&ctx)?;
        let demand = self.services[id].demand;
        let target = match choice {
            Some(i) if i >= self.servers.len() => {
                return Err(Error::Protocol {
                    policy: policy.name().to_string(),
                    index: i,
                    server_count: self.servers.len(),
                });
            }
            Some(i) if self.servers[i].can_host(&demand) => Some(i),
            Some(i) => {
                log::debug!("t={} service {id}: server {i} lacks capacity, keeping {previous:?}", self.clock);
                previous
            }
            None => previous,
        };
        self.services[id].host = target;
        self.refresh_demand();
        let moved = target.is_some() && target != previous;
        if moved && !self.instant_migrations {
            if let (Some(from), Some(to)) = (previous, target) {
                self.start_transfer(id, from, to)?;
            }
        }
        Ok(moved)
    }

    /// Advances the clock by one and returns the record for the step just run.
    pub fn step(&mut self, policy: &mut dyn SchedulerPolicy) -> Result<MetricsRecord> {
        let grid = self.topology.grid;
        let moved: Vec<bool> = self
            .users
            .iter_mut()
            .map(|u| mobility_step(u, grid, self.p_move, &mut self.mobility))
            .collect();

        if !self.flows.is_empty() {
            let allocation = max_min_allocate(&self.flows, &self.topology.links)?;
            for id in advance_flows(&mut self.flows, &allocation, STEP_SECONDS) {
                if let Some(f) = self.flows.iter().find(|f| f.id == id) {
                    self.services[f.service].in_flight = false;
                }
            }
            self.flows.retain(NetworkFlow::is_active);
        }

        let mut migrations = 0;
        for id in enqueue_migrations(&self.services, self.qos_policy, &moved) {
            if self.decide_one(id, policy)? {
                migrations += 1;
            }
        }

        let per_server_power: Vec<f64> = self.servers.iter().map(EdgeServer::power).collect();
        let total_power = per_server_power.iter().sum();
        let reward = reward_from_power(&per_server_power);
        let features = server_features(&self.servers);
        policy.observe(&StepFeedback {
            timestep: self.clock,
            reward,
            server_power: &per_server_power,
            features: &features,
            server_graph: &self.server_graph,
        })?;

        let record = MetricsRecord {
            timestep: self.clock,
            per_server_power,
            total_power,
            reward,
            migrations_performed: migrations,
        };
        self.metrics.push(record.clone());
        self.clock += 1;
        Ok(record)
    }
}

fn check_scenario(scenario: &Scenario) -> Result<()> {
    if scenario.servers.is_empty() {
        return Err(Error::validation("servers", "at least one server is required"));
    }
    for (i, s) in scenario.servers.iter().enumerate() {
        for (field, v) in [
            ("cpu_capacity", s.capacity.cpu),
            ("memory_capacity", s.capacity.memory),
            ("disk_capacity", s.capacity.disk),
            ("idle_power", s.idle_power),
        ] {
            if !(v > 0.0) {
                return Err(Error::validation(format!("servers[{i}].{field}"), "must be > 0"));
            }
        }
        if s.base_station >= scenario.topology.base_stations.len() {
            return Err(Error::validation(format!("servers[{i}].base_station"), "unknown base station"));
        }
    }
    for (i, s) in scenario.services.iter().enumerate() {
        if s.host.is_some_and(|h| h >= scenario.servers.len()) {
            return Err(Error::validation(format!("services[{i}].host"), "unknown server"));
        }
        if s.owner.is_some_and(|u| u >= scenario.users.len()) {
            return Err(Error::validation(format!("services[{i}].owner"), "unknown user"));
        }
    }
    Ok(())
}

/// Runs `steps` steps from a fresh state and closes the policy's episode.
pub fn run_simulation(
    scenario: &Scenario,
    policy: &mut dyn SchedulerPolicy,
    steps: u64,
    seed: u64,
) -> Result<Vec<MetricsRecord>> {
    if steps == 0 {
        return Err(Error::validation("steps", "must be >= 1"));
    }
    let mut state = SimulationState::new(scenario, seed)?;
    for _ in 0..steps {
        state.step(policy)?;
    }
    policy.end_episode()?;
    Ok(state.into_metrics())
}
