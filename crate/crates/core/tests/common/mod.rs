#![allow(dead_code)]

use edgesim::infrastructure::{Cell, EdgeServer, PowerModel, Resources};
use edgesim::scenario::{PowerDefaults, Scenario, ScenarioFile, ServerSpec, ServiceSpec, UserSpec};
use edgesim::schedulers::Hyperparameters;
use edgesim::workload::QosPolicy;
use proptest::prelude::*;

pub fn server(id: usize, capacity: Resources, demand: Resources, model: PowerModel) -> EdgeServer {
    EdgeServer {
        id,
        capacity,
        demand,
        power_model: model,
        idle_power: 100.0,
        max_power: 250.0,
        base_station: id,
    }
}

/// Knobs for a small random scenario.
#[derive(Debug, Clone)]
pub struct SmallScenario {
    pub servers: Vec<(f64, f64, f64, PowerModel)>,
    pub services: Vec<(f64, f64, f64)>,
    pub instant: bool,
    pub on_user_move: bool,
    pub p_move: f64,
    pub bandwidth: f64,
}

impl SmallScenario {
    pub fn build(&self) -> Scenario {
        let n = self.servers.len();
        let file = ScenarioFile {
            name: Some("random".into()),
            grid: None,
            power_defaults: PowerDefaults::default(),
            servers: self
                .servers
                .iter()
                .map(|&(cpu, mem, disk, model)| ServerSpec {
                    name: None,
                    cpu_capacity: cpu,
                    memory_capacity: mem,
                    disk_capacity: disk,
                    cpu_demand: 0.0,
                    memory_demand: 0.0,
                    disk_demand: 0.0,
                    base_station: None,
                    power_model: Some(model),
                    idle_power: Some(60.0),
                    max_power: Some(200.0),
                })
                .collect(),
            switches: None,
            base_stations: None,
            links: None,
            default_bandwidth_mbps: self.bandwidth,
            users: (0..2).map(|i| UserSpec { cell: Cell::new(0, i % n) }).collect(),
            services: self
                .services
                .iter()
                .enumerate()
                .map(|(i, &(cpu, mem, disk))| ServiceSpec {
                    cpu_demand: cpu,
                    memory_demand: mem,
                    disk_demand: disk,
                    owner: Some(i % 2),
                    host: None,
                })
                .collect(),
            qos_policy: if self.on_user_move { QosPolicy::OnUserMove } else { QosPolicy::EveryStep },
            instant_migrations: self.instant,
            p_move: self.p_move,
            expose_user_positions: false,
            hyperparameters: Hyperparameters { hidden_width: 8, ..Default::default() },
        };
        Scenario::from_file(file).expect("generated scenario is valid")
    }
}

pub fn power_model() -> impl Strategy<Value = PowerModel> {
    prop_oneof![Just(PowerModel::Linear), Just(PowerModel::Quadratic), Just(PowerModel::Cubic)]
}

pub fn small_scenario() -> impl Strategy<Value = SmallScenario> {
    (
        prop::collection::vec((2.0..12.0f64, 1024.0..8192.0f64, 2048.0..65536.0f64, power_model()), 1..=4),
        prop::collection::vec((0.5..3.0f64, 128.0..2048.0f64, 128.0..4096.0f64), 0..=8),
        any::<bool>(),
        any::<bool>(),
        0.0..1.0f64,
        prop_oneof![Just(100.0), Just(1000.0)],
    )
        .prop_map(|(servers, services, instant, on_user_move, p_move, bandwidth)| SmallScenario {
            servers,
            services,
            instant,
            on_user_move,
            p_move,
            bandwidth,
        })
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
