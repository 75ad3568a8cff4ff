//! JSON scenario files: parsing, defaults and validation.
//!
//! Entity ids are list positions (`servers[0]` is server 0). Topology fields
//! may be omitted: the grid defaults to one row with a cell per server, base
//! stations default to one per cell, all attached to switch 0, and links
//! default to a star (every base station wired to its switch, switches
//! chained in id order) at `default_bandwidth_mbps`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infrastructure::{
    BaseStation, Cell, EdgeServer, Endpoint, GridSize, NetworkSwitch, PowerModel, Resources, Topology, TopologyLink,
};
use crate::schedulers::Hyperparameters;
use crate::workload::{QosPolicy, Service, User};

/// The shipped six-server scenario.
pub const SHIPPED_SCENARIO_JSON: &str = include_str!("../../../scenarios/paper_6server.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerDefaults {
    #[serde(default = "default_idle")]
    pub idle_power: f64,
    #[serde(default = "default_max")]
    pub max_power: f64,
    #[serde(default)]
    pub model: PowerModel,
}

fn default_idle() -> f64 {
    100.0
}

fn default_max() -> f64 {
    250.0
}

impl Default for PowerDefaults {
    fn default() -> Self {
        Self { idle_power: default_idle(), max_power: default_max(), model: PowerModel::Linear }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub cpu_capacity: f64,
    pub memory_capacity: f64,
    pub disk_capacity: f64,
    /// Pre-existing load not owned by any simulated service.
    #[serde(default)]
    pub cpu_demand: f64,
    #[serde(default)]
    pub memory_demand: f64,
    #[serde(default)]
    pub disk_demand: f64,
    #[serde(default)]
    pub base_station: Option<usize>,
    #[serde(default)]
    pub power_model: Option<PowerModel>,
    #[serde(default)]
    pub idle_power: Option<f64>,
    #[serde(default)]
    pub max_power: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseStationSpec {
    pub cell: Cell,
    #[serde(default)]
    pub switch: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: Endpoint,
    pub b: Endpoint,
    pub bandwidth_mbps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub cell: Cell,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub cpu_demand: f64,
    pub memory_demand: f64,
    pub disk_demand: f64,
    #[serde(default)]
    pub owner: Option<usize>,
    /// Initial host; omitted means the service starts queued.
    #[serde(default)]
    pub host: Option<usize>,
}

/// On-disk scenario layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub grid: Option<GridSize>,
    #[serde(default)]
    pub power_defaults: PowerDefaults,
    pub servers: Vec<ServerSpec>,
    #[serde(default)]
    pub switches: Option<usize>,
    #[serde(default)]
    pub base_stations: Option<Vec<BaseStationSpec>>,
    #[serde(default)]
    pub links: Option<Vec<LinkSpec>>,
    #[serde(default = "default_bandwidth")]
    pub default_bandwidth_mbps: f64,
    #[serde(default)]
    pub users: Vec<UserSpec>,
    #[serde(default)]
    pub services: Vec<ServiceSpec>,
    #[serde(default)]
    pub qos_policy: QosPolicy,
    #[serde(default = "default_true")]
    pub instant_migrations: bool,
    #[serde(default = "default_p_move")]
    pub p_move: f64,
    #[serde(default)]
    pub expose_user_positions: bool,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
}

fn default_bandwidth() -> f64 {
    1000.0
}

fn default_true() -> bool {
    true
}

fn default_p_move() -> f64 {
    0.2
}

/// A validated scenario, ready to simulate.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub server_names: Vec<String>,
    /// Servers with their pre-existing demand only.
    pub servers: Vec<EdgeServer>,
    pub topology: Topology,
    pub users: Vec<User>,
    pub services: Vec<Service>,
    pub qos_policy: QosPolicy,
    pub instant_migrations: bool,
    pub p_move: f64,
    pub expose_user_positions: bool,
    pub hyperparameters: Hyperparameters,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json_str(&text)
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_file(file)
    }

    pub fn shipped_six_server() -> Self {
        Self::from_json_str(SHIPPED_SCENARIO_JSON).expect("shipped scenario is valid")
    }

    pub fn server_count(&self) -> usize {
        self.servers.len()
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        if file.servers.is_empty() {
            return Err(Error::validation("servers", "at least one server is required"));
        }
        let pd = &file.power_defaults;
        check_power("power_defaults", pd.idle_power, pd.max_power)?;

        let grid = file.grid.unwrap_or(GridSize { rows: 1, cols: file.servers.len() });
        if grid.rows == 0 || grid.cols == 0 {
            return Err(Error::validation("grid", "rows and cols must be >= 1"));
        }
        let switch_count = file.switches.unwrap_or(1);
        if switch_count == 0 {
            return Err(Error::validation("switches", "at least one switch is required"));
        }

        let bs_specs = file.base_stations.clone().unwrap_or_else(|| {
            (0..grid.cell_count())
                .map(|i| BaseStationSpec { cell: Cell::new(i / grid.cols, i % grid.cols), switch: 0 })
                .collect()
        });
        let mut cells = BTreeSet::new();
        for (i, bs) in bs_specs.iter().enumerate() {
            if !grid.contains(bs.cell) {
                return Err(Error::validation(format!("base_stations[{i}].cell"), "outside the grid"));
            }
            if !cells.insert(bs.cell) {
                return Err(Error::validation(format!("base_stations[{i}].cell"), "cell already has a base station"));
            }
            if bs.switch >= switch_count {
                return Err(Error::validation(format!("base_stations[{i}].switch"), format!("no switch {}", bs.switch)));
            }
        }
        if bs_specs.len() != grid.cell_count() {
            return Err(Error::validation(
                "base_stations",
                format!("need exactly one base station per cell ({} cells, {} stations)", grid.cell_count(), bs_specs.len()),
            ));
        }
        let base_stations: Vec<BaseStation> = bs_specs
            .iter()
            .enumerate()
            .map(|(id, s)| BaseStation { id, cell: s.cell, switch: s.switch })
            .collect();

        let link_specs = file.links.clone().unwrap_or_else(|| {
            let bw = file.default_bandwidth_mbps;
            let mut links: Vec<LinkSpec> = base_stations
                .iter()
                .map(|bs| LinkSpec { a: Endpoint::Switch(bs.switch), b: Endpoint::BaseStation(bs.id), bandwidth_mbps: bw })
                .collect();
            links.extend((1..switch_count).map(|s| LinkSpec {
                a: Endpoint::Switch(s - 1),
                b: Endpoint::Switch(s),
                bandwidth_mbps: bw,
            }));
            links
        });
        let exists = |e: Endpoint| match e {
            Endpoint::Switch(id) => id < switch_count,
            Endpoint::BaseStation(id) => id < base_stations.len(),
        };
        for (i, l) in link_specs.iter().enumerate() {
            if !exists(l.a) {
                return Err(Error::validation(format!("links[{i}].a"), "unknown endpoint"));
            }
            if !exists(l.b) {
                return Err(Error::validation(format!("links[{i}].b"), "unknown endpoint"));
            }
            if l.a == l.b {
                return Err(Error::validation(format!("links[{i}]"), "self-loop"));
            }
            if !(l.bandwidth_mbps > 0.0) {
                return Err(Error::validation(format!("links[{i}].bandwidth_mbps"), "must be > 0"));
            }
        }
        for bs in &base_stations {
            let wired = link_specs.iter().any(|l| {
                (l.a == Endpoint::Switch(bs.switch) && l.b == Endpoint::BaseStation(bs.id))
                    || (l.b == Endpoint::Switch(bs.switch) && l.a == Endpoint::BaseStation(bs.id))
            });
            if !wired {
                return Err(Error::validation(format!("base_stations[{}].switch", bs.id), "no link to the attached switch"));
            }
        }
        let topology = Topology {
            switches: (0..switch_count).map(|id| NetworkSwitch { id }).collect(),
            base_stations,
            links: link_specs
                .iter()
                .enumerate()
                .map(|(id, l)| TopologyLink { id, a: l.a, b: l.b, bandwidth: l.bandwidth_mbps })
                .collect(),
            grid,
        };
        if !topology.is_connected() {
            return Err(Error::validation("links", "topology graph is not connected"));
        }

        let mut servers = Vec::with_capacity(file.servers.len());
        let mut server_names = Vec::with_capacity(file.servers.len());
        for (i, s) in file.servers.iter().enumerate() {
            let at = |field: &str| format!("servers[{i}].{field}");
            for (field, value) in [
                ("cpu_capacity", s.cpu_capacity),
                ("memory_capacity", s.memory_capacity),
                ("disk_capacity", s.disk_capacity),
            ] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::validation(at(field), "must be > 0"));
                }
            }
            for (field, demand, cap) in [
                ("cpu_demand", s.cpu_demand, s.cpu_capacity),
                ("memory_demand", s.memory_demand, s.memory_capacity),
                ("disk_demand", s.disk_demand, s.disk_capacity),
            ] {
                if !(demand >= 0.0) {
                    return Err(Error::validation(at(field), "must be >= 0"));
                }
                if demand > cap {
                    return Err(Error::validation(at(field), "exceeds capacity"));
                }
            }
            let idle = s.idle_power.unwrap_or(pd.idle_power);
            let max = s.max_power.unwrap_or(pd.max_power);
            check_power(&format!("servers[{i}]"), idle, max)?;
            let base_station = s.base_station.unwrap_or(i % topology.base_stations.len());
            if base_station >= topology.base_stations.len() {
                return Err(Error::validation(at("base_station"), format!("no base station {base_station}")));
            }
            servers.push(EdgeServer {
                id: i,
                capacity: Resources::new(s.cpu_capacity, s.memory_capacity, s.disk_capacity),
                demand: Resources::new(s.cpu_demand, s.memory_demand, s.disk_demand),
                power_model: s.power_model.unwrap_or(pd.model),
                idle_power: idle,
                max_power: max,
                base_station,
            });
            server_names.push(s.name.clone().unwrap_or_else(|| format!("server_{i}")));
        }

        let mut users: Vec<User> = Vec::with_capacity(file.users.len());
        for (i, u) in file.users.iter().enumerate() {
            if !grid.contains(u.cell) {
                return Err(Error::validation(format!("users[{i}].cell"), "outside the grid"));
            }
            users.push(User { id: i, cell: u.cell, services: Vec::new() });
        }

        let mut services = Vec::with_capacity(file.services.len());
        let mut load: Vec<Resources> = servers.iter().map(|s| s.demand).collect();
        for (i, s) in file.services.iter().enumerate() {
            let at = |field: &str| format!("services[{i}].{field}");
            for (field, value) in [
                ("cpu_demand", s.cpu_demand),
                ("memory_demand", s.memory_demand),
                ("disk_demand", s.disk_demand),
            ] {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::validation(at(field), "must be >= 0"));
                }
            }
            if let Some(owner) = s.owner {
                if owner >= users.len() {
                    return Err(Error::validation(at("owner"), format!("no user {owner}")));
                }
                users[owner].services.push(i);
            }
            let demand = Resources::new(s.cpu_demand, s.memory_demand, s.disk_demand);
            if let Some(host) = s.host {
                if host >= servers.len() {
                    return Err(Error::validation(at("host"), format!("no server {host}")));
                }
                let next = load[host] + demand;
                if !next.fits_within(&servers[host].capacity) {
                    return Err(Error::validation(at("host"), "initial placement exceeds the host's capacity"));
                }
                load[host] = next;
            }
            services.push(Service { id: i, demand, host: s.host, owner: s.owner, in_flight: false });
        }

        if !(0.0..=1.0).contains(&file.p_move) {
            return Err(Error::validation("p_move", "must lie in [0, 1]"));
        }
        file.hyperparameters.validate()?;

        Ok(Scenario {
            name: file.name.unwrap_or_else(|| "scenario".into()),
            server_names,
            servers,
            topology,
            users,
            services,
            qos_policy: file.qos_policy,
            instant_migrations: file.instant_migrations,
            p_move: file.p_move,
            expose_user_positions: file.expose_user_positions,
            hyperparameters: file.hyperparameters,
        })
    }
}

fn check_power(at: &str, idle: f64, max: f64) -> Result<()> {
    if !(idle > 0.0 && idle.is_finite()) {
        return Err(Error::validation(format!("{at}.idle_power"), "must be > 0"));
    }
    if !(max > idle && max.is_finite()) {
        return Err(Error::validation(format!("{at}.max_power"), "must exceed idle_power"));
    }
    Ok(())
}
