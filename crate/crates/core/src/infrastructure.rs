//! Edge servers, base stations, switches and the power models that turn
//! resource utilization into watts.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// A CPU / memory / disk triple. CPU is in cores, memory and disk in MB.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub cpu: f64,
    pub memory: f64,
    pub disk: f64,
}

impl Resources {
    pub const ZERO: Resources = Resources {
        cpu: 0.0,
        memory: 0.0,
        disk: 0.0,
    };

    pub fn new(cpu: f64, memory: f64, disk: f64) -> Self {
        Self { cpu, memory, disk }
    }

    /// True when every dimension of `self` is at most the matching one in `other`.
    pub fn fits_within(&self, other: &Resources) -> bool {
        self.cpu <= other.cpu && self.memory <= other.memory && self.disk <= other.disk
    }
}

impl Add for Resources {
    type Output = Resources;

    fn add(self, rhs: Resources) -> Resources {
        Resources::new(self.cpu + rhs.cpu, self.memory + rhs.memory, self.disk + rhs.disk)
    }
}

impl Sub for Resources {
    type Output = Resources;

    fn sub(self, rhs: Resources) -> Resources {
        Resources::new(self.cpu - rhs.cpu, self.memory - rhs.memory, self.disk - rhs.disk)
    }
}

/// Polynomial power curve: `P(u) = P_idle + (P_max - P_idle) * u^k`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerModel {
    #[default]
    Linear,
    Quadratic,
    Cubic,
}

impl PowerModel {
    pub fn degree(self) -> u32 {
        match self {
            PowerModel::Linear => 1,
            PowerModel::Quadratic => 2,
            PowerModel::Cubic => 3,
        }
    }

    /// `u^k` by repeated multiplication, which keeps the result monotone in `u`
    /// and ordered across degrees under floating-point rounding.
    fn shape(self, u: f64) -> f64 {
        match self {
            PowerModel::Linear => u,
            PowerModel::Quadratic => u * u,
            PowerModel::Cubic => u * u * u,
        }
    }

    /// Power drawn at utilization `u` (clamped to `[0, 1]`).
    pub fn evaluate(self, idle_power: f64, max_power: f64, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u >= 1.0 {
            return max_power;
        }
        (idle_power + (max_power - idle_power) * self.shape(u)).min(max_power)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeServer {
    pub id: usize,
    pub capacity: Resources,
    /// Current total demand: pre-existing load plus every hosted service.
    pub demand: Resources,
    pub power_model: PowerModel,
    pub idle_power: f64,
    pub max_power: f64,
    pub base_station: usize,
}

impl EdgeServer {
    pub fn free(&self) -> Resources {
        self.capacity - self.demand
    }

    pub fn can_host(&self, need: &Resources) -> bool {
        (self.demand + *need).fits_within(&self.capacity)
    }

    pub fn utilization(&self) -> f64 {
        utilization(self)
    }

    pub fn power(&self) -> f64 {
        power_consumption(self)
    }
}

/// Unweighted mean of the CPU, memory and disk utilization ratios.
pub fn utilization(server: &EdgeServer) -> f64 {
    let c = &server.capacity;
    let d = &server.demand;
    (d.cpu / c.cpu + d.memory / c.memory + d.disk / c.disk) / 3.0
}

pub fn power_consumption(server: &EdgeServer) -> f64 {
    server
        .power_model
        .evaluate(server.idle_power, server.max_power, utilization(server))
}

/// A grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSize {
    pub rows: usize,
    pub cols: usize,
}

impl GridSize {
    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: usize,
    pub cell: Cell,
    pub switch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSwitch {
    pub id: usize,
}

/// One end of a wired link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Switch(usize),
    BaseStation(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyLink {
    pub id: usize,
    pub a: Endpoint,
    pub b: Endpoint,
    /// Mbps.
    pub bandwidth: f64,
}

impl TopologyLink {
    pub fn other_end(&self, from: Endpoint) -> Option<Endpoint> {
        if self.a == from {
            Some(self.b)
        } else if self.b == from {
            Some(self.a)
        } else {
            None
        }
    }
}

/// Wired topology over switches and base stations.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub switches: Vec<NetworkSwitch>,
    pub base_stations: Vec<BaseStation>,
    pub links: Vec<TopologyLink>,
    pub grid: GridSize,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.switches.len() + self.base_stations.len()
    }

    /// Dense node index: switches first, then base stations.
    pub fn node_index(&self, endpoint: Endpoint) -> Option<usize> {
        match endpoint {
            Endpoint::Switch(id) if id < self.switches.len() => Some(id),
            Endpoint::BaseStation(id) if id < self.base_stations.len() => {
                Some(self.switches.len() + id)
            }
            _ => None,
        }
    }

    pub fn endpoint_of(&self, node: usize) -> Endpoint {
        if node < self.switches.len() {
            Endpoint::Switch(node)
        } else {
            Endpoint::BaseStation(node - self.switches.len())
        }
    }

    /// Per-node list of `(link id, neighbor node)`, sorted by link id.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for link in &self.links {
            if let (Some(a), Some(b)) = (self.node_index(link.a), self.node_index(link.b)) {
                adj[a].push((link.id, b));
                adj[b].push((link.id, a));
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(_, w) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn base_station_at(&self, cell: Cell) -> Option<&BaseStation> {
        self.base_stations.iter().find(|bs| bs.cell == cell)
    }

    /// Undirected server graph: two servers are neighbors when their base
    /// stations hang off the same switch or off two directly linked switches.
    /// Neighbor lists are sorted ascending.
    pub fn server_graph(&self, servers: &[EdgeServer]) -> Vec<Vec<usize>> {
        let switch_of = |s: &EdgeServer| self.base_stations[s.base_station].switch;
        let linked = |x: usize, y: usize| {
            x == y
                || self.links.iter().any(|l| {
                    (l.a == Endpoint::Switch(x) && l.b == Endpoint::Switch(y))
                        || (l.a == Endpoint::Switch(y) && l.b == Endpoint::Switch(x))
                })
        };
        servers
            .iter()
            .map(|s| {
                servers
                    .iter()
                    .filter(|o| o.id != s.id && linked(switch_of(s), switch_of(o)))
                    .map(|o| o.id)
                    .collect()
            })
            .collect()
    }
}
