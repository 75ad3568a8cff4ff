//! Migration traffic as network flows sharing link bandwidth under max-min
//! fairness.

use std::collections::VecDeque;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infrastructure::{Endpoint, Topology, TopologyLink};

/// Seconds of wall time represented by one simulation step.
pub const STEP_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Active,
    Completed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFlow {
    pub id: usize,
    /// Service carried by this migration.
    pub service: usize,
    pub source: usize,
    pub target: usize,
    /// Link ids from source to target.
    pub path: Vec<usize>,
    /// MB.
    pub total_bytes: f64,
    /// MB.
    pub remaining_bytes: f64,
    /// Mbps granted for the current step.
    pub allocated_bandwidth: f64,
    pub status: FlowStatus,
}

impl NetworkFlow {
    pub fn new(id: usize, service: usize, source: usize, target: usize, path: Vec<usize>, size_mb: f64) -> Self {
        let status = if size_mb > 0.0 {
            FlowStatus::Active
        } else {
            FlowStatus::Completed
        };
        Self {
            id,
            service,
            source,
            target,
            path,
            total_bytes: size_mb,
            remaining_bytes: size_mb.max(0.0),
            allocated_bandwidth: 0.0,
            status,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == FlowStatus::Active
    }
}

/// Progressive filling over an arbitrary numeric type.
///
/// `paths[f]` lists the link indices flow `f` crosses; `capacities[l]` is the
/// capacity of link `l`. All unfrozen flows rise at the same rate until some
/// link saturates, then every flow crossing a saturated link is frozen. Flows
/// with an empty path get zero.
pub fn progressive_filling<T>(paths: &[Vec<usize>], capacities: &[T]) -> Result<Vec<T>>
where
    T: Num + PartialOrd + Copy + FromPrimitive,
{
    for (f, path) in paths.iter().enumerate() {
        if let Some(&bad) = path.iter().find(|&&l| l >= capacities.len()) {
            return Err(Error::Topology(format!("flow {f} crosses unknown link {bad}")));
        }
    }

    let mut rate = vec![T::zero(); paths.len()];
    let mut frozen: Vec<bool> = paths.iter().map(|p| p.is_empty()).collect();
    let mut remaining: Vec<T> = capacities.to_vec();
    let mut saturated = vec![false; capacities.len()];

    loop {
        let mut users = vec![0usize; capacities.len()];
        for (f, path) in paths.iter().enumerate() {
            if !frozen[f] {
                for &l in path {
                    users[l] += 1;
                }
            }
        }

        let mut increment: Option<T> = None;
        for (l, &n) in users.iter().enumerate() {
            if n == 0 || saturated[l] {
                continue;
            }
            let share = remaining[l] / T::from_usize(n).expect("flow count fits numeric type");
            if increment.is_none_or(|inc| share < inc) {
                increment = Some(share);
            }
        }
        let Some(increment) = increment else { break };

        for (f, r) in rate.iter_mut().enumerate() {
            if !frozen[f] {
                *r = *r + increment;
            }
        }
        for (l, &n) in users.iter().enumerate() {
            if n == 0 || saturated[l] {
                continue;
            }
            let count = T::from_usize(n).expect("flow count fits numeric type");
            if remaining[l] / count == increment {
                remaining[l] = T::zero();
                saturated[l] = true;
            } else {
                let left = remaining[l] - increment * count;
                remaining[l] = if left < T::zero() { T::zero() } else { left };
            }
        }
        for (f, path) in paths.iter().enumerate() {
            if !frozen[f] && path.iter().any(|&l| saturated[l]) {
                frozen[f] = true;
            }
        }
    }
    Ok(rate)
}

/// Max-min fair bandwidth (Mbps) for each flow in `flows`, in order.
pub fn max_min_allocate(flows: &[NetworkFlow], links: &[TopologyLink]) -> Result<Vec<f64>> {
    let capacity: Vec<f64> = links.iter().map(|l| l.bandwidth).collect();
    let paths: Vec<Vec<usize>> = flows.iter().map(|f| f.path.clone()).collect();
    progressive_filling(&paths, &capacity)
}

/// Moves every active flow forward by one step of `allocation`. Returns the
/// ids of flows that completed during this call.
pub fn advance_flows(flows: &mut [NetworkFlow], allocation: &[f64], dt_seconds: f64) -> Vec<usize> {
    let mut completed = Vec::new();
    for (flow, &mbps) in flows.iter_mut().zip(allocation) {
        if !flow.is_active() {
            continue;
        }
        flow.allocated_bandwidth = mbps;
        let moved_mb = mbps * dt_seconds / 8.0;
        flow.remaining_bytes = (flow.remaining_bytes - moved_mb).max(0.0);
        if flow.remaining_bytes == 0.0 {
            flow.status = FlowStatus::Completed;
            completed.push(flow.id);
        }
    }
    completed
}

/// Fewest-hop path between two endpoints; among equal-length paths the one
/// discovered through lower link ids wins.
pub fn shortest_path(topology: &Topology, from: Endpoint, to: Endpoint) -> Result<Vec<usize>> {
    let unknown = |e: Endpoint| Error::Topology(format!("unknown endpoint {e:?}"));
    let start = topology.node_index(from).ok_or_else(|| unknown(from))?;
    let goal = topology.node_index(to).ok_or_else(|| unknown(to))?;
    if start == goal {
        return Ok(Vec::new());
    }
    let adj = topology.adjacency();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; topology.node_count()];
    let mut seen = vec![false; topology.node_count()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        if v == goal {
            break;
        }
        for &(link, w) in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some((v, link));
                queue.push_back(w);
            }
        }
    }
    if !seen[goal] {
        return Err(Error::Topology(format!("no route from {from:?} to {to:?}")));
    }
    let mut path = Vec::new();
    let mut node = goal;
    while let Some((prev, link)) = parent[node] {
        path.push(link);
        node = prev;
    }
    path.reverse();
    Ok(path)
}
