use std::collections::BTreeMap;

use super::{DecisionContext, SchedulerPolicy};
use crate::error::Result;
use crate::infrastructure::{EdgeServer, Resources};
use crate::workload::Service;

/// Worst-fit placement of `queue`, in order.
///
/// Candidates are servers with enough free CPU, memory and disk; the one with
/// the most free CPU wins (lowest id on ties). Each placement shrinks that
/// server's free resources before the next service is considered. Services
/// with no candidate are left out of the mapping.
pub fn worst_fit_assign(queue: &[Service], servers: &[EdgeServer]) -> BTreeMap<usize, usize> {
    let mut free: Vec<Resources> = servers.iter().map(EdgeServer::free).collect();
    let mut mapping = BTreeMap::new();
    for service in queue {
        let mut candidates: Vec<usize> = (0..servers.len())
            .filter(|&s| service.demand.fits_within(&free[s]))
            .collect();
        candidates.sort_by(|&a, &b| free[b].cpu.total_cmp(&free[a].cpu).then(a.cmp(&b)));
        if let Some(&chosen) = candidates.first() {
            free[chosen] = free[chosen] - service.demand;
            mapping.insert(service.id, chosen);
        }
    }
    mapping
}

/// Baseline policy: worst-fit, one service at a time.
#[derive(Debug, Clone, Copy, Default)]
pub struct WorstFit;

impl SchedulerPolicy for WorstFit {
    fn name(&self) -> &'static str {
        "worst_fit"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Option<usize>> {
        let mapping = worst_fit_assign(std::slice::from_ref(ctx.service), ctx.servers);
        Ok(mapping.get(&ctx.service.id).copied())
    }
}
