//! Experiment harness: single runs to `metrics.csv` + `summary.json`, and the
//! all-policies comparison.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::schedulers::PolicyKind;
use crate::sim::{run_simulation, MetricsRecord};

pub const DEFAULT_STEPS: u64 = 200;
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Number of trailing steps averaged for the steady-state statistics:
/// 20% of the run, rounded up, at least one.
pub fn steady_state_window(steps: usize) -> usize {
    steps.div_ceil(5).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: String,
    pub policy: String,
    pub steps: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steady_state_window: usize,
    pub steady_state_total_w: f64,
    pub per_server_mean_w: Vec<f64>,
    pub config: RunConfig,
}

impl Summary {
    pub fn from_records(records: &[MetricsRecord], config: RunConfig) -> Self {
        let window = steady_state_window(records.len()).min(records.len());
        let tail = &records[records.len() - window..];
        let n = records.first().map_or(0, |r| r.per_server_power.len());
        let mean = |f: &dyn Fn(&MetricsRecord) -> f64| tail.iter().map(f).sum::<f64>() / window as f64;
        Self {
            steady_state_window: window,
            steady_state_total_w: mean(&|r| r.total_power),
            per_server_mean_w: (0..n).map(|i| mean(&|r| r.per_server_power[i])).collect(),
            config,
        }
    }
}

/// Builds `kind` from the scenario's hyperparameters and runs it.
pub fn run_policy(scenario: &Scenario, kind: PolicyKind, steps: u64, seed: u64) -> Result<Vec<MetricsRecord>> {
    let mut policy = kind.build(&scenario.servers, &scenario.hyperparameters, seed)?;
    run_simulation(scenario, policy.as_mut(), steps, seed)
}

fn power_header(n: usize) -> String {
    let mut h = String::from("timestep");
    for i in 0..n {
        write!(h, ",server_{i}_w").unwrap();
    }
    h
}

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let n = records.first().map_or(0, |r| r.per_server_power.len());
    let mut out = power_header(n);
    out.push_str(",total_w,reward,migrations\n");
    for r in records {
        write!(out, "{}", r.timestep).unwrap();
        for p in &r.per_server_power {
            write!(out, ",{p}").unwrap();
        }
        writeln!(out, ",{},{},{}", r.total_power, r.reward, r.migrations_performed).unwrap();
    }
    out
}

/// Inverse of [`metrics_csv`].
pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let bad = |line: usize, msg: &str| Error::Decode(format!("metrics.csv line {line}: {msg}"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad(1, "missing header"))?.split(',').collect();
    if header.len() < 4 || header[0] != "timestep" || header[header.len() - 3..] != ["total_w", "reward", "migrations"] {
        return Err(bad(1, "unexpected header"));
    }
    let n = header.len() - 4;
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != header.len() {
                return Err(bad(i + 2, "wrong column count"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 2, "not a number"));
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad(i + 2, "not an integer"));
            Ok(MetricsRecord {
                timestep: int(cols[0])?,
                per_server_power: cols[1..=n].iter().map(|c| num(c)).collect::<Result<_>>()?,
                total_power: num(cols[n + 1])?,
                reward: num(cols[n + 2])?,
                migrations_performed: int(cols[n + 3])?,
            })
        })
        .collect()
}

/// Runs one policy and writes `metrics.csv` and `summary.json` into `out_dir`.
pub fn run_experiment(
    scenario: &Scenario,
    kind: PolicyKind,
    steps: u64,
    seed: u64,
    out_dir: &Path,
) -> Result<Summary> {
    let records = run_policy(scenario, kind, steps, seed)?;
    let summary = Summary::from_records(
        &records,
        RunConfig { scenario: scenario.name.clone(), policy: kind.to_string(), steps, seed },
    );
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("metrics.csv"), metrics_csv(&records))?;
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

/// One row of `comparison.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    /// Seed-averaged steady-state mean per server.
    pub per_server_mean_w: Vec<f64>,
    pub steady_state_total_w: f64,
    /// Reduction of the steady-state total relative to worst-fit, in percent.
    pub improvement_pct: f64,
    /// Steady-state total of each seed, in the order given.
    pub per_seed_total_w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub steps: u64,
    pub seeds: Vec<u64>,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, kind: PolicyKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.policy == kind.as_str())
    }

    pub fn to_csv(&self) -> String {
        let n = self.rows.first().map_or(0, |r| r.per_server_mean_w.len());
        let mut out = String::from("policy");
        for i in 0..n {
            write!(out, ",server_{i}_w").unwrap();
        }
        out.push_str(",steady_state_total_w,improvement_pct\n");
        for r in &self.rows {
            out.push_str(&r.policy);
            for p in &r.per_server_mean_w {
                write!(out, ",{p}").unwrap();
            }
            writeln!(out, ",{},{}", r.steady_state_total_w, r.improvement_pct).unwrap();
        }
        out
    }
}

/// Per-timestep means over seeds, in the `metrics.csv` layout.
fn seed_averaged(runs: &[Vec<MetricsRecord>]) -> Vec<MetricsRecord> {
    let k = runs.len() as f64;
    (0..runs[0].len())
        .map(|t| {
            let n = runs[0][t].per_server_power.len();
            let avg = |f: &dyn Fn(&MetricsRecord) -> f64| runs.iter().map(|r| f(&r[t])).sum::<f64>() / k;
            MetricsRecord {
                timestep: runs[0][t].timestep,
                per_server_power: (0..n).map(|i| avg(&|r| r.per_server_power[i])).collect(),
                total_power: avg(&|r| r.total_power),
                reward: avg(&|r| r.reward),
                migrations_performed: runs.iter().map(|r| r[t].migrations_performed).sum::<u64>() / runs.len() as u64,
            }
        })
        .collect()
}

/// Runs every policy over every seed. Cells run in parallel; results are
/// merged in (policy, seed) order, so the output does not depend on scheduling.
pub fn compare_runs(scenario: &Scenario, steps: u64, seeds: &[u64]) -> Result<(Comparison, Vec<Vec<MetricsRecord>>)> {
    if seeds.is_empty() {
        return Err(Error::validation("seeds", "at least one seed is required"));
    }
    let cells: Vec<(PolicyKind, u64)> =
        PolicyKind::ALL.iter().flat_map(|&k| seeds.iter().map(move |&s| (k, s))).collect();
    let results: Vec<Vec<MetricsRecord>> = cells
        .par_iter()
        .map(|&(kind, seed)| run_policy(scenario, kind, steps, seed))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut timeseries = Vec::new();
    for (p, kind) in PolicyKind::ALL.iter().enumerate() {
        let runs = &results[p * seeds.len()..(p + 1) * seeds.len()];
        let summaries: Vec<Summary> = runs
            .iter()
            .zip(seeds)
            .map(|(r, &seed)| {
                Summary::from_records(
                    r,
                    RunConfig { scenario: scenario.name.clone(), policy: kind.to_string(), steps, seed },
                )
            })
            .collect();
        let k = seeds.len() as f64;
        let n = scenario.server_count();
        let per_seed_total_w: Vec<f64> = summaries.iter().map(|s| s.steady_state_total_w).collect();
        rows.push(ComparisonRow {
            policy: kind.to_string(),
            per_server_mean_w: (0..n).map(|i| summaries.iter().map(|s| s.per_server_mean_w[i]).sum::<f64>() / k).collect(),
            steady_state_total_w: per_seed_total_w.iter().sum::<f64>() / k,
            improvement_pct: 0.0,
            per_seed_total_w,
        });
        timeseries.push(seed_averaged(runs));
    }
    let baseline = rows[0].steady_state_total_w;
    for r in &mut rows {
        r.improvement_pct = 100.0 * (baseline - r.steady_state_total_w) / baseline;
    }
    Ok((Comparison { steps, seeds: seeds.to_vec(), rows }, timeseries))
}

/// [`compare_runs`] plus `comparison.csv`, `comparison.json` and one
/// `timeseries_<policy>.csv` (seed-averaged) per policy in `out_dir`.
pub fn compare_policies(scenario: &Scenario, steps: u64, seeds: &[u64], out_dir: &Path) -> Result<Comparison> {
    let (comparison, timeseries) = compare_runs(scenario, steps, seeds)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("comparison.csv"), comparison.to_csv())?;
    fs::write(out_dir.join("comparison.json"), serde_json::to_string_pretty(&comparison)? + "\n")?;
    for (kind, series) in PolicyKind::ALL.iter().zip(&timeseries) {
        fs::write(out_dir.join(format!("timeseries_{kind}.csv")), metrics_csv(series))?;
    }
    Ok(comparison)
}
