use std::fs;
use std::path::Path;

use edgesim::experiment::{
    compare_policies, metrics_csv, parse_metrics_csv, run_experiment, steady_state_window, Comparison, Summary,
};
use edgesim::infrastructure::Resources;
use edgesim::scenario::{load_scenario, Scenario};
use edgesim::schedulers::PolicyKind;
use edgesim::sim::MetricsRecord;
use edgesim::Error;
use proptest::prelude::*;

fn shipped_path() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/paper_6server.json"))
}

fn write_json(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn shipped_file_carries_the_published_capacities_and_preload() {
    let s = load_scenario(shipped_path()).unwrap();
    let caps: Vec<(f64, f64, f64)> = s.servers.iter().map(|v| (v.capacity.cpu, v.capacity.memory, v.capacity.disk)).collect();
    assert_eq!(
        caps,
        vec![
            (8.0, 16384.0, 131072.0),
            (8.0, 16384.0, 131072.0),
            (8.0, 8192.0, 131072.0),
            (8.0, 8192.0, 131072.0),
            (12.0, 16384.0, 131072.0),
            (12.0, 16384.0, 131072.0),
        ]
    );
    let demands: Vec<Resources> = s.servers.iter().map(|v| v.demand).collect();
    let mut want = vec![Resources::ZERO; 6];
    want[4] = Resources::new(1.0, 1024.0, 1017.0);
    assert_eq!(demands, want);
    assert_eq!(s.server_names[0], "Edgeserver1");
    assert_eq!(s.services.len(), 12);
    assert!(s.services.iter().all(|v| v.demand == Resources::new(1.0, 1024.0, 1024.0) && v.host.is_none()));
    assert_eq!(s, Scenario::shipped_six_server());
}

#[test]
fn zero_cpu_capacity_is_named_by_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(
        dir.path(),
        r#"{"servers": [
            {"cpu_capacity": 4, "memory_capacity": 1024, "disk_capacity": 1024},
            {"cpu_capacity": 0, "memory_capacity": 1024, "disk_capacity": 1024}
        ]}"#,
    );
    let err = load_scenario(&path).unwrap_err();
    assert!(matches!(&err, Error::Validation { .. }), "{err}");
    assert!(err.to_string().contains("servers[1].cpu_capacity"), "{err}");
}

#[test]
fn minimal_file_loads_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), r#"{"servers": [{"cpu_capacity": 4, "memory_capacity": 1024, "disk_capacity": 1024}]}"#);
    let s = load_scenario(&path).unwrap();
    assert_eq!(s.servers.len(), 1);
    assert!(s.services.is_empty());
    assert_eq!((s.servers[0].idle_power, s.servers[0].max_power), (100.0, 250.0));
    assert!(s.instant_migrations);
    assert_eq!(s.p_move, 0.2);
    assert_eq!(s.topology.base_stations.len(), 1);
}

#[test]
fn malformed_json_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "{\n  \"servers\": [\n    {\"cpu_capacity\": 4,,}\n  ]\n}");
    let err = load_scenario(&path).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 3"), "{msg}");
    assert!(msg.contains("column"), "{msg}");
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_scenario("/nonexistent/scenario.json").unwrap_err();
    assert!(matches!(err, Error::Io(_)), "{err}");
}

#[test]
fn single_run_writes_consistent_metrics_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Scenario::shipped_six_server();
    let summary = run_experiment(&scenario, PolicyKind::WorstFit, 200, 0, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 201);
    assert!(lines.iter().all(|l| l.split(',').count() == 10));
    assert_eq!(lines[0], "timestep,server_0_w,server_1_w,server_2_w,server_3_w,server_4_w,server_5_w,total_w,reward,migrations");
    assert!(!text.contains('\r'));

    let records = parse_metrics_csv(&text).unwrap();
    let window = steady_state_window(records.len());
    assert_eq!(window, 40);
    let tail = &records[records.len() - window..];
    let mean = tail.iter().map(|r| r.total_power).sum::<f64>() / window as f64;
    assert!((summary.steady_state_total_w - mean).abs() <= 1e-9 * mean);
    for i in 0..6 {
        let m = tail.iter().map(|r| r.per_server_power[i]).sum::<f64>() / window as f64;
        assert!((summary.per_server_mean_w[i] - m).abs() <= 1e-9 * m);
    }

    let stored: Summary = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(stored, summary);
    assert_eq!(stored.config.policy, "worst_fit");
    assert_eq!((stored.config.steps, stored.config.seed), (200, 0));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let scenario = Scenario::shipped_six_server();
    for kind in PolicyKind::ALL {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&scenario, kind, 60, 7, a.path()).unwrap();
        run_experiment(&scenario, kind, 60, 7, b.path()).unwrap();
        for file in ["metrics.csv", "summary.json"] {
            assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{kind} {file}");
        }
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let err = run_experiment(&Scenario::shipped_six_server(), PolicyKind::WorstFit, 5, 0, &blocker.join("out")).unwrap_err();
    assert!(matches!(err, Error::Io(_)), "{err}");
}

#[test]
fn single_seed_comparison_has_the_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let cmp = compare_policies(&Scenario::shipped_six_server(), 200, &[0], dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    let policies: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(policies, ["worst_fit", "mab_ucb", "dqn", "dqn_gnn", "actor_critic"]);
    for line in &lines[1..] {
        let numeric: Vec<f64> = line.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert_eq!(numeric.len(), 8);
    }
    let stored: Comparison = serde_json::from_str(&fs::read_to_string(dir.path().join("comparison.json")).unwrap()).unwrap();
    assert_eq!(stored, cmp);
    for kind in PolicyKind::ALL {
        let ts = fs::read_to_string(dir.path().join(format!("timeseries_{kind}.csv"))).unwrap();
        assert_eq!(parse_metrics_csv(&ts).unwrap().len(), 200);
    }
    assert_eq!(cmp.row(PolicyKind::WorstFit).unwrap().improvement_pct, 0.0);
}

#[test]
fn multi_seed_comparison_trends() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = [0, 1, 2, 3, 4];
    let cmp = compare_policies(&Scenario::shipped_six_server(), 200, &seeds, dir.path()).unwrap();
    let wf = cmp.row(PolicyKind::WorstFit).unwrap();
    assert!(wf.per_seed_total_w.iter().all(|&t| t == wf.per_seed_total_w[0]), "worst-fit depends on the seed");

    let dqn = cmp.row(PolicyKind::Dqn).unwrap();
    let gnn = cmp.row(PolicyKind::DqnGnn).unwrap();
    assert!(dqn.steady_state_total_w < wf.steady_state_total_w);
    let gnn_wins = gnn.per_seed_total_w.iter().zip(&dqn.per_seed_total_w).filter(|(g, d)| g <= d).count();
    assert!(2 * gnn_wins >= seeds.len(), "dqn_gnn beat dqn on only {gnn_wins} seeds");

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    for row in &cmp.rows {
        assert!((row.steady_state_total_w - mean(&row.per_seed_total_w)).abs() < 1e-9 * row.steady_state_total_w);
    }
}

#[test]
fn empty_seed_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(compare_policies(&Scenario::shipped_six_server(), 10, &[], dir.path()).is_err());
}

fn record(n: usize) -> impl Strategy<Value = MetricsRecord> {
    (
        any::<u64>(),
        prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, n),
        prop::num::f64::NORMAL,
        0u64..1000,
    )
        .prop_map(|(timestep, per_server_power, reward, migrations_performed)| MetricsRecord {
            timestep,
            total_power: per_server_power.iter().sum(),
            per_server_power,
            reward,
            migrations_performed,
        })
}

proptest! {
    #[test]
    fn metrics_csv_round_trips(records in (1usize..7).prop_flat_map(|n| prop::collection::vec(record(n), 1..20))) {
        let text = metrics_csv(&records);
        prop_assert_eq!(parse_metrics_csv(&text).unwrap(), records);
    }
}

#[test]
fn schema_documents_every_field_with_matching_defaults() {
    let schema_path = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/scenario.schema.json"));
    let schema: serde_json::Value = serde_json::from_str(&fs::read_to_string(schema_path).unwrap()).unwrap();
    let props = schema["properties"].as_object().unwrap();
    let shipped: serde_json::Value = serde_json::from_str(&fs::read_to_string(shipped_path()).unwrap()).unwrap();
    for key in shipped.as_object().unwrap().keys() {
        assert!(props.contains_key(key), "schema lacks `{key}`");
    }
    let hp = serde_json::to_value(edgesim::schedulers::Hyperparameters::default()).unwrap();
    let hp_props = props["hyperparameters"]["properties"].as_object().unwrap();
    for (key, value) in hp.as_object().unwrap() {
        assert_eq!(hp_props[key]["default"].as_f64(), value.as_f64(), "default of `{key}`");
    }
}
