use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edgesim::experiment::{compare_policies, run_experiment, DEFAULT_STEPS};
use edgesim::scenario::load_scenario;
use edgesim::schedulers::PolicyKind;

/// Edge-computing migration simulator.
#[derive(Debug, Parser)]
#[command(name = "edgesim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one policy and write metrics.csv and summary.json.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// One of worst_fit, mab_ucb, dqn, dqn_gnn, actor_critic.
        #[arg(long)]
        policy: PolicyKind,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every policy over several seeds and write the comparison table.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: u64,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load and validate a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn run(cli: Cli) -> edgesim::Result<()> {
    match cli.command {
        Command::Simulate { scenario, policy, steps, seed, out } => {
            let scenario = load_scenario(&scenario)?;
            let summary = run_experiment(&scenario, policy, steps, seed, &out)?;
            println!(
                "{policy}: steady-state total {:.3} W over the last {} steps -> {}",
                summary.steady_state_total_w,
                summary.steady_state_window,
                out.display()
            );
        }
        Command::Compare { scenario, steps, seeds, out } => {
            let scenario = load_scenario(&scenario)?;
            let comparison = compare_policies(&scenario, steps, &seeds, &out)?;
            for row in &comparison.rows {
                println!(
                    "{:<13} {:>10.3} W  {:>7.2}%",
                    row.policy, row.steady_state_total_w, row.improvement_pct
                );
            }
        }
        Command::Validate { scenario: path } => {
            let scenario = load_scenario(&path)?;
            println!(
                "{}: ok ({} servers, {} base stations, {} users, {} services)",
                path.display(),
                scenario.servers.len(),
                scenario.topology.base_stations.len(),
                scenario.users.len(),
                scenario.services.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EDGESIM_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            log::error!("{err}");
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
