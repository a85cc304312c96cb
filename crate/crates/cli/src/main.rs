use anyhow::Context;
use clap::{Parser, Subcommand};
use escort::harness::run::{replay, RunOptions};
use escort::harness::{load_scenario, run_path, ScenarioError};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit code for scenario parse and validation errors.
const EXIT_INVALID: u8 = 3;
/// Exit code when a replay does not reproduce the log.
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "escort",
    version,
    about = "Run, validate and replay escort mission scenarios"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its event log.
    Run {
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Stop after this many simulated seconds.
        #[arg(long)]
        until: Option<f64>,
        /// Write the JSONL log here instead of stdout.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Also write control-room alert messages here, one per line.
        #[arg(long)]
        alerts: Option<PathBuf>,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: PathBuf },
    /// Re-run the scenario named in a log and compare.
    Replay { log: PathBuf },
}

fn scenario_error(e: ScenarioError) -> anyhow::Result<ExitCode> {
    match e {
        ScenarioError::Io { .. } => Err(e.into()),
        other => {
            eprintln!("error: {other}");
            Ok(ExitCode::from(EXIT_INVALID))
        }
    }
}

fn main_inner(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Run {
            scenario,
            seed,
            until,
            log,
            alerts,
        } => {
            let out = match run_path(&scenario, RunOptions { seed, until_s: until }) {
                Ok(l) => l,
                Err(e) => return scenario_error(e),
            };
            match &log {
                Some(p) => out.write_to(p).with_context(|| format!("writing {}", p.display()))?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    for line in out.lines() {
                        writeln!(stdout, "{line}")?;
                    }
                }
            }
            if let Some(p) = alerts {
                let text: String = out.verdict.alerts.iter().map(|a| a.to_wire() + "\n").collect();
                std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            }
            let v = &out.verdict;
            eprintln!(
                "{:?} at {:.1} s, goal {}, {} hazard(s), {} alert(s)",
                v.outcome,
                v.end_tick as f64 / 1000.0,
                v.goal_node.as_ref().map_or("-", |g| g.as_str()),
                v.hazards.len(),
                v.alerts.len()
            );
            Ok(ExitCode::from(v.outcome.exit_code() as u8))
        }
        Cmd::Validate { scenario } => match load_scenario(&scenario) {
            Ok(spec) => {
                println!(
                    "{}: ok ({} nodes, {} stops, {} events, horizon {} s)",
                    spec.name,
                    spec.nodes.len(),
                    spec.stops.len(),
                    spec.events.len(),
                    spec.horizon_s
                );
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => scenario_error(e),
        },
        Cmd::Replay { log } => match replay(&log) {
            Ok(r) => match &r.divergence {
                None => {
                    println!("identical: {} records reproduced", r.records);
                    Ok(ExitCode::SUCCESS)
                }
                Some(d) => {
                    println!("{d}");
                    if let Some(e) = &d.expected {
                        println!("  log:    {e}");
                    }
                    if let Some(a) = &d.actual {
                        println!("  replay: {a}");
                    }
                    Ok(ExitCode::from(EXIT_DIVERGED))
                }
            },
            Err(escort::harness::run::ReplayError::Scenario(e)) => scenario_error(e),
            Err(e) => Err(e.into()),
        },
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
