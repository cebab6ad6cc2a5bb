use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use semsched::dataset;
use semsched::output::{self, write_json, REPORT_FILE, RESULTS_FILE};
use semsched::scenario::{self, parse_value, ScenarioError};
use semsched::sweep::{sweep, sweep_rows, SeedMode, SweepError};
use semsched_core::metrics::constraint_audit;
use semsched_core::{run, run_requests, Policy, Ranking, RunReport, SimError};

#[derive(Parser)]
#[command(version, about = "Urgency-aware LLM request scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace, results and report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<Policy>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        profile: Option<String>,
        /// JSON-lines requests to replay instead of the synthetic workload.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one scenario per value of a config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted key, e.g. `predictor.latency_s` or `urgency_error`.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, value_enum, default_value_t = SeedMode::Same)]
        seeds: SeedMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a trace for urgency-ordering violations.
    Audit {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_parser = parse_ranking, default_value = "true")]
        ranking: Ranking,
    },
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    Policy::parse(s).ok_or_else(|| format!("unknown policy `{s}` (semantic, fcfs, sjf, hpjf)"))
}

fn parse_ranking(s: &str) -> Result<Ranking, String> {
    match s {
        "true" => Ok(Ranking::True),
        "predicted" => Ok(Ranking::Predicted),
        _ => Err(format!("unknown ranking `{s}` (true, predicted)")),
    }
}

enum Outcome {
    Done,
    Unservable(u64),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Unservable(n)) => {
            eprintln!("{n} requests were unservable");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(1)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ScenarioError>()
            || matches!(c.downcast_ref::<SimError>(), Some(SimError::Config(_)))
            || matches!(c.downcast_ref::<SweepError>(), Some(SweepError::Config(_) | SweepError::NoValues))
    })
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Simulate { config, policy, seed, profile, dataset, out } => {
            let mut cfg = scenario::load(&config)?;
            if let Some(p) = policy {
                cfg.policy = p;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = profile {
                cfg.profile = p;
                cfg.validate().map_err(ScenarioError::from)?;
            }
            let trace = match dataset {
                Some(path) => {
                    let d = dataset::read(output::open(&path)?, &cfg.workload, cfg.seed)?;
                    for e in &d.errors {
                        log::warn!("{}: {e}", path.display());
                    }
                    run_requests(&cfg, d.requests)?
                }
                None => run(&cfg)?,
            };
            let report = RunReport::from_trace(&trace, &cfg)?;
            output::write_run(&out, &trace, &report)?;
            println!(
                "{} requests, avg wait {:.4} s, {} violations, {} evictions -> {}",
                trace.records.len(),
                report.avg_wait_s,
                report.violations,
                report.evictions,
                out.display()
            );
            Ok(match report.unservable {
                0 => Outcome::Done,
                n => Outcome::Unservable(n),
            })
        }
        Command::Sweep { config, axis, values, seeds, out } => {
            let cfg = scenario::load(&config)?;
            let values: Vec<_> = values.iter().map(|v| parse_value(v)).collect();
            let points = sweep(&cfg, &axis, &values, seeds)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let results = std::fs::File::create(out.join(RESULTS_FILE))?;
            output::write_results(results, &sweep_rows(&axis, &points))?;
            write_json(std::fs::File::create(out.join(REPORT_FILE))?, &points)?;
            println!("{} runs -> {}", points.len(), out.display());
            let unservable: u64 = points.iter().map(|p| p.report.unservable).sum();
            Ok(match unservable {
                0 => Outcome::Done,
                n => Outcome::Unservable(n),
            })
        }
        Command::Audit { trace, ranking } => {
            let events = output::read_events(output::open(&trace)?)?;
            let records = output::completed_records(&events);
            let audit = constraint_audit(&records, ranking);
            println!(
                "{} completed requests, {} comparable pairs, {} violations (rate {:.6})",
                records.len(),
                audit.comparable_pairs,
                audit.violations.len(),
                audit.rate()
            );
            for (i, j) in audit.violations.iter().take(20) {
                println!("  request {i} finished before more urgent request {j}");
            }
            Ok(Outcome::Done)
        }
    }
}
