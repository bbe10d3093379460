//! Command-line front end: run a scenario file, or generate a benchmark
//! policy family variant.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use gem::harness::{
    self, emit_report, format_event_log, format_scenario, generate_variant, load_scenario,
    ReportFormat, RunReport,
};
use gem::policy::parse_atom;
use gem::transport::{Outcome, Scheduler};

#[derive(Parser)]
#[command(name = "gem", about = "Distributed goal evaluation for trust-management policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a scenario file and report answers plus run metrics.
    Run {
        /// Scenario file path.
        scenario: PathBuf,
        /// Goal to evaluate, overriding the scenario's request.
        #[arg(long)]
        query: Option<String>,
        /// Requesting principal, overriding the scenario's request.
        #[arg(long)]
        requester: Option<String>,
        /// Metrics output format.
        #[arg(long, value_enum, default_value_t = Metrics::Table)]
        metrics: Metrics,
        /// Use the seeded random scheduler instead of the scenario default.
        #[arg(long)]
        seed: Option<u64>,
        /// Transport to run over.
        #[arg(long, value_enum, default_value_t = Transport::Sim)]
        transport: Transport,
        /// Write the event log to this file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Generate a benchmark policy family variant as a scenario file.
    Generate {
        /// Policy family (1, 2 or 3).
        #[arg(long)]
        family: u32,
        /// Variant index within the family (0..=5).
        #[arg(long)]
        index: u32,
        /// Fact multiplier (1, 10, 50 or 100).
        #[arg(long, default_value_t = 1)]
        scale: u32,
        /// Output path, or `-` for stdout.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metrics {
    Table,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Transport {
    Sim,
    Tcp,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { scenario, query, requester, metrics, seed, transport, log } => {
            let mut sc = load_scenario(&scenario)
                .with_context(|| format!("loading {}", scenario.display()))?;
            for w in &sc.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(q) = query {
                sc.goal = parse_atom(&q).context("parsing --query")?;
            }
            if let Some(r) = requester {
                if !sc.principals.iter().any(|p| p.name == r) {
                    bail!("requester `{r}` is not declared in the scenario");
                }
                sc.requester = r;
            }
            if let Some(s) = seed {
                sc.scheduler = Scheduler::Random(s);
            }
            let report: RunReport = match transport {
                Transport::Sim => harness::run(&sc)?,
                Transport::Tcp => harness::run_tcp(&sc, Duration::from_secs(30))?,
            };
            if let Some(path) = log {
                fs::write(&path, format_event_log(&report.events))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let code = match &report.outcome {
                Outcome::Answers(answers) => {
                    if answers.is_empty() {
                        println!("no answers");
                    } else {
                        for a in answers {
                            println!("{a}");
                        }
                    }
                    ExitCode::SUCCESS
                }
                Outcome::Floundered(reason) => {
                    println!("floundered: {reason}");
                    ExitCode::from(2)
                }
            };
            let format = match metrics {
                Metrics::Table => ReportFormat::Table,
                Metrics::Csv => ReportFormat::Csv,
            };
            print!("{}", emit_report(std::slice::from_ref(&report.metrics), format));
            Ok(code)
        }
        Command::Generate { family, index, scale, out } => {
            let sc = generate_variant(family, index, scale)?;
            let text = format_scenario(&sc);
            if out.as_os_str() == "-" {
                print!("{text}");
            } else {
                fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
