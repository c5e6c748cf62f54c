use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use lanechange::runtime::{simulate, Mode, SimOptions};
use lanechange::scenario::load_scenario;
use lanechange::trace::{constraint_violations, report_summary, write_trace};

#[derive(Parser)]
#[command(name = "lanechange", version, about = "Distributed MPC lane-change simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario in closed loop and write the per-sample trace.
    Simulate {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Trace output (CSV).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Distributed)]
        mode: ModeArg,
        /// Stop before the scenario's end time (seconds).
        #[arg(long)]
        max_time: Option<f64>,
        /// Write a JSON run summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Write zero solve times so repeated runs give identical traces.
        #[arg(long)]
        deterministic: bool,
        /// Solve the agents one after another.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Distributed,
    Centralized,
}

const BOUND_TOL: f64 = 1e-3;

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let Command::Simulate { scenario, out, mode, max_time, summary, deterministic, sequential } = Cli::parse().command;
    let config = load_scenario(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
    let options = SimOptions {
        mode: match mode {
            ModeArg::Distributed => Mode::Distributed,
            ModeArg::Centralized => Mode::Centralized,
        },
        parallel: !sequential,
        max_time_s: max_time,
    };
    let traces = simulate(&config, options)?;

    let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    write_trace(BufWriter::new(file), &config, &traces, deterministic)?;

    let report = report_summary(&config, &traces);
    if let Some(path) = summary {
        let mut report = report.clone();
        if deterministic {
            report.max_wall_time_s = 0.0;
        }
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &report)?;
    }

    let violations = constraint_violations(&config, &traces, BOUND_TOL);
    for v in violations.iter().take(20) {
        eprintln!("violation t={:.1} {} {} = {:.4} (limit {:.4})", v.t, v.agent, v.quantity, v.value, v.limit);
    }
    if report.nonconverged_steps > 0 {
        eprintln!("{} of {} steps did not converge", report.nonconverged_steps, report.steps);
    }
    Ok(if violations.is_empty() && report.nonconverged_steps == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
