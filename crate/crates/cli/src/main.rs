//! Scenario runner: parse a declarative scenario, execute its pipeline, and
//! write machine-readable reports.
//!
//! Exit codes: 0 on success, 2 when a solve verdict contradicts the
//! scenario's declared expectation, 1 on any error.

mod exec;
mod presets;
mod report;
mod spec;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use coblab_core::livsic::Verdict;
use spec::{Expectation, Scenario};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "coblab", version, about = "transfer-operator laboratory runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a bundled preset name).
    Run {
        /// Path to a scenario JSON file, or the name of a bundled preset.
        scenario: String,
        /// Output directory (default: $COBLAB_OUT or the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario seed (and any stochastic base seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the parallel sections.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a scenario file without running it.
    Validate {
        scenario: String,
    },
    /// List the bundled presets.
    ListPresets,
}

fn load_scenario(arg: &str) -> Result<Scenario> {
    if let Some(preset) = presets::preset(arg) {
        return Ok(preset);
    }
    let text = std::fs::read_to_string(arg)
        .with_context(|| format!("cannot read scenario file or preset '{arg}'"))?;
    Scenario::from_json(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::ListPresets => {
            for name in presets::PRESET_NAMES {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario)?;
            println!("ok: scenario '{}' with {} pipeline steps", s.name, s.pipeline.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { scenario, out, seed, threads } => {
            if let Some(k) = threads {
                rayon::ThreadPoolBuilder::new().num_threads(k).build_global().ok();
            }
            let s = load_scenario(&scenario)?;
            let out_dir = out
                .or_else(|| std::env::var_os("COBLAB_OUT").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("cannot create output directory {out_dir:?}"))?;

            let started = Instant::now();
            let outcome = exec::run(&s, &out_dir, seed)?;
            let elapsed = started.elapsed();

            let report_path = out_dir.join(format!("{}_report.json", s.name));
            std::fs::write(&report_path, serde_json::to_string_pretty(&outcome.report)?)?;
            // wall clock lives in a sidecar so reports stay byte-identical
            let timing_path = out_dir.join(format!("{}_timing.json", s.name));
            std::fs::write(
                &timing_path,
                serde_json::to_string_pretty(&serde_json::json!({
                    "scenario": s.name,
                    "wall_clock_seconds": elapsed.as_secs_f64(),
                }))?,
            )?;
            println!("report: {}", report_path.display());

            match (&s.expect, &outcome.verdict) {
                (Some(Expectation::Coboundary), Some(Verdict::NotACoboundary { diagnostic })) => {
                    eprintln!("verdict mismatch: expected coboundary, got: {diagnostic}");
                    Ok(ExitCode::from(2))
                }
                (Some(Expectation::NotACoboundary), Some(Verdict::Coboundary)) => {
                    eprintln!("verdict mismatch: expected not_a_coboundary, got coboundary");
                    Ok(ExitCode::from(2))
                }
                _ => Ok(ExitCode::SUCCESS),
            }
        }
    }
}
