use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use trekbench::dataset::synthetic::{generate, write_dataset, SyntheticConfig};
use trekbench::dataset::{dataset_stats, load_dataset, validate_attributes, AttributeMismatch};
use trekbench::protocols::{LatencySpec, ProtocolConfig, ProtocolId};
use trekbench::report::{
    build_report, default_workers, emit, execute_all, load_inputs, report_from_runs, write_runs,
    EvaluationReport, RunManifest, TrackerEntry, REPORT_FILE, TOOLKIT, WORKERS_ENV,
};
use trekbench::runner::{TrackerHandle, DEFAULT_TIMEOUT};

#[derive(Parser)]
#[command(name = "trekbench", version, about = "Single-object tracking evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trackers on a dataset under one protocol and write runs plus a report.
    Run {
        #[arg(long)]
        protocol: ProtocolId,
        #[arg(long)]
        dataset: PathBuf,
        /// `[NAME=]baseline:<name>`, `[NAME=]external:<command>` or
        /// `[NAME=]recorded:<dir>`; repeatable.
        #[arg(long = "tracker", required = true)]
        trackers: Vec<String>,
        /// Directory of `<sequence>.txt` detection files. Defaults to the
        /// `detections.txt` inside each sequence directory.
        #[arg(long)]
        detections: Option<PathBuf>,
        /// Real-time latency model: `const:S`, `period:K`, `trace:DIR` or `live`.
        #[arg(long)]
        latency: Option<LatencySpec>,
        /// Interaction protocol: start from the ground truth, not a detection.
        #[arg(long)]
        oracle_init: bool,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        /// Seconds to wait for each external tracker response.
        #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
        timeout: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate a report from a run directory.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print motion and box-distribution statistics of a dataset.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Load and check a dataset, flagging attributes that contradict the annotations.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Write a seeded synthetic dataset with detections.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        sequences: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Writes to stdout; a closed pipe (as with `| head`) is not an error.
fn emit_stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    emit_stdout(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn print_ranking(report: &EvaluationReport) -> Result<()> {
    for failure in &report.failures {
        eprintln!("failed: {} on {}: {}", failure.tracker, failure.sequence, failure.message);
    }
    let mut table = String::new();
    for entry in &report.ranking {
        table.push_str(&format!("{:>3}  {:<24} {:.4}\n", entry.rank, entry.tracker, entry.value));
    }
    emit_stdout(&table)
}

#[allow(clippy::too_many_arguments)]
fn run(
    protocol: ProtocolId,
    dataset: &Path,
    trackers: &[String],
    detections: Option<PathBuf>,
    latency: Option<LatencySpec>,
    oracle_init: bool,
    workers: Option<usize>,
    timeout: f64,
    out: &Path,
) -> Result<()> {
    anyhow::ensure!(timeout.is_finite() && timeout > 0.0, "timeout must be positive");
    let handles = trackers
        .iter()
        .map(|s| {
            s.parse::<TrackerHandle>()
                .map(|h| h.with_timeout(Duration::from_secs_f64(timeout)))
        })
        .collect::<trekbench::Result<Vec<_>>>()?;
    let config = ProtocolConfig {
        protocol,
        latency,
        oracle_init,
    };
    let inputs = load_inputs(dataset, detections.as_deref())
        .with_context(|| format!("loading {}", dataset.display()))?;
    let runs = execute_all(&config, &handles, &inputs, workers.unwrap_or_else(default_workers))?;
    let manifest = RunManifest {
        toolkit: TOOLKIT.to_string(),
        protocol: config,
        dataset: dataset.to_path_buf(),
        detections,
        trackers: handles
            .iter()
            .map(|h| TrackerEntry {
                name: h.name.clone(),
                spec: h.spec.clone(),
            })
            .collect(),
        runs,
    };
    write_runs(&manifest, out)?;
    let report = build_report(
        &manifest.protocol,
        &manifest.trackers,
        &manifest.runs,
        &inputs.sequences,
        &inputs.detections,
    );
    emit(&report, &out.join(REPORT_FILE))?;
    print_ranking(&report)
}

#[derive(Serialize)]
struct Validation {
    sequences: usize,
    frames: usize,
    attribute_mismatches: Vec<AttributeMismatch>,
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            protocol,
            dataset,
            trackers,
            detections,
            latency,
            oracle_init,
            workers,
            timeout,
            out,
        } => run(
            protocol,
            &dataset,
            &trackers,
            detections,
            latency,
            oracle_init,
            workers,
            timeout,
            &out,
        ),
        Command::Report { runs, out } => {
            let report = report_from_runs(&runs)?;
            emit(&report, &out)?;
            print_ranking(&report)
        }
        Command::Stats { dataset } => {
            let sequences = load_dataset(&dataset)?;
            anyhow::ensure!(!sequences.is_empty(), "no sequence in {}", dataset.display());
            print_json(&dataset_stats(&sequences))
        }
        Command::Validate { dataset } => {
            let sequences = load_dataset(&dataset)?;
            anyhow::ensure!(!sequences.is_empty(), "no sequence in {}", dataset.display());
            let validation = Validation {
                sequences: sequences.len(),
                frames: sequences.iter().map(|s| s.len()).sum(),
                attribute_mismatches: sequences.iter().flat_map(validate_attributes).collect(),
            };
            print_json(&validation)
        }
        Command::Synth {
            out,
            sequences,
            seed,
        } => {
            let items = generate(&SyntheticConfig {
                sequences,
                seed,
                ..SyntheticConfig::default()
            });
            write_dataset(&items, &out)?;
            emit_stdout(&format!("wrote {} sequences to {}\n", items.len(), out.display()))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
