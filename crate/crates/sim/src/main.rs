use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;
use sentinel_sim::{run_simulation, run_with, write_csv, Http, SimConfig};

/// Run a seeded synthetic population against the warning engine.
#[derive(Parser)]
#[command(name = "simulate", version)]
struct Cli {
    /// Simulation config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Drive a running service at this base URL instead of an in-process engine.
    #[arg(long, value_name = "URL")]
    via_http: Option<String>,
    /// Also write per-step index and threshold traces as CSV.
    #[arg(long, value_name = "PATH")]
    emit_csv: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let text = std::fs::read_to_string(&cli.config)
        .with_context(|| format!("reading {}", cli.config.display()))?;
    let mut config: SimConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", cli.config.display()))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    let started = Instant::now();
    let mut report = match &cli.via_http {
        Some(url) => run_with(&config, &mut Http::new(url))?,
        None => run_simulation(&config)?,
    };
    report.runtime_ms = Some(started.elapsed().as_millis() as u64);

    let out = File::create(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(out), &report)?;
    if let Some(path) = &cli.emit_csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(&report, BufWriter::new(file))?;
    }

    let covered = report
        .cells
        .iter()
        .filter(|c| c.covered == Some(true))
        .count();
    eprintln!(
        "{} posts, {} warnings, {} reports; {covered}/{} cells cover the true index; {} ms",
        report.totals.posts,
        report.totals.warnings,
        report.totals.reports,
        report.cells.len(),
        report.runtime_ms.unwrap_or_default()
    );
    Ok(())
}
