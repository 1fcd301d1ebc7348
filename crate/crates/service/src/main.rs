use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use sentinel_service::{api, bootstrap, replay_only, ServiceConfig};

#[derive(Parser)]
#[command(name = "sentinel", version, about = "Adaptive privacy warning service")]
struct Cli {
    /// JSON configuration file; SENTINEL_* variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve,
    /// Replay the event log and print the resulting state snapshot.
    Replay {
        /// Write the snapshot here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let cfg = ServiceConfig::load(cli.config.as_deref())?;

    match cli.command {
        Command::Serve => serve(cfg),
        Command::Replay { out } => {
            let engine = replay_only(&cfg)?;
            let bytes = engine.snapshot_bytes();
            match out {
                Some(path) => std::fs::write(&path, &bytes)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    stdout.write_all(&bytes)?;
                    stdout.write_all(b"\n")?;
                }
            }
            Ok(())
        }
    }
}

#[tokio::main]
async fn serve(cfg: ServiceConfig) -> anyhow::Result<()> {
    let engine = bootstrap(&cfg)?;
    tracing::info!(events = engine.last_seq(), "state restored");
    let listener = tokio::net::TcpListener::bind(&cfg.listen_addr)
        .await
        .with_context(|| format!("binding {}", cfg.listen_addr))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, api::router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
