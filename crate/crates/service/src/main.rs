use std::io::IsTerminal;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::Parser;
use coach_service::{build_coach, router, ServiceConfig, SystemClock};
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "coach-server", version, about = "Serve the negotiation coach over HTTP")]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured listen address.
    #[arg(long)]
    listen: Option<String>,
    /// Overrides the configured store file.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let args = Args::parse();
    let mut cfg = match &args.config {
        Some(p) => ServiceConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ServiceConfig::default(),
    };
    if let Some(l) = args.listen {
        cfg.listen = l;
    }
    if let Some(s) = args.store {
        cfg.store_path = s;
    }
    let gateway = cfg.gateway_config()?.build()?;
    let listen = cfg.listen.clone();
    let coach = Arc::new(build_coach(cfg, gateway, Arc::new(SystemClock))?);

    let sweeper = coach.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let c = sweeper.clone();
            match tokio::task::spawn_blocking(move || c.sweep_idle()).await {
                Ok(Ok(n)) if n > 0 => tracing::info!(closed = n, "idle sweep"),
                Ok(Err(e)) => tracing::warn!(error = %e, "idle sweep failed"),
                _ => {}
            }
        }
    });

    let listener = tokio::net::TcpListener::bind(&listen).await.with_context(|| format!("binding {listen}"))?;
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(coach))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
