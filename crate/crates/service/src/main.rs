use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use elevate_service::{router, AppState, Artifacts, Limits};

#[derive(Parser)]
#[command(name = "elevate-service", version, about = "HTTP API over fitted elevation artifacts")]
struct Args {
    /// Output directory of a pipeline run (holds manifest.json).
    #[arg(long, default_value = "out")]
    artifacts: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    /// Ensemble size when a request does not give one.
    #[arg(long, default_value_t = 2000)]
    default_sows: usize,
    /// Larger requests are capped (and flagged) at this size.
    #[arg(long, default_value_t = 10_000)]
    max_sows: usize,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let state = AppState::new(Limits {
        default_sows: args.default_sows,
        max_sows: args.max_sows.max(1),
    });
    let loader = state.clone();
    let dir = args.artifacts.clone();
    // serve 503s until the bundle is in place
    tokio::task::spawn_blocking(move || match Artifacts::load(&dir) {
        Ok(a) => {
            eprintln!("loaded artifacts from {}", dir.display());
            loader.install(a);
        }
        Err(e) => eprintln!("could not load artifacts from {}: {e:#}", dir.display()),
    });
    let listener = tokio::net::TcpListener::bind(args.bind).await?;
    eprintln!("listening on {}", args.bind);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
