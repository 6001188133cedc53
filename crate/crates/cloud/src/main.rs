use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use logat_cloud::{serve, CloudConfig, CloudState};
use logat_core::RunConfig;

/// Transcript-only question answering service.
#[derive(Debug, Parser)]
#[command(name = "logat-cloud", version)]
struct Args {
    /// Run config (TOML or JSON); only the `llm` and `llm_decoding` sections are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8790)]
    port: u16,
    /// Edge service to pull transcripts from.
    #[arg(long, env = "LOGAT_EDGE_URL")]
    edge_url: Option<String>,
    #[arg(long, env = "LOGAT_EDGE_TOKEN", hide_env_values = true)]
    edge_token: Option<String>,
    /// Bearer token clients must send.
    #[arg(long, env = "LOGAT_TOKEN", hide_env_values = true)]
    token: Option<String>,
    /// Answer with the deterministic mock model.
    #[arg(long)]
    mock: bool,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    let run = match RunConfig::load(args.config.as_deref()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut config = CloudConfig::from_run(&run);
    config.mock |= args.mock;
    config.edge_url = args.edge_url;
    config.edge_token = args.edge_token;
    config.token = args.token;
    let state = match CloudState::new(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let listener = match tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}:{}: {e}", args.host, args.port);
            return ExitCode::FAILURE;
        }
    };
    tracing::info!(addr = %listener.local_addr().map(|a| a.to_string()).unwrap_or_default(), "cloud service listening");
    match serve(listener, state).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
