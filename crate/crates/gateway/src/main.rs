use std::io::{self, BufReader};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use literacy_core::config::load_config;
use literacy_gateway::commands::{self, RedactFormat, ReportFormat};
use literacy_gateway::{router, Gateway, ReqwestTransport};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "litgate", version, about = "Local AI literacy gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP gateway.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8787)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
    },
    /// Classify and redact stdin line by line.
    Redact {
        /// Rule set file; the bundled rules are used when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RedactFormat::Jsonl)]
        format: RedactFormat,
    },
    /// Replay a JSONL transcript and write a metrics report.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
    },
    /// Print the latest metrics snapshot for a session.
    Metrics {
        #[arg(long)]
        session: String,
        /// Reads the metrics path from this config.
        #[arg(long, conflicts_with = "metrics_file")]
        config: Option<PathBuf>,
        #[arg(long)]
        metrics_file: Option<PathBuf>,
    },
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    match Cli::parse().command {
        Command::Serve { config, port, bind } => serve(config, SocketAddr::new(bind, port)).await,
        Command::Redact { rules, format } => commands::redact(
            rules.as_deref(),
            format,
            BufReader::new(io::stdin().lock()),
            io::stdout().lock(),
        ),
        Command::Analyze {
            config,
            transcript,
            out,
            format,
        } => commands::analyze(&config, &transcript, &out, format),
        Command::Metrics {
            session,
            config,
            metrics_file,
        } => {
            let path = match (metrics_file, config) {
                (Some(p), _) => p,
                (None, Some(c)) => load_config(&c)?.metrics.path,
                (None, None) => PathBuf::from("literacy-metrics.jsonl"),
            };
            commands::metrics(&path, &session, io::stdout().lock())
        }
    }
}

async fn serve(config: PathBuf, addr: SocketAddr) -> Result<()> {
    let config = load_config(&config).with_context(|| format!("loading {}", config.display()))?;
    let endpoint = config.upstream.endpoint.clone();
    let gateway = Gateway::new(config, Arc::new(ReqwestTransport::new()?))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!(%addr, upstream = %endpoint, "gateway listening; UI at /ui/");
    axum::serve(listener, router(Arc::new(gateway)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
