//! Implementations behind the `prefgait` subcommands.

use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use prefgait::campaign::{run_campaign, CampaignError, CampaignSummary};
use prefgait::oracle::OracleSpec;
use prefgait::query::{SessionConfig, Strategy};
use prefgait::report::{analyze as analyze_logs, AnalysisReport, ReportError};
use tokio::net::TcpListener;

use crate::config::{ConfigError, ServiceConfig};
use crate::service;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("cannot read {path}: {source}")]
    ReadInput {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid {what}: {message}")]
    InvalidInput { what: String, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: io::Error,
    },
    #[error("server failed: {0}")]
    Serve(#[source] io::Error),
}

impl CommandError {
    /// 2 bad config or input, 3 filesystem trouble, 4 a session or log
    /// could not be processed, 5 the port is unavailable, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::InvalidInput { .. } | CommandError::Config(_) => 2,
            CommandError::ReadInput { .. } => 3,
            CommandError::Campaign(CampaignError::Io { .. }) | CommandError::Report(ReportError::Io { .. }) => 3,
            CommandError::Campaign(CampaignError::NoSeeds) | CommandError::Report(ReportError::NoLogs) => 2,
            CommandError::Campaign(_) | CommandError::Report(_) => 4,
            CommandError::Bind { .. } => 5,
            CommandError::Serve(_) => 1,
        }
    }
}

/// Reads a JSON document from a file, or parses the argument itself when it
/// starts with `{`.
fn load_json<T: serde::de::DeserializeOwned>(arg: &str, what: &str) -> Result<T, CommandError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_owned()
    } else {
        std::fs::read_to_string(arg).map_err(|source| CommandError::ReadInput {
            path: PathBuf::from(arg),
            source,
        })?
    };
    serde_json::from_str(&text).map_err(|e| CommandError::InvalidInput {
        what: what.into(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub config: Option<String>,
    pub oracle: String,
    pub seed_start: u64,
    pub seed_count: u64,
    pub out: PathBuf,
    pub strategy: Option<Strategy>,
}

pub fn simulate(opts: &SimulateOptions) -> Result<CampaignSummary, CommandError> {
    let mut config: SessionConfig = match &opts.config {
        Some(arg) => load_json(arg, "config")?,
        None => SessionConfig::default(),
    };
    if let Some(strategy) = opts.strategy {
        config.strategy = strategy;
    }
    config.validate().map_err(|e| CommandError::InvalidInput {
        what: "config".into(),
        message: e.to_string(),
    })?;
    let oracle: OracleSpec = load_json(&opts.oracle, "oracle spec")?;
    oracle.validate().map_err(|e| CommandError::InvalidInput {
        what: "oracle spec".into(),
        message: e.to_string(),
    })?;
    Ok(run_campaign(&config, &oracle, opts.seed_start, opts.seed_count, Some(&opts.out))?)
}

pub fn analyze(logs: &[PathBuf], traces: Option<&Path>, out: &Path) -> Result<AnalysisReport, CommandError> {
    Ok(analyze_logs(logs, traces, out)?)
}

/// Binds, restores sessions from the data dir and serves until `stop`
/// resolves. Every log line is already on disk when its request returns,
/// so shutting down only has to close open event streams.
pub async fn serve(
    config: ServiceConfig,
    clock: service::Clock,
    on_ready: impl FnOnce(SocketAddr),
    stop: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), CommandError> {
    let addr = config.addr();
    let svc = service::build(config, clock).map_err(|source| CommandError::ReadInput {
        path: PathBuf::from("data dir"),
        source,
    })?;
    if !svc.recovered.is_empty() {
        tracing::info!("restored {} session(s)", svc.recovered.len());
    }
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| CommandError::Bind { addr, source })?;
    on_ready(listener.local_addr().map_err(CommandError::Serve)?);
    let shutdown = Arc::new(svc.shutdown);
    let signal = {
        let shutdown = shutdown.clone();
        async move {
            stop.await;
            tracing::info!("shutting down");
            let _ = shutdown.send(true);
        }
    };
    axum::serve(listener, svc.router)
        .with_graceful_shutdown(signal)
        .await
        .map_err(CommandError::Serve)
}

/// Resolves on SIGINT or SIGTERM.
pub async fn termination_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
