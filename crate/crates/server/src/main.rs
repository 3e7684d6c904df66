use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use prefgait_server::commands::CommandError;
use prefgait::query::Strategy;
use prefgait_server::commands::{self, SimulateOptions};
use prefgait_server::config::ServiceConfig;

#[derive(Parser)]
#[command(name = "prefgait", version, about = "Preference-based tuning of hip exoskeleton torque profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Mi,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulated session per seed and write a campaign CSV.
    Simulate {
        /// Session config JSON (file path or inline object).
        #[arg(long)]
        config: Option<String>,
        /// Oracle spec JSON (file path or inline object).
        #[arg(long)]
        oracle: String,
        #[arg(long, default_value_t = 0)]
        seed_start: u64,
        #[arg(long, default_value_t = 1)]
        seed_count: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
    },
    /// Build CSV/JSON reports from session logs and optional gait traces.
    Analyze {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// Directory with `<session>/profile_<idx>.csv` traces.
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP session API until SIGINT/SIGTERM.
    Serve {
        /// Service config JSON; PREFGAIT_PORT and PREFGAIT_DATA_DIR override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            oracle,
            seed_start,
            seed_count,
            out,
            strategy,
        } => {
            let opts = SimulateOptions {
                config,
                oracle,
                seed_start,
                seed_count,
                out: out.clone(),
                strategy: strategy.map(|s| match s {
                    StrategyArg::Mi => Strategy::MutualInformation,
                    StrategyArg::Random => Strategy::Random,
                }),
            };
            let summary = commands::simulate(&opts).context("simulate failed")?;
            println!(
                "{} sessions  top-1 {:.2}  top-3 {:.2}  mean cos {:.3}",
                summary.rows.len(),
                summary.top1_rate,
                summary.top3_rate,
                summary.mean_alignment
            );
            println!("wrote {}", out.join("campaign.csv").display());
        }
        Command::Analyze { logs, traces, out } => {
            let report = commands::analyze(&logs, traces.as_deref(), &out).context("analyze failed")?;
            for s in &report.sessions {
                for o in &s.omissions {
                    eprintln!("{}: omitted {o}", s.name);
                }
            }
            println!("wrote report for {} session(s) to {}", report.sessions.len(), out.display());
        }
        Command::Serve { config } => {
            let config = ServiceConfig::load(config.as_deref())
                .map_err(CommandError::from)
                .context("cannot load service config")?;
            let runtime = tokio::runtime::Runtime::new().map_err(CommandError::Serve)?;
            runtime.block_on(commands::serve(
                config,
                Arc::new(chrono::Utc::now),
                |addr| println!("listening on http://{addr}"),
                commands::termination_signal(),
            ))
            .context("serve failed")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<CommandError>())
                .map_or(1, CommandError::exit_code);
            ExitCode::from(code)
        }
    }
}
