use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use optotune::SessionStore;
use optotune_server::cli::{self, Cli, Command};
use optotune_server::{router, AppState};
use tracing_subscriber::EnvFilter;

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

async fn serve(
    host: String,
    port: u16,
    data_dir: std::path::PathBuf,
    config: Option<std::path::PathBuf>,
) -> anyhow::Result<()> {
    let defaults = cli::load_session_config(config.as_deref())?;
    let store = SessionStore::open(&data_dir)?;
    let app = router(AppState::new(store, defaults));
    let listener = tokio::net::TcpListener::bind((host.as_str(), port))
        .await
        .with_context(|| format!("binding {host}:{port}"))?;
    tracing::info!(addr = %listener.local_addr()?, data_dir = %data_dir.display(), "listening");
    axum::serve(listener, app).await?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            users,
            seed,
            config,
            noise_temp,
            out,
        } => {
            let results = cli::simulate(users, seed, config.as_deref(), noise_temp, out.as_deref())?;
            print!("{}", results.summary.table());
        }
        Command::Serve {
            port,
            host,
            data_dir,
            config,
        } => {
            tokio::runtime::Runtime::new()?.block_on(serve(host, port, data_dir, config))?;
        }
        Command::Analyze { file } => print_json(&cli::analyze(&file)?)?,
        Command::Replay { file } => {
            let outcome = cli::replay(&file)?;
            print_json(&outcome)?;
            if !outcome.check.identical() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
