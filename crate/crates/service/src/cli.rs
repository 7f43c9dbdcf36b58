use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use optotune::fluency::{compute_fluency, FluencyReport};
use optotune::session::ReplayCheck;
use optotune::sim::ActivityInterval;
use optotune::store::read_document;
use optotune::synthetic::CohortResults;
use optotune::{simulate_cohort, CohortConfig, SessionConfig, SessionStore};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "optotune", version, about = "Pairwise tuning of robot-to-human handovers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a cohort of simulated participants through the full protocol.
    Simulate {
        #[arg(long, default_value_t = 30)]
        users: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Cohort config (JSON); missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Choice temperature, as a fraction of each parameter's range.
        #[arg(long)]
        noise_temp: Option<f64>,
        /// Directory for cohort results and session documents.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "sessions")]
        data_dir: PathBuf,
        /// Default session config (JSON) for new sessions.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Report for a session document, or fluency metrics for an event log.
    Analyze { file: PathBuf },
    /// Rebuild a saved session from its inputs and compare byte for byte.
    Replay { file: PathBuf },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_session_config(path: Option<&Path>) -> anyhow::Result<SessionConfig> {
    let config: SessionConfig = match path {
        Some(p) => read_json(p)?,
        None => SessionConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

pub fn simulate(
    users: usize,
    seed: u64,
    config: Option<&Path>,
    noise_temp: Option<f64>,
    out: Option<&Path>,
) -> anyhow::Result<CohortResults> {
    if users == 0 {
        bail!("--users must be at least 1");
    }
    let mut cohort_config: CohortConfig = match config {
        Some(p) => read_json(p)?,
        None => CohortConfig::default(),
    };
    if let Some(t) = noise_temp {
        if !(t >= 0.0 && t.is_finite()) {
            bail!("--noise-temp must be a non-negative number");
        }
        cohort_config.temperature = t;
    }
    let results = simulate_cohort(users, seed, &cohort_config)?;
    if let Some(dir) = out {
        let store = SessionStore::open(dir.join("sessions"))?;
        for session in &results.sessions {
            store.save(session)?;
        }
        write_pretty(&dir.join("cohort.json"), &results)?;
        if let Some(f) = &results.summary.fluency {
            write_pretty(&dir.join("fluency.json"), &f.summary_json())?;
        }
        fs::write(dir.join("summary.txt"), results.summary.table())?;
    }
    Ok(results)
}

fn write_pretty(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Analysis {
    Session(Box<optotune::SessionReport>),
    Fluency(FluencyReport),
}

/// Accepts a session document, a bare event log (array of intervals), or an
/// object with an `events` array such as a handover record.
pub fn analyze(path: &Path) -> anyhow::Result<Analysis> {
    let value: serde_json::Value = read_json(path)?;
    let events = match &value {
        serde_json::Value::Array(_) => Some(value.clone()),
        serde_json::Value::Object(map) if !map.contains_key("schema_version") => map.get("events").cloned(),
        _ => None,
    };
    if let Some(events) = events {
        let events: Vec<ActivityInterval> = serde_json::from_value(events).context("parsing event log")?;
        return Ok(Analysis::Fluency(compute_fluency(&events)?));
    }
    let session = read_document(path)?;
    Ok(Analysis::Session(Box::new(session.report())))
}

#[derive(Debug, Serialize)]
pub struct ReplayOutcome {
    pub session_id: String,
    #[serde(flatten)]
    pub check: ReplayCheck,
}

pub fn replay(path: &Path) -> anyhow::Result<ReplayOutcome> {
    let session = read_document(path)?;
    let check = session.verify_replay()?;
    Ok(ReplayOutcome {
        session_id: session.id().to_string(),
        check,
    })
}
