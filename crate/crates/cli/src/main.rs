//! `aiopt`: batch driver for ingest, detect, train, recommend, simulate,
//! report and serve.
//!
//! Exit codes: 0 success, 1 validation error (bad flags, unreadable or
//! malformed inputs), 2 runtime error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use aiopt_core::agent::{recommend, simulate_whatif, train, Recommendation};
use aiopt_core::flawdet::{detect, diagnose, parse_rules, Flaw, FlawRule};
use aiopt_core::model::{
    aggregate_windows, discretize, read_csv, read_json_lines, ActionKind, IngestOutcome,
    Observation, NUM_ACTIONS,
};
use aiopt_core::reporting::{export_report, ExportFormat, Report};
use aiopt_core::simenv::{reset, state_from_snapshot, EnvState};
use aiopt_core::{AppConfig, QTable};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "aiopt", version, about = "Cost-optimization recommendation engine")]
struct Cli {
    /// JSON config document (env, targets, agent, weights, detector, rules, deployment).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print errors as one JSON object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and aggregate a metrics file (JSON Lines, or CSV by extension).
    Ingest {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run flaw detection over a metrics file.
    Detect {
        #[arg(long)]
        file: PathBuf,
        /// Rule file (JSON array); rules from --config are used when absent.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a Q-table on the simulator and write it as JSON.
    Train {
        #[arg(long)]
        episodes: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank actions for the current state.
    Recommend {
        #[arg(long)]
        qtable: PathBuf,
        #[arg(long, default_value_t = 3)]
        top: usize,
        /// Metrics file whose latest window is the current state; simulator reset state when absent.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// What-if rollout of one action against doing nothing.
    Simulate {
        #[arg(long)]
        action: String,
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export KPIs, flaws, recommendations and the cost series.
    Report {
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        qtable: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        top: usize,
    },
    /// Run the HTTP API (address from --addr, then AIOPT_ADDR, then 127.0.0.1:8080).
    Serve {
        #[arg(long)]
        addr: Option<String>,
        /// Session snapshot loaded at startup and written on shutdown.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Runtime(_) => "runtime",
        }
    }
}

fn invalid(e: impl ToString) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl ToString) -> CliError {
    CliError::Runtime(e.to_string())
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| runtime(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(bytes).map_err(runtime),
    }
}

fn emit_json(out: Option<&Path>, value: &impl Serialize) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(runtime)?;
    bytes.push(b'\n');
    emit(out, &bytes)
}

fn load_config(path: Option<&Path>) -> Result<AppConfig, CliError> {
    match path {
        Some(p) => AppConfig::from_json(&read_input(p)?).map_err(|e| invalid(format!("{}: {e}", p.display()))),
        None => Ok(AppConfig::default()),
    }
}

fn load_metrics(path: &Path) -> Result<IngestOutcome, CliError> {
    let text = read_input(path)?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_csv(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    } else {
        Ok(read_json_lines(&text))
    }
}

fn load_rules(path: Option<&Path>, config: &AppConfig) -> Result<Vec<FlawRule>, CliError> {
    match path {
        Some(p) => parse_rules(&read_input(p)?).map_err(|e| invalid(format!("{}: {e}", p.display()))),
        None => Ok(config.rules.clone()),
    }
}

fn load_table(path: &Path) -> Result<QTable, CliError> {
    QTable::from_json(&read_input(path)?)
        .map(|(q, _, _)| q)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn observations(outcome: &IngestOutcome, config: &AppConfig) -> Vec<Observation> {
    aggregate_windows(&outcome.samples, config.window_ms, &config.deployment).0
}

fn find_flaws(outcome: &IngestOutcome, config: &AppConfig, rules: &[FlawRule]) -> Result<Vec<Flaw>, CliError> {
    let mut samples = outcome.samples.clone();
    samples.sort_by_key(|s| s.timestamp);
    detect(&samples, &config.detector, rules).map_err(runtime)
}

/// Current state from the latest telemetry window, or the simulator's reset state.
fn current_state(file: Option<&Path>, config: &AppConfig) -> Result<(EnvState, Option<Observation>), CliError> {
    let Some(path) = file else {
        return Ok((reset(&config.env), None));
    };
    let latest = observations(&load_metrics(path)?, config)
        .pop()
        .ok_or_else(|| invalid(format!("{}: no complete telemetry window", path.display())))?;
    let state = state_from_snapshot(&latest.snapshot, &config.deployment, &config.env);
    Ok((state, Some(latest)))
}

fn recommendations(
    table: &QTable,
    env_state: &EnvState,
    latest: Option<&Observation>,
    top: usize,
    config: &AppConfig,
) -> Result<Vec<Recommendation>, CliError> {
    if !(1..=NUM_ACTIONS).contains(&top) {
        return Err(invalid(format!("--top must be in [1, {NUM_ACTIONS}], got {top}")));
    }
    let snapshot = match latest {
        Some(o) => o.snapshot.clone(),
        None => aiopt_core::simenv::observe(env_state, &config.env, 0.0).snapshot,
    };
    let current = discretize(&snapshot, &config.targets);
    recommend(table, &current, env_state, top, &config.env, config.horizon).map_err(runtime)
}

fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { file, out } => {
            let outcome = load_metrics(&file)?;
            let (windows, skipped) = aggregate_windows(&outcome.samples, config.window_ms, &config.deployment);
            emit_json(
                out.as_deref(),
                &json!({
                    "ingested": outcome.samples.len(),
                    "rejected": outcome.rejected.len(),
                    "reasons": outcome.rejected,
                    "windows": windows.len(),
                    "incomplete_windows": skipped,
                    "latest": windows.last(),
                }),
            )
        }
        Command::Detect { file, rules, out } => {
            let rules = load_rules(rules.as_deref(), &config)?;
            let outcome = load_metrics(&file)?;
            let flaws = find_flaws(&outcome, &config, &rules)?;
            let diagnostic = diagnose(&flaws);
            emit_json(out.as_deref(), &json!({ "flaws": flaws, "diagnostic": diagnostic }))
        }
        Command::Train { episodes, seed, out } => {
            if let Some(n) = episodes {
                config.agent.episodes = n;
            }
            if let Some(s) = seed {
                config.agent.rng_seed = s;
                config.env.rng_seed = s;
            }
            config.agent.validate().map_err(invalid)?;
            let (table, stats) = train(&config.env, &config.targets, &config.agent, &config.weights).map_err(runtime)?;
            let mut text = table.to_json(&config.agent, &config.weights);
            text.push('\n');
            match out {
                Some(path) => {
                    emit(Some(&path), text.as_bytes())?;
                    let last = stats.episodes.last();
                    emit_json(
                        None,
                        &json!({
                            "episodes": stats.episodes.len(),
                            "final_epsilon": stats.final_epsilon,
                            "last_episode": last,
                            "qtable": path,
                        }),
                    )
                }
                None => emit(None, text.as_bytes()),
            }
        }
        Command::Recommend { qtable, top, file, out } => {
            if !(1..=NUM_ACTIONS).contains(&top) {
                return Err(invalid(format!("--top must be in [1, {NUM_ACTIONS}], got {top}")));
            }
            let table = load_table(&qtable)?;
            let (env_state, latest) = current_state(file.as_deref(), &config)?;
            let recs = recommendations(&table, &env_state, latest.as_ref(), top, &config)?;
            emit_json(out.as_deref(), &recs)
        }
        Command::Simulate { action, horizon, file, out } => {
            let action: ActionKind = action.parse().map_err(invalid)?;
            let horizon = horizon.unwrap_or(config.horizon);
            if horizon < 1 {
                return Err(invalid("--horizon must be >= 1"));
            }
            let (env_state, _) = current_state(file.as_deref(), &config)?;
            emit_json(out.as_deref(), &simulate_whatif(&env_state, action, &config.env, horizon))
        }
        Command::Report { format, out, file, qtable, rules, top } => {
            let format: ExportFormat = format.parse().map_err(invalid)?;
            let rules = load_rules(rules.as_deref(), &config)?;
            let outcome = match &file {
                Some(path) => load_metrics(path)?,
                None => IngestOutcome::default(),
            };
            let flaws = find_flaws(&outcome, &config, &rules)?;
            let windows = observations(&outcome, &config);
            let recs = match &qtable {
                Some(path) => {
                    let table = load_table(path)?;
                    let latest = windows.last();
                    let env_state = match latest {
                        Some(o) => state_from_snapshot(&o.snapshot, &config.deployment, &config.env),
                        None => reset(&config.env),
                    };
                    recommendations(&table, &env_state, latest, top, &config)?
                }
                None => Vec::new(),
            };
            let report = Report::from_observations(now_ms(), &windows, &config.targets, flaws, recs);
            emit(out.as_deref(), &export_report(&report, format).map_err(runtime)?)
        }
        Command::Serve { addr, snapshot } => {
            let addr = aiopt_service::resolve_addr(addr.as_deref()).map_err(invalid)?;
            let mut options = aiopt_service::ServiceOptions::new(config);
            options.snapshot_path = snapshot;
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(runtime)?;
            rt.block_on(aiopt_service::serve(options, addr)).map_err(runtime)
        }
    }
}

fn report_error(err: &CliError, json_errors: bool) {
    if json_errors {
        let body = json!({ "error": err.kind(), "message": err.to_string(), "exit_code": err.exit_code() });
        eprintln!("{body}");
    } else {
        eprintln!("aiopt: {err}");
    }
}

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            if json_errors {
                report_error(&CliError::Validation(e.to_string().trim().to_string()), true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(1);
        }
    };
    let json_errors = cli.json_errors;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e, json_errors);
            ExitCode::from(e.exit_code())
        }
    }
}
