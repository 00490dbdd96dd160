//! HTTP API over the optimization engine.
//!
//! All state lives in one in-memory [`Session`] behind a single-writer lock.
//! Mutations (ingest, train, feedback) bump `revision` by exactly one; reads
//! never do. Training runs on the blocking pool and commits its table
//! atomically when it finishes.

mod error;
mod routes;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use aiopt_core::AppConfig;
use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;

pub use error::ApiError;
pub use store::{Session, SessionSnapshot, Store};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const ADDR_ENV: &str = "AIOPT_ADDR";
pub const DEFAULT_MAX_BODY_BYTES: usize = 8 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid bind address `{0}`")]
    Addr(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub config: AppConfig,
    pub max_body_bytes: usize,
    /// Loaded at startup if present and written on graceful shutdown.
    pub snapshot_path: Option<PathBuf>,
}

impl ServiceOptions {
    pub fn new(config: AppConfig) -> Self {
        ServiceOptions {
            config,
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            snapshot_path: None,
        }
    }
}

pub fn router(store: Arc<Store>) -> Router {
    let limit = store.max_body_bytes;
    let api = Router::new()
        .route("/metrics", post(routes::ingest))
        .route("/train", post(routes::start_training))
        .route("/recommendations", get(routes::recommendations))
        .route("/recommendations/{id}/feedback", post(routes::feedback))
        .route("/simulate", post(routes::simulate))
        .route("/flaws", get(routes::flaws))
        .route("/report", get(routes::report))
        .route("/kpis", get(routes::kpis))
        .route("/state", get(routes::state));
    Router::new()
        .nest("/api/v1", api)
        .layer(DefaultBodyLimit::max(limit))
        .with_state(store)
}

/// Resolves the bind address: explicit value, then `AIOPT_ADDR`, then the default.
pub fn resolve_addr(explicit: Option<&str>) -> Result<SocketAddr, ServiceError> {
    let raw = explicit
        .map(str::to_string)
        .or_else(|| std::env::var(ADDR_ENV).ok())
        .unwrap_or_else(|| DEFAULT_ADDR.to_string());
    raw.parse().map_err(|_| ServiceError::Addr(raw))
}

fn load_session(path: &PathBuf) -> Result<Session, ServiceError> {
    let fail = |message: String| ServiceError::Snapshot {
        path: path.clone(),
        message,
    };
    if !path.exists() {
        return Ok(Session::default());
    }
    let text = std::fs::read_to_string(path)?;
    let snapshot: SessionSnapshot = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
    snapshot.restore().map_err(|e| fail(e.to_string()))
}

pub fn build_store(options: &ServiceOptions) -> Result<Arc<Store>, ServiceError> {
    let session = match &options.snapshot_path {
        Some(path) => load_session(path)?,
        None => Session::default(),
    };
    Ok(Arc::new(Store::new(
        options.config.clone(),
        options.max_body_bytes,
        session,
    )))
}

/// Serves until Ctrl-C, then writes the snapshot if one is configured.
pub async fn serve(options: ServiceOptions, addr: SocketAddr) -> Result<(), ServiceError> {
    let store = build_store(&options)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(Arc::clone(&store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(path) = &options.snapshot_path {
        let snapshot = store.snapshot().await;
        let text = serde_json::to_string(&snapshot).map_err(|e| ServiceError::Snapshot {
            path: path.clone(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text)?;
    }
    Ok(())
}
