use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use aiopt_core::agent::{QTableFile, RecommendationBook};
use aiopt_core::model::{aggregate_windows, MetricSample, Observation, NUM_ACTIONS, NUM_STATES};
use aiopt_core::{AppConfig, QTable};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

/// Everything the API mutates. Only ever changed under the store's write lock.
#[derive(Debug, Clone, Default)]
pub struct Session {
    pub revision: u64,
    pub table: Option<QTable>,
    pub book: RecommendationBook,
    /// Ingested samples, kept ordered by timestamp (stable for equal stamps).
    pub samples: Vec<MetricSample>,
}

impl Session {
    pub fn observations(&self, config: &AppConfig) -> Vec<Observation> {
        aggregate_windows(&self.samples, config.window_ms, &config.deployment).0
    }

    pub fn latest_observation(&self, config: &AppConfig) -> Option<Observation> {
        self.observations(config).pop()
    }

    pub fn ingest(&mut self, samples: Vec<MetricSample>) {
        self.samples.extend(samples);
        self.samples.sort_by_key(|s| s.timestamp);
    }
}

/// On-disk form of a [`Session`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub revision: u64,
    pub table: Option<QTableFile>,
    pub book: RecommendationBook,
    pub samples: Vec<MetricSample>,
}

impl SessionSnapshot {
    pub fn capture(session: &Session, config: &AppConfig) -> Self {
        SessionSnapshot {
            revision: session.revision,
            table: session.table.as_ref().map(|t| t.to_file(&config.agent, &config.weights)),
            book: session.book.clone(),
            samples: session.samples.clone(),
        }
    }

    pub fn restore(self) -> Result<Session, aiopt_core::AgentError> {
        let table = match self.table {
            Some(file) => Some(file.into_table((NUM_STATES, NUM_ACTIONS))?),
            None => None,
        };
        let mut session = Session {
            revision: self.revision,
            table,
            book: self.book,
            samples: Vec::new(),
        };
        session.ingest(self.samples);
        Ok(session)
    }
}

/// Shared service state: one session behind a single-writer lock plus the
/// training guard.
#[derive(Debug)]
pub struct Store {
    pub config: AppConfig,
    pub max_body_bytes: usize,
    session: RwLock<Session>,
    training: AtomicBool,
}

impl Store {
    pub fn new(config: AppConfig, max_body_bytes: usize, session: Session) -> Self {
        Store {
            config,
            max_body_bytes,
            session: RwLock::new(session),
            training: AtomicBool::new(false),
        }
    }

    pub async fn read(&self) -> tokio::sync::RwLockReadGuard<'_, Session> {
        self.session.read().await
    }

    pub async fn write(&self) -> tokio::sync::RwLockWriteGuard<'_, Session> {
        self.session.write().await
    }

    pub fn is_training(&self) -> bool {
        self.training.load(Ordering::SeqCst)
    }

    /// Claims the training slot; `None` if a job already holds it.
    pub fn begin_training(self: &Arc<Self>) -> Option<TrainingGuard> {
        self.training
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
            .ok()
            .map(|_| TrainingGuard(Arc::clone(self)))
    }

    pub async fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot::capture(&*self.read().await, &self.config)
    }
}

/// Releases the training slot on drop, including on panic.
pub struct TrainingGuard(Arc<Store>);

impl Drop for TrainingGuard {
    fn drop(&mut self) {
        self.0.training.store(false, Ordering::SeqCst);
    }
}
