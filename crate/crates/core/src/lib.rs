//! Cost-optimization recommendation engine.
//!
//! Telemetry is ingested and aggregated ([`model`]), screened for flaws
//! ([`flawdet`]), and used to drive a tabular Q-learning agent ([`agent`])
//! trained against a seeded service simulator ([`simenv`]). The agent's
//! ranked, ROI-annotated recommendations and KPI summaries are exported by
//! [`reporting`].

pub mod agent;
pub mod config;
pub mod exec;
pub mod fixtures;
pub mod flawdet;
pub mod model;
pub mod reporting;
pub mod simenv;

pub use agent::{
    apply_feedback, evaluate, recommend, reward, simulate_whatif, train, AgentConfig, AgentError,
    QTable, Recommendation, RewardWeights,
};
pub use config::AppConfig;
pub use exec::ExecMode;
pub use model::{ActionKind, DiscreteState, MetricSample, SystemSnapshot, TargetsConfig};
pub use simenv::{EnvConfig, EnvState};
