//! Seeded simulation of a replicated service.
//!
//! Latency follows an M/M/1-style closure `s_eff / (1 - rho)` with the
//! utilization ceiling at 0.99. Workload is a 24-step sinusoid plus uniform
//! noise drawn from a counter-based stream, so the noise at step `k` depends
//! only on `(seed, k)` and replays are bit-identical.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::model::CostBreakdown;
use crate::model::{ActionKind, Deployment, SystemSnapshot};

pub const RHO_CEILING: f64 = 0.99;
pub const LOAD_PERIOD_STEPS: f64 = 24.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("episode exhausted after {0} steps")]
    EpisodeExhausted(u32),
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
}

/// Simulator parameters. The defaults form the reference scenario `baseline-v1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub base_service_time_s: f64,
    pub max_replicas: u32,
    pub replica_price: f64,
    pub cache_price: f64,
    pub license_price: f64,
    pub ops_price: f64,
    pub maintenance_base: f64,
    pub code_opt_effort_cost: f64,
    pub cache_hit_rate: f64,
    pub code_opt_speedup: f64,
    pub imbalance_drift_per_step: f64,
    pub load_mean_rps: f64,
    pub load_amplitude_rps: f64,
    pub load_noise_rps: f64,
    pub episode_length_steps: u32,
    pub rng_seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            base_service_time_s: 0.05,
            max_replicas: 8,
            replica_price: 10.0,
            cache_price: 5.0,
            license_price: 2.0,
            ops_price: 3.0,
            maintenance_base: 1.0,
            code_opt_effort_cost: 50.0,
            cache_hit_rate: 0.5,
            code_opt_speedup: 0.2,
            imbalance_drift_per_step: 0.05,
            load_mean_rps: 30.0,
            load_amplitude_rps: 15.0,
            load_noise_rps: 2.0,
            episode_length_steps: 48,
            rng_seed: 0,
        }
    }
}

impl EnvConfig {
    pub const BASELINE_V1: &'static str = "baseline-v1";

    pub fn with_seed(&self, seed: u64) -> Self {
        EnvConfig {
            rng_seed: seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        let reals = [
            self.base_service_time_s,
            self.replica_price,
            self.cache_price,
            self.license_price,
            self.ops_price,
            self.maintenance_base,
            self.code_opt_effort_cost,
            self.cache_hit_rate,
            self.code_opt_speedup,
            self.imbalance_drift_per_step,
            self.load_mean_rps,
            self.load_amplitude_rps,
            self.load_noise_rps,
        ];
        if reals.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.base_service_time_s <= 0.0 {
            return bad("base_service_time_s must be > 0");
        }
        if self.max_replicas < 1 {
            return bad("max_replicas must be >= 1");
        }
        let prices = [
            self.replica_price,
            self.cache_price,
            self.license_price,
            self.ops_price,
            self.maintenance_base,
            self.code_opt_effort_cost,
        ];
        if prices.iter().any(|p| *p < 0.0) {
            return bad("prices must be >= 0");
        }
        if !(0.0..1.0).contains(&self.cache_hit_rate) {
            return bad("cache_hit_rate must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.code_opt_speedup) {
            return bad("code_opt_speedup must be in [0, 1)");
        }
        if self.imbalance_drift_per_step < 0.0 {
            return bad("imbalance_drift_per_step must be >= 0");
        }
        if self.load_mean_rps <= 0.0 {
            return bad("load_mean_rps must be > 0");
        }
        if self.load_amplitude_rps < 0.0 || self.load_amplitude_rps > self.load_mean_rps {
            return bad("load_amplitude_rps must be in [0, load_mean_rps]");
        }
        if self.load_noise_rps < 0.0 {
            return bad("load_noise_rps must be >= 0");
        }
        if self.episode_length_steps < 1 {
            return bad("episode_length_steps must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub step: u32,
    pub replicas: u32,
    pub cache_enabled: bool,
    pub code_optimized: bool,
    pub imbalance: f64,
    pub current_load_rps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub snapshot: SystemSnapshot,
    pub cost: CostBreakdown,
    pub env_state: EnvState,
}

/// Offered load at `step`; noise is drawn from stream `step` of the seeded generator.
pub fn load_at(config: &EnvConfig, step: u32, seed: u64) -> f64 {
    let phase = 2.0 * PI * f64::from(step) / LOAD_PERIOD_STEPS;
    let noise = if config.load_noise_rps > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(step));
        rng.random_range(-config.load_noise_rps..=config.load_noise_rps)
    } else {
        0.0
    };
    (config.load_mean_rps + config.load_amplitude_rps * phase.sin() + noise).max(0.0)
}

pub fn effective_service_time(state: &EnvState, config: &EnvConfig) -> f64 {
    if state.code_optimized {
        config.base_service_time_s * (1.0 - config.code_opt_speedup)
    } else {
        config.base_service_time_s
    }
}

/// Returns `(rho, latency_ms)`.
pub fn utilization_and_latency(state: &EnvState, config: &EnvConfig) -> (f64, f64) {
    let service_time = effective_service_time(state, config);
    let load = if state.cache_enabled {
        state.current_load_rps * (1.0 - config.cache_hit_rate)
    } else {
        state.current_load_rps
    };
    let rho = (state.imbalance * load * service_time / f64::from(state.replicas.max(1)))
        .clamp(0.0, RHO_CEILING);
    (rho, 1000.0 * service_time / (1.0 - rho))
}

/// Per-step cost. `one_time_effort` is billed through maintenance.
pub fn cost_of(state: &EnvState, config: &EnvConfig, one_time_effort: f64) -> CostBreakdown {
    let cache = if state.cache_enabled {
        config.cache_price
    } else {
        0.0
    };
    CostBreakdown::new(
        f64::from(state.replicas) * config.replica_price + cache,
        config.license_price,
        config.maintenance_base + one_time_effort,
        config.ops_price,
    )
}

/// Builds the observable outcome for a state.
pub fn observe(state: &EnvState, config: &EnvConfig, one_time_effort: f64) -> StepOutcome {
    let (rho, latency_ms) = utilization_and_latency(state, config);
    let cost = cost_of(state, config, one_time_effort);
    StepOutcome {
        snapshot: SystemSnapshot {
            cpu_util: rho,
            latency_ms,
            throughput_rps: state.current_load_rps,
            total_cost: cost.total,
            cache_enabled: state.cache_enabled,
            replicas: state.replicas,
        },
        cost,
        env_state: state.clone(),
    }
}

pub fn reset(config: &EnvConfig) -> EnvState {
    EnvState {
        step: 0,
        replicas: 2.min(config.max_replicas),
        cache_enabled: false,
        code_optimized: false,
        imbalance: 1.0,
        current_load_rps: load_at(config, 0, config.rng_seed),
    }
}

/// Simulator state matching an observed snapshot. Imbalance is taken as nominal
/// since telemetry does not carry it.
pub fn state_from_snapshot(snapshot: &SystemSnapshot, deployment: &Deployment, config: &EnvConfig) -> EnvState {
    EnvState {
        step: 0,
        replicas: snapshot.replicas.clamp(1, config.max_replicas),
        cache_enabled: snapshot.cache_enabled,
        code_optimized: deployment.code_optimized,
        imbalance: 1.0,
        current_load_rps: snapshot.throughput_rps,
    }
}

/// One-time effort the action would charge from `state`.
pub fn effort_of(state: &EnvState, action: ActionKind, config: &EnvConfig) -> f64 {
    if action == ActionKind::OptimizeCode && !state.code_optimized {
        config.code_opt_effort_cost
    } else {
        0.0
    }
}

// Transition without the episode-length guard; what-if rollouts may run past it.
pub(crate) fn advance(state: &EnvState, action: ActionKind, config: &EnvConfig) -> StepOutcome {
    let mut next = state.clone();
    let effort = effort_of(state, action, config);
    match action {
        ActionKind::ScaleUpReplicas => {
            next.replicas = (next.replicas + 1).min(config.max_replicas)
        }
        ActionKind::ScaleDownReplicas => next.replicas = next.replicas.saturating_sub(1).max(1),
        ActionKind::EnableCache => next.cache_enabled = true,
        ActionKind::DisableCache => next.cache_enabled = false,
        ActionKind::RebalanceWorkload => next.imbalance = 1.0,
        ActionKind::OptimizeCode => next.code_optimized = true,
        ActionKind::NoOp => {}
    }
    next.imbalance = (next.imbalance + config.imbalance_drift_per_step).min(2.0);
    next.step = state.step + 1;
    next.current_load_rps = load_at(config, next.step, config.rng_seed);
    observe(&next, config, effort)
}

/// Applies `action`, drifts imbalance, advances the workload and reports the new step.
pub fn step(
    state: &EnvState,
    action: ActionKind,
    config: &EnvConfig,
) -> Result<StepOutcome, SimError> {
    if state.step >= config.episode_length_steps {
        return Err(SimError::EpisodeExhausted(config.episode_length_steps));
    }
    Ok(advance(state, action, config))
}

/// Stateful wrapper owning one episode.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: EnvConfig,
    state: EnvState,
}

impl Simulator {
    pub fn new(config: EnvConfig) -> Result<Self, SimError> {
        config.validate()?;
        let state = reset(&config);
        Ok(Simulator { config, state })
    }

    pub fn from_state(config: EnvConfig, state: EnvState) -> Result<Self, SimError> {
        config.validate()?;
        Ok(Simulator { config, state })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn observe(&self) -> StepOutcome {
        observe(&self.state, &self.config, 0.0)
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.config.episode_length_steps
    }

    /// Resets with a new seed.
    pub fn reset_with_seed(&mut self, seed: u64) -> &EnvState {
        self.config.rng_seed = seed;
        self.state = reset(&self.config);
        &self.state
    }

    pub fn step(&mut self, action: ActionKind) -> Result<StepOutcome, SimError> {
        let outcome = step(&self.state, action, &self.config)?;
        self.state = outcome.env_state.clone();
        Ok(outcome)
    }
}
