//! Tabular Q-learning agent: reward shaping, training, evaluation against
//! baseline policies, ranked recommendations with what-if cost-benefit
//! figures, and operator feedback.

mod env;
mod evaluate;
mod feedback;
mod policy;
mod qtable;
mod recommend;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use env::{episode_seed, Environment, SimEnvironment, Transition};
pub use evaluate::{
    evaluate, evaluate_with, run_episode, BaselinePolicy, EpisodeResult, Evaluation, PolicyStats,
};
pub use feedback::{apply_feedback, Decision, FeedbackEvent, RecommendationBook};
pub use policy::{greedy_action, select_action, GreedyPolicy, NoOpPolicy, Policy, RandomPolicy};
pub use qtable::{q_update, QTable, QTableFile, QTABLE_FORMAT_VERSION};
pub use recommend::{
    recommend, recommend_with, simulate_whatif, Recommendation, WhatIf, DEFAULT_HORIZON,
};
pub use train::{train, train_on, EpisodeStats, TrainingStats};

use crate::model::ActionKind;
use crate::simenv::SimError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("index out of range: state {state}, action {action} for a {states}x{actions} table")]
    IndexOutOfRange {
        state: usize,
        action: usize,
        states: usize,
        actions: usize,
    },
    #[error("unknown recommendation `{0}`")]
    UnknownRecommendation(String),
    #[error("recommendation `{0}` already resolved")]
    AlreadyResolved(String),
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
    #[error("q-table shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("q-table document: {0}")]
    Format(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// How the step size is chosen for each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRateSchedule {
    /// Fixed `learning_rate`.
    #[default]
    Constant,
    /// `1 / n` where `n` counts visits to the (state, action) pair including this one.
    InverseVisitCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    /// Multiplicative decay applied once per episode.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub episodes: u32,
    pub rng_seed: u64,
    pub learning_rate_schedule: LearningRateSchedule,
    /// Magnitude of the synthetic reward used for operator feedback.
    pub feedback_reward: f64,
    /// Per-step rewards are clipped to `[-reward_clip, reward_clip]`.
    pub reward_clip: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            learning_rate: 0.1,
            discount: 0.9,
            epsilon_start: 0.3,
            epsilon_decay: 0.995,
            epsilon_min: 0.01,
            episodes: 500,
            rng_seed: 0,
            learning_rate_schedule: LearningRateSchedule::Constant,
            feedback_reward: 0.5,
            reward_clip: 10.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if !(self.discount >= 0.0 && self.discount < 1.0) {
            return bad("discount must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) {
            return bad("epsilon_start must be in [0, 1]");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay must be in (0, 1]");
        }
        if !(self.epsilon_min >= 0.0 && self.epsilon_min <= self.epsilon_start) {
            return bad("epsilon_min must be in [0, epsilon_start]");
        }
        if self.episodes < 1 {
            return bad("episodes must be >= 1");
        }
        if !(self.feedback_reward.is_finite() && self.feedback_reward >= 0.0) {
            return bad("feedback_reward must be finite and >= 0");
        }
        if !(self.reward_clip.is_finite() && self.reward_clip > 0.0) {
            return bad("reward_clip must be finite and > 0");
        }
        Ok(())
    }

    /// Exploration rate used during episode `episode` (0-based).
    pub fn epsilon_for_episode(&self, episode: u32) -> f64 {
        let decayed = self.epsilon_start * self.epsilon_decay.powi(episode as i32);
        decayed.max(self.epsilon_min)
    }

    /// Largest |Q| reachable with clipped rewards.
    pub fn q_bound(&self) -> f64 {
        self.reward_clip / (1.0 - self.discount)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub w_cost: f64,
    pub w_perf: f64,
    pub w_effort: f64,
    /// Cost normalizer. Training resets it to the first-step cost of each episode.
    pub cost_ref: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_cost: 1.0,
            w_perf: 2.0,
            w_effort: 0.1,
            cost_ref: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), AgentError> {
        let weights = [self.w_cost, self.w_perf, self.w_effort];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(AgentError::InvalidConfig("reward weights must be >= 0".into()));
        }
        if !(self.cost_ref > 0.0 && self.cost_ref.is_finite()) {
            return Err(AgentError::InvalidConfig("cost_ref must be > 0".into()));
        }
        Ok(())
    }
}

/// Savings term minus SLO hinge penalty minus effort penalty.
pub fn reward(
    prev_cost: f64,
    curr_cost: f64,
    curr_latency_ms: f64,
    slo_ms: f64,
    action: ActionKind,
    weights: &RewardWeights,
) -> f64 {
    let savings = (prev_cost - curr_cost) / weights.cost_ref;
    let breach = (curr_latency_ms - slo_ms).max(0.0) / slo_ms;
    let effort = if action.requires_effort() { 1.0 } else { 0.0 };
    weights.w_cost * savings - weights.w_perf * breach - weights.w_effort * effort
}
