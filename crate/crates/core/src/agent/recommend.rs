use serde::{Deserialize, Serialize};

use super::{AgentError, QTable};
use crate::exec::{self, ExecMode};
use crate::model::{ActionKind, DiscreteState, NUM_ACTIONS};
use crate::simenv::{advance, effort_of, EnvConfig, EnvState, StepOutcome};

pub const DEFAULT_HORIZON: u32 = 12;

/// A ranked action proposal for the current state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub id: String,
    pub state: DiscreteState,
    pub action: ActionKind,
    pub q_value: f64,
    /// Cost saved over the what-if horizon versus doing nothing.
    pub predicted_savings: f64,
    pub effort_cost: f64,
    /// `(predicted_savings - effort_cost) / (effort_cost + 1)`.
    pub roi: f64,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub predicted_savings: f64,
    pub effort_cost: f64,
    pub roi: f64,
    /// Outcomes of the rollout that starts with the evaluated action.
    pub trajectory: Vec<StepOutcome>,
}

fn rollout(start: &EnvState, first: ActionKind, config: &EnvConfig, horizon: u32) -> Vec<StepOutcome> {
    let mut state = start.clone();
    let mut out = Vec::with_capacity(horizon as usize);
    for i in 0..horizon {
        let action = if i == 0 { first } else { ActionKind::NoOp };
        let outcome = advance(&state, action, config);
        state = outcome.env_state.clone();
        out.push(outcome);
    }
    out
}

/// Compares `first_action` followed by no-ops against `horizon` no-ops from
/// the same state and workload seed.
///
/// A horizon of 0 is treated as 1.
pub fn simulate_whatif(
    env_state: &EnvState,
    first_action: ActionKind,
    env_config: &EnvConfig,
    horizon: u32,
) -> WhatIf {
    let horizon = horizon.max(1);
    let with_action = rollout(env_state, first_action, env_config, horizon);
    let baseline = rollout(env_state, ActionKind::NoOp, env_config, horizon);
    let total = |t: &[StepOutcome]| t.iter().map(|o| o.cost.total).sum::<f64>();
    let predicted_savings = total(&baseline) - total(&with_action);
    let effort_cost = effort_of(env_state, first_action, env_config);
    WhatIf {
        predicted_savings,
        effort_cost,
        roi: (predicted_savings - effort_cost) / (effort_cost + 1.0),
        trajectory: with_action,
    }
}

/// Actions ordered by Q descending, ordinal ascending on ties.
pub(crate) fn ranked_actions(q: &QTable, state: usize) -> Result<Vec<(ActionKind, f64)>, AgentError> {
    let row = q.row(state)?;
    let mut ranked: Vec<(ActionKind, f64)> = ActionKind::ALL
        .into_iter()
        .zip(row.iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Top-`k` actions for `current`, each annotated by a what-if rollout from `env_state`.
pub fn recommend(
    q: &QTable,
    current: &DiscreteState,
    env_state: &EnvState,
    k: usize,
    env_config: &EnvConfig,
    horizon: u32,
) -> Result<Vec<Recommendation>, AgentError> {
    recommend_with(q, current, env_state, k, env_config, horizon, ExecMode::default())
}

pub fn recommend_with(
    q: &QTable,
    current: &DiscreteState,
    env_state: &EnvState,
    k: usize,
    env_config: &EnvConfig,
    horizon: u32,
    mode: ExecMode,
) -> Result<Vec<Recommendation>, AgentError> {
    if k == 0 || k > NUM_ACTIONS {
        return Err(AgentError::InvalidConfig(format!(
            "k must be in [1, {NUM_ACTIONS}], got {k}"
        )));
    }
    let mut top = ranked_actions(q, current.index())?;
    top.truncate(k);
    let whatifs = exec::map(mode, &top, |(action, _)| {
        simulate_whatif(env_state, *action, env_config, horizon)
    });
    Ok(top
        .into_iter()
        .zip(whatifs)
        .enumerate()
        .map(|(i, ((action, q_value), w))| Recommendation {
            id: uuid::Uuid::new_v4().to_string(),
            state: *current,
            action,
            q_value,
            predicted_savings: w.predicted_savings,
            effort_cost: w.effort_cost,
            roi: w.roi,
            rank: i as u32 + 1,
        })
        .collect())
}
