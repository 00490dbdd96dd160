use serde::{Deserialize, Serialize};

use super::{AgentConfig, AgentError, LearningRateSchedule, RewardWeights};
use crate::model::{NUM_ACTIONS, NUM_STATES};

pub const QTABLE_FORMAT_VERSION: u32 = 1;

/// Dense action-value table with per-entry visit counts, row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl Default for QTable {
    fn default() -> Self {
        QTable::new()
    }
}

impl QTable {
    /// Zero table over the 270 x 7 agent state/action space.
    pub fn new() -> Self {
        QTable::with_shape(NUM_STATES, NUM_ACTIONS)
    }

    pub fn with_shape(states: usize, actions: usize) -> Self {
        QTable {
            states,
            actions,
            values: vec![0.0; states * actions],
            visits: vec![0; states * actions],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.states, self.actions)
    }

    fn offset(&self, state: usize, action: usize) -> Result<usize, AgentError> {
        if state >= self.states || action >= self.actions {
            return Err(AgentError::IndexOutOfRange {
                state,
                action,
                states: self.states,
                actions: self.actions,
            });
        }
        Ok(state * self.actions + action)
    }

    pub fn get(&self, state: usize, action: usize) -> Result<f64, AgentError> {
        Ok(self.values[self.offset(state, action)?])
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) -> Result<(), AgentError> {
        let i = self.offset(state, action)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn visits(&self, state: usize, action: usize) -> Result<u64, AgentError> {
        Ok(self.visits[self.offset(state, action)?])
    }

    pub fn row(&self, state: usize) -> Result<&[f64], AgentError> {
        let start = self.offset(state, 0)?;
        Ok(&self.values[start..start + self.actions])
    }

    pub fn max_value(&self, state: usize) -> Result<f64, AgentError> {
        Ok(self
            .row(state)?
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visits
    }

    /// One-step Q-learning update with an explicit step size. Returns the new value.
    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next_state: usize,
        step_size: f64,
        discount: f64,
    ) -> Result<f64, AgentError> {
        let i = self.offset(state, action)?;
        let bootstrap = self.max_value(next_state)?;
        let target = reward + discount * bootstrap;
        let updated = (1.0 - step_size) * self.values[i] + step_size * target;
        self.values[i] = updated;
        self.visits[i] += 1;
        Ok(updated)
    }

    pub fn to_file(&self, agent_config: &AgentConfig, reward_weights: &RewardWeights) -> QTableFile {
        QTableFile {
            version: QTABLE_FORMAT_VERSION,
            shape: [self.states, self.actions],
            q: self.values.clone(),
            visits: self.visits.clone(),
            agent_config: agent_config.clone(),
            reward_weights: reward_weights.clone(),
        }
    }

    /// Pretty JSON document; identical tables give identical bytes.
    pub fn to_json(&self, agent_config: &AgentConfig, reward_weights: &RewardWeights) -> String {
        serde_json::to_string_pretty(&self.to_file(agent_config, reward_weights))
            .expect("q-table documents always serialize")
    }

    /// Loads a 270 x 7 table document.
    pub fn from_json(text: &str) -> Result<(QTable, AgentConfig, RewardWeights), AgentError> {
        let file: QTableFile =
            serde_json::from_str(text).map_err(|e| AgentError::Format(e.to_string()))?;
        let table = file.clone().into_table((NUM_STATES, NUM_ACTIONS))?;
        Ok((table, file.agent_config, file.reward_weights))
    }
}

/// Serialized form of a [`QTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTableFile {
    pub version: u32,
    pub shape: [usize; 2],
    pub q: Vec<f64>,
    pub visits: Vec<u64>,
    pub agent_config: AgentConfig,
    pub reward_weights: RewardWeights,
}

impl QTableFile {
    pub fn into_table(self, expected: (usize, usize)) -> Result<QTable, AgentError> {
        if self.version != QTABLE_FORMAT_VERSION {
            return Err(AgentError::Format(format!(
                "unsupported version {}",
                self.version
            )));
        }
        let found = (self.shape[0], self.shape[1]);
        if found != expected {
            return Err(AgentError::ShapeMismatch { expected, found });
        }
        let len = expected.0 * expected.1;
        if self.q.len() != len || self.visits.len() != len {
            return Err(AgentError::Format(format!(
                "expected {len} entries, found q={} visits={}",
                self.q.len(),
                self.visits.len()
            )));
        }
        if self.q.iter().any(|v| !v.is_finite()) {
            return Err(AgentError::Format("non-finite q-value".into()));
        }
        Ok(QTable {
            states: expected.0,
            actions: expected.1,
            values: self.q,
            visits: self.visits,
        })
    }
}

/// Q-learning update using the agent's step-size schedule.
pub fn q_update(
    q: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    next_state: usize,
    config: &AgentConfig,
) -> Result<f64, AgentError> {
    let step_size = match config.learning_rate_schedule {
        LearningRateSchedule::Constant => config.learning_rate,
        LearningRateSchedule::InverseVisitCount => 1.0 / (q.visits(state, action)? + 1) as f64,
    };
    q.update(state, action, reward, next_state, step_size, config.discount)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(lr: f64, gamma: f64) -> AgentConfig {
        AgentConfig {
            learning_rate: lr,
            discount: gamma,
            ..AgentConfig::default()
        }
    }

    #[test]
    fn first_update_from_zero() {
        let mut q = QTable::new();
        let v = q_update(&mut q, 10, 3, 1.0, 11, &config(0.1, 0.9)).unwrap();
        assert!((v - 0.1).abs() < 1e-15);
        assert_eq!(q.visits(10, 3).unwrap(), 1);
    }

    #[test]
    fn degenerate_hyperparameters_copy_reward() {
        let mut q = QTable::new();
        q.set(5, 0, 3.0).unwrap();
        q.set(6, 2, 9.0).unwrap();
        let v = q_update(&mut q, 5, 0, -2.5, 6, &config(1.0, 0.0)).unwrap();
        assert_eq!(v, -2.5);
    }

    #[test]
    fn bootstraps_from_next_state_max() {
        let mut q = QTable::new();
        q.set(0, 1, 0.5).unwrap();
        q.set(1, 4, 1.0).unwrap();
        let v = q_update(&mut q, 0, 1, 0.0, 1, &config(0.1, 0.9)).unwrap();
        assert!((v - 0.54).abs() < 1e-12);
    }

    #[test]
    fn inverse_visit_schedule_averages_targets() {
        let mut q = QTable::with_shape(2, 1);
        let c = AgentConfig {
            learning_rate_schedule: LearningRateSchedule::InverseVisitCount,
            discount: 0.0,
            ..AgentConfig::default()
        };
        for r in [3.0, 5.0, 10.0] {
            q_update(&mut q, 0, 0, r, 1, &c).unwrap();
        }
        assert!((q.get(0, 0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_indices() {
        let mut q = QTable::new();
        assert!(matches!(
            q_update(&mut q, 270, 0, 1.0, 0, &AgentConfig::default()),
            Err(AgentError::IndexOutOfRange { .. })
        ));
        assert!(q_update(&mut q, 0, 7, 1.0, 0, &AgentConfig::default()).is_err());
        assert!(q_update(&mut q, 0, 0, 1.0, 999, &AgentConfig::default()).is_err());
        assert!(q.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn json_round_trip_and_shape_check() {
        let mut q = QTable::new();
        q_update(&mut q, 7, 2, 0.3, 8, &AgentConfig::default()).unwrap();
        let text = q.to_json(&AgentConfig::default(), &RewardWeights::default());
        let (back, cfg, _) = QTable::from_json(&text).unwrap();
        assert_eq!(back, q);
        assert_eq!(cfg, AgentConfig::default());

        let small = QTable::with_shape(3, 2).to_json(&AgentConfig::default(), &RewardWeights::default());
        assert!(matches!(
            QTable::from_json(&small),
            Err(AgentError::ShapeMismatch { found: (3, 2), .. })
        ));
        assert!(QTable::from_json("{}").is_err());
    }
}
