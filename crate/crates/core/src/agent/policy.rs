use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AgentError, QTable};
use crate::model::ActionKind;

/// Argmax over the row; ties go to the lowest ordinal.
pub fn greedy_action(q: &QTable, state: usize) -> Result<usize, AgentError> {
    let row = q.row(state)?;
    let mut best = 0;
    for (a, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = a;
        }
    }
    Ok(best)
}

/// Epsilon-greedy choice. Every call consumes one uniform draw, plus one more
/// when it explores, so the action is fixed by the seed and draw position.
pub fn select_action(
    q: &QTable,
    state: usize,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize, AgentError> {
    let (_, actions) = q.shape();
    if rng.random::<f64>() < epsilon {
        q.row(state)?;
        Ok(rng.random_range(0..actions))
    } else {
        greedy_action(q, state)
    }
}

/// Chooses actions for the simulated service from an observed state index.
pub trait Policy {
    fn act(&mut self, state: usize) -> ActionKind;
}

pub struct GreedyPolicy<'a>(pub &'a QTable);

impl Policy for GreedyPolicy<'_> {
    fn act(&mut self, state: usize) -> ActionKind {
        greedy_action(self.0, state)
            .ok()
            .and_then(ActionKind::from_ordinal)
            .unwrap_or(ActionKind::NoOp)
    }
}

pub struct NoOpPolicy;

impl Policy for NoOpPolicy {
    fn act(&mut self, _state: usize) -> ActionKind {
        ActionKind::NoOp
    }
}

pub struct RandomPolicy(pub ChaCha8Rng);

impl Policy for RandomPolicy {
    fn act(&mut self, _state: usize) -> ActionKind {
        ActionKind::ALL[self.0.random_range(0..ActionKind::ALL.len())]
    }
}
