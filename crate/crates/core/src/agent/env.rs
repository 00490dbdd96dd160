use super::{reward, AgentError, RewardWeights};
use crate::model::{discretize, ActionKind, TargetsConfig, NUM_ACTIONS, NUM_STATES};
use crate::simenv::{EnvConfig, Simulator, StepOutcome};

/// Result of one environment step as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next_state: usize,
    pub reward: f64,
    pub done: bool,
    /// Cost incurred by the step (0 for environments without a cost model).
    pub cost: f64,
}

/// Contract between the training loop and whatever it learns from.
pub trait Environment {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Starts episode `episode` and returns the initial state index.
    fn reset(&mut self, episode: u64) -> usize;
    fn step(&mut self, action: usize) -> Result<Transition, AgentError>;
}

/// Seed of episode `episode` derived from a base seed.
pub fn episode_seed(base: u64, episode: u64) -> u64 {
    // splitmix64 finalizer over the combined counter
    let mut z = base.wrapping_add(episode.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The simulated service behind the [`Environment`] contract.
///
/// Observations are discretized snapshots; rewards use the first observed
/// cost of each episode as `cost_ref`.
#[derive(Debug, Clone)]
pub struct SimEnvironment {
    sim: Simulator,
    base_seed: u64,
    targets: TargetsConfig,
    weights: RewardWeights,
    prev_cost: f64,
    last: Option<StepOutcome>,
}

impl SimEnvironment {
    pub fn new(
        config: EnvConfig,
        targets: TargetsConfig,
        weights: RewardWeights,
    ) -> Result<Self, AgentError> {
        let base_seed = config.rng_seed;
        let sim = Simulator::new(config)?;
        targets
            .validate()
            .map_err(|e| AgentError::InvalidConfig(e.to_string()))?;
        Ok(SimEnvironment {
            sim,
            base_seed,
            targets,
            weights,
            prev_cost: 0.0,
            last: None,
        })
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.weights
    }

    /// Outcome of the most recent step, if any.
    pub fn last_outcome(&self) -> Option<&StepOutcome> {
        self.last.as_ref()
    }

    /// Resets to an explicit simulator seed.
    pub fn reset_seeded(&mut self, seed: u64) -> usize {
        self.sim.reset_with_seed(seed);
        let initial = self.sim.observe();
        self.prev_cost = initial.cost.total;
        self.weights.cost_ref = if initial.cost.total > 0.0 {
            initial.cost.total
        } else {
            1.0
        };
        self.last = None;
        discretize(&initial.snapshot, &self.targets).index()
    }

    pub fn step_action(&mut self, action: ActionKind) -> Result<Transition, AgentError> {
        let outcome = self.sim.step(action)?;
        let r = reward(
            self.prev_cost,
            outcome.cost.total,
            outcome.snapshot.latency_ms,
            self.targets.slo_latency_ms,
            action,
            &self.weights,
        );
        self.prev_cost = outcome.cost.total;
        let transition = Transition {
            next_state: discretize(&outcome.snapshot, &self.targets).index(),
            reward: r,
            done: self.sim.is_done(),
            cost: outcome.cost.total,
        };
        self.last = Some(outcome);
        Ok(transition)
    }
}

impl Environment for SimEnvironment {
    fn num_states(&self) -> usize {
        NUM_STATES
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn reset(&mut self, episode: u64) -> usize {
        self.reset_seeded(episode_seed(self.base_seed, episode))
    }

    fn step(&mut self, action: usize) -> Result<Transition, AgentError> {
        let kind = ActionKind::from_ordinal(action).ok_or(AgentError::IndexOutOfRange {
            state: 0,
            action,
            states: NUM_STATES,
            actions: NUM_ACTIONS,
        })?;
        self.step_action(kind)
    }
}
