use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    episode_seed, AgentError, GreedyPolicy, NoOpPolicy, Policy, QTable, RandomPolicy,
    RewardWeights, SimEnvironment,
};
use crate::exec::{self, ExecMode};
use crate::model::TargetsConfig;
use crate::simenv::{EnvConfig, StepOutcome};

// Evaluation seeds are drawn from a different family than training seeds.
const EVAL_SALT: u64 = 0x5EED_E7A1_0000_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselinePolicy {
    NoOpPolicy,
    RandomPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub total_cost: f64,
    pub total_reward: f64,
    pub outcomes: Vec<StepOutcome>,
}

/// Plays one full episode with `policy` on the simulator seeded with `seed`.
pub fn run_episode(
    env_config: &EnvConfig,
    targets: &TargetsConfig,
    weights: &RewardWeights,
    reward_clip: f64,
    seed: u64,
    policy: &mut dyn Policy,
) -> Result<EpisodeResult, AgentError> {
    let mut env = SimEnvironment::new(env_config.clone(), targets.clone(), weights.clone())?;
    let mut state = env.reset_seeded(seed);
    let mut result = EpisodeResult {
        seed,
        total_cost: 0.0,
        total_reward: 0.0,
        outcomes: Vec::with_capacity(env_config.episode_length_steps as usize),
    };
    loop {
        let t = env.step_action(policy.act(state))?;
        result.total_cost += t.cost;
        result.total_reward += t.reward.clamp(-reward_clip, reward_clip);
        result
            .outcomes
            .push(env.last_outcome().cloned().expect("a step was just taken"));
        state = t.next_state;
        if t.done {
            return Ok(result);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub episodes: usize,
    pub mean_total_cost: f64,
    pub min_total_cost: f64,
    pub max_total_cost: f64,
    pub mean_total_reward: f64,
}

impl PolicyStats {
    fn from_results(results: &[EpisodeResult]) -> Self {
        let n = results.len() as f64;
        let costs = results.iter().map(|r| r.total_cost);
        PolicyStats {
            episodes: results.len(),
            mean_total_cost: costs.clone().sum::<f64>() / n,
            min_total_cost: costs.clone().fold(f64::INFINITY, f64::min),
            max_total_cost: costs.fold(f64::NEG_INFINITY, f64::max),
            mean_total_reward: results.iter().map(|r| r.total_reward).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub baseline_kind: BaselinePolicy,
    pub learned: PolicyStats,
    pub baseline: PolicyStats,
    /// Evaluation seeds, shared by both policies.
    pub seeds: Vec<u64>,
}

impl Evaluation {
    /// Baseline mean cost minus learned mean cost.
    pub fn cost_margin(&self) -> f64 {
        self.baseline.mean_total_cost - self.learned.mean_total_cost
    }
}

/// Greedy play of `q` versus a baseline policy on the same seed set.
pub fn evaluate(
    q: &QTable,
    env_config: &EnvConfig,
    targets: &TargetsConfig,
    weights: &RewardWeights,
    episodes: usize,
    baseline: BaselinePolicy,
) -> Result<Evaluation, AgentError> {
    evaluate_with(q, env_config, targets, weights, episodes, baseline, ExecMode::default())
}

pub fn evaluate_with(
    q: &QTable,
    env_config: &EnvConfig,
    targets: &TargetsConfig,
    weights: &RewardWeights,
    episodes: usize,
    baseline: BaselinePolicy,
    mode: ExecMode,
) -> Result<Evaluation, AgentError> {
    if episodes == 0 {
        return Err(AgentError::InvalidConfig("episodes must be >= 1".into()));
    }
    env_config.validate()?;
    let clip = super::AgentConfig::default().reward_clip;
    let seeds: Vec<u64> = (0..episodes as u64)
        .map(|e| episode_seed(env_config.rng_seed ^ EVAL_SALT, e))
        .collect();

    let learned = exec::map(mode, &seeds, |&seed| {
        run_episode(env_config, targets, weights, clip, seed, &mut GreedyPolicy(q))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let base = exec::map(mode, &seeds, |&seed| match baseline {
        BaselinePolicy::NoOpPolicy => {
            run_episode(env_config, targets, weights, clip, seed, &mut NoOpPolicy)
        }
        BaselinePolicy::RandomPolicy => {
            let mut policy = RandomPolicy(ChaCha8Rng::seed_from_u64(seed ^ EVAL_SALT));
            run_episode(env_config, targets, weights, clip, seed, &mut policy)
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    Ok(Evaluation {
        baseline_kind: baseline,
        learned: PolicyStats::from_results(&learned),
        baseline: PolicyStats::from_results(&base),
        seeds,
    })
}
