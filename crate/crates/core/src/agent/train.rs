use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{q_update, select_action, AgentConfig, AgentError, Environment, QTable, RewardWeights, SimEnvironment};
use crate::model::TargetsConfig;
use crate::simenv::EnvConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub total_reward: f64,
    pub total_cost: f64,
    pub epsilon: f64,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    pub episodes: Vec<EpisodeStats>,
    pub final_epsilon: f64,
}

/// Upper bound on steps per episode for environments that never signal `done`.
const MAX_EPISODE_STEPS: u32 = 100_000;

/// Runs epsilon-greedy Q-learning on any [`Environment`].
///
/// Rewards are clipped to `[-reward_clip, reward_clip]` before each update.
/// The result is a pure function of the environment's behaviour and `config`.
pub fn train_on<E: Environment>(
    env: &mut E,
    config: &AgentConfig,
    table: Option<QTable>,
) -> Result<(QTable, TrainingStats), AgentError> {
    config.validate()?;
    let mut q = table.unwrap_or_else(|| QTable::with_shape(env.num_states(), env.num_actions()));
    if q.shape() != (env.num_states(), env.num_actions()) {
        return Err(AgentError::ShapeMismatch {
            expected: (env.num_states(), env.num_actions()),
            found: q.shape(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut episodes = Vec::with_capacity(config.episodes as usize);
    let mut epsilon = config.epsilon_start;

    for episode in 0..config.episodes {
        epsilon = config.epsilon_for_episode(episode);
        let mut state = env.reset(u64::from(episode));
        let mut stats = EpisodeStats {
            total_reward: 0.0,
            total_cost: 0.0,
            epsilon,
            steps: 0,
        };
        while stats.steps < MAX_EPISODE_STEPS {
            let action = select_action(&q, state, epsilon, &mut rng)?;
            let t = env.step(action)?;
            let r = t.reward.clamp(-config.reward_clip, config.reward_clip);
            q_update(&mut q, state, action, r, t.next_state, config)?;
            stats.total_reward += r;
            stats.total_cost += t.cost;
            stats.steps += 1;
            state = t.next_state;
            if t.done {
                break;
            }
        }
        episodes.push(stats);
    }
    Ok((
        q,
        TrainingStats {
            episodes,
            final_epsilon: epsilon,
        },
    ))
}

/// Trains a fresh table on the simulated service.
pub fn train(
    env_config: &EnvConfig,
    targets: &TargetsConfig,
    agent_config: &AgentConfig,
    weights: &RewardWeights,
) -> Result<(QTable, TrainingStats), AgentError> {
    weights.validate()?;
    let mut env = SimEnvironment::new(env_config.clone(), targets.clone(), weights.clone())?;
    train_on(&mut env, agent_config, None)
}
