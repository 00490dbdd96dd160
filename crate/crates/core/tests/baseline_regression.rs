//! Baseline comparison on the default scenario, pinned against a recorded fixture.

use aiopt_core::agent::{evaluate, train, AgentConfig, BaselinePolicy, RewardWeights};
use aiopt_core::model::TargetsConfig;
use aiopt_core::simenv::EnvConfig;
use serde::Deserialize;

#[derive(Deserialize)]
struct Margins {
    training_episodes: u32,
    evaluation_episodes: usize,
    learned_mean_cost: f64,
    noop_mean_cost: f64,
    random_mean_cost: f64,
}

const FIXTURE: &str = include_str!("fixtures/baseline_margins.json");

#[test]
fn margins_match_the_recorded_fixture() {
    let pinned: Margins = serde_json::from_str(FIXTURE).unwrap();
    let env = EnvConfig::default();
    let targets = TargetsConfig::default();
    let weights = RewardWeights::default();
    let agent = AgentConfig {
        episodes: pinned.training_episodes,
        ..AgentConfig::default()
    };
    let (q, _) = train(&env, &targets, &agent, &weights).unwrap();
    let noop = evaluate(&q, &env, &targets, &weights, pinned.evaluation_episodes, BaselinePolicy::NoOpPolicy).unwrap();
    let random = evaluate(&q, &env, &targets, &weights, pinned.evaluation_episodes, BaselinePolicy::RandomPolicy).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
    assert_eq!(noop.learned, random.learned);
    assert!(close(noop.learned.mean_total_cost, pinned.learned_mean_cost));
    assert!(close(noop.baseline.mean_total_cost, pinned.noop_mean_cost));
    assert!(close(random.baseline.mean_total_cost, pinned.random_mean_cost));
}
