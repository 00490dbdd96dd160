use aiopt_core::agent::{
    apply_feedback, greedy_action, q_update, recommend, train, AgentConfig, Decision,
    FeedbackEvent, QTable, RecommendationBook, RewardWeights,
};
use aiopt_core::model::{DiscreteState, TargetsConfig, NUM_ACTIONS, NUM_STATES};
use aiopt_core::simenv::{reset, EnvConfig};
use proptest::prelude::*;

fn row() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, NUM_ACTIONS)
}

fn table_with_row(state: usize, values: &[f64]) -> QTable {
    let mut q = QTable::new();
    for (a, v) in values.iter().enumerate() {
        q.set(state, a, *v).unwrap();
    }
    q
}

proptest! {
    #[test]
    fn q_update_changes_exactly_one_entry(
        s in 0..NUM_STATES, a in 0..NUM_ACTIONS, s2 in 0..NUM_STATES, r in -10.0f64..10.0, values in row()
    ) {
        let mut q = table_with_row(s2, &values);
        let before = q.clone();
        q_update(&mut q, s, a, r, s2, &AgentConfig::default()).unwrap();
        let changed = before.values().iter().zip(q.values()).filter(|(x, y)| x != y).count();
        prop_assert!(changed <= 1);
        for i in 0..NUM_STATES * NUM_ACTIONS {
            if i != s * NUM_ACTIONS + a {
                prop_assert_eq!(before.values()[i], q.values()[i]);
                prop_assert_eq!(before.visit_counts()[i], q.visit_counts()[i]);
            }
        }
        prop_assert_eq!(q.visits(s, a).unwrap(), 1);
    }

    #[test]
    fn argmax_survives_positive_affine_maps(values in row(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let mapped: Vec<f64> = values.iter().map(|v| v * scale + shift).collect();
        prop_assert_eq!(
            greedy_action(&table_with_row(0, &values), 0).unwrap(),
            greedy_action(&table_with_row(0, &mapped), 0).unwrap()
        );
    }

    #[test]
    fn feedback_moves_values_in_the_decided_direction(values in row(), index in 0..NUM_STATES, accept in any::<bool>()) {
        // γ = 0 isolates the sign of the synthetic reward.
        let config = AgentConfig { discount: 0.0, ..AgentConfig::default() };
        let state = DiscreteState::from_index(index).unwrap();
        let mut q = table_with_row(index, &values);
        let recs = recommend(&q, &state, &reset(&EnvConfig::default()), 1, &EnvConfig::default(), 4).unwrap();
        let mut book = RecommendationBook::default();
        book.issue(&recs);
        let before = recs[0].q_value;
        let decision = if accept { Decision::Accept } else { Decision::Reject };
        let event = FeedbackEvent { recommendation_id: recs[0].id.clone(), decision, timestamp: 1 };
        let after = apply_feedback(&mut q, &event, &mut book, &config).unwrap();
        // With γ = 0 the value moves toward ±feedback_reward.
        let target = if accept { config.feedback_reward } else { -config.feedback_reward };
        prop_assert!((after - before) * (target - before) >= 0.0);
        prop_assert!((after - target).abs() <= (before - target).abs());
        if accept && before < target {
            prop_assert!(after > before);
        }
        if !accept && before > target {
            prop_assert!(after < before);
        }
        prop_assert!(apply_feedback(&mut q, &event, &mut book, &config).is_err());
    }

    #[test]
    fn recommendations_are_a_prefix_of_the_full_ranking(values in row(), k in 1usize..=NUM_ACTIONS) {
        let state = DiscreteState::from_index(42).unwrap();
        let q = table_with_row(42, &values);
        let env = EnvConfig::default();
        let start = reset(&env);
        let all = recommend(&q, &state, &start, NUM_ACTIONS, &env, 6).unwrap();
        let top = recommend(&q, &state, &start, k, &env, 6).unwrap();
        prop_assert_eq!(top.len(), k);
        for (a, b) in top.iter().zip(&all) {
            prop_assert_eq!(a.action, b.action);
            prop_assert_eq!(a.rank, b.rank);
            prop_assert_eq!(a.roi, b.roi);
        }
        for w in all.windows(2) {
            prop_assert!(w[0].q_value >= w[1].q_value);
        }
    }
}

#[test]
fn q_values_stay_within_the_clipped_bound() {
    for seed in 0..3 {
        let agent = AgentConfig { episodes: 60, rng_seed: seed, reward_clip: 0.5, ..AgentConfig::default() };
        let (q, _) = train(&EnvConfig::default(), &TargetsConfig::default(), &agent, &RewardWeights::default()).unwrap();
        let bound = agent.q_bound();
        assert!(q.values().iter().all(|v| v.is_finite() && v.abs() <= bound + 1e-12));
    }
}
