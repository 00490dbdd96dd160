use aiopt_core::exec::ExecMode;
use aiopt_core::fixtures::{spike_stream, FIXTURE_TICK_MS};
use aiopt_core::flawdet::{
    apply_rules, detect, detect_with, percentile_nearest_rank, zscore_anomaly, Comparator,
    DetectorConfig, FlawRule, Severity, ZSCORE_DETECTOR,
};
use aiopt_core::model::{MetricName, MetricSample};
use proptest::prelude::*;

fn window() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 2..60)
}

proptest! {
    #[test]
    fn zscore_is_invariant_under_positive_affine_maps(
        w in window(), c in -2e3f64..2e3, scale in 0.01f64..100.0, shift in -1e3f64..1e3
    ) {
        let mapped: Vec<f64> = w.iter().map(|x| x * scale + shift).collect();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sd = (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        // Skip candidates within rounding distance of the threshold.
        prop_assume!(sd > 1e-6 && ((c - mean).abs() / sd - 3.0).abs() > 1e-6);
        prop_assert_eq!(
            zscore_anomaly(&w, c, 3.0).unwrap(),
            zscore_anomaly(&mapped, c * scale + shift, 3.0).unwrap()
        );
    }

    #[test]
    fn percentile_is_a_window_element(w in prop::collection::vec(-1e3f64..1e3, 1..60), p in 0.001f64..=100.0) {
        let v = percentile_nearest_rank(&w, p).unwrap();
        prop_assert!(w.contains(&v));
        // At least ceil(p n / 100) elements are <= v.
        let rank = ((p / 100.0) * w.len() as f64).ceil() as usize;
        prop_assert!(w.iter().filter(|x| **x <= v).count() >= rank.max(1));
    }

    #[test]
    fn rule_runs_match_a_brute_force_count(
        values in prop::collection::vec(0.0f64..10.0, 1..80), bound in 0.0f64..10.0, k in 1usize..5
    ) {
        let stream: Vec<MetricSample> = values.iter().enumerate()
            .map(|(i, v)| MetricSample::new(1 + i as i64, "web", MetricName::LatencyMs, *v, "ms").unwrap())
            .collect();
        let rule = FlawRule {
            id: "hot".into(), metric: MetricName::LatencyMs, comparator: Comparator::Gt,
            bound, consecutive: k, severity: Severity::Medium, suggested_action: None,
        };
        let flaws = apply_rules(&stream, &[rule]).unwrap();
        let mut runs = 0;
        let mut len = 0;
        for v in values.iter().chain(std::iter::once(&f64::NEG_INFINITY)) {
            if *v > bound { len += 1 } else { if len >= k { runs += 1 } len = 0 }
        }
        prop_assert_eq!(flaws.len(), runs);
        for f in &flaws {
            prop_assert!(f.last_ts - f.first_ts + 1 >= k as i64);
        }
    }
}

#[test]
fn injected_spikes_are_found_exactly() {
    let fixture = spike_stream(11, 1200, 5, 150, 10.0);
    assert_eq!(fixture.spike_timestamps.len(), 5);
    let config = DetectorConfig::default();
    let flaws = detect(&fixture.samples, &config, &[]).unwrap();
    let found: Vec<i64> = flaws
        .iter()
        .filter(|f| f.rule_or_detector == ZSCORE_DETECTOR && f.metric == MetricName::LatencyMs)
        .map(|f| f.first_ts)
        .collect();
    let true_positives = found.iter().filter(|t| fixture.spike_timestamps.contains(t)).count();
    let precision = true_positives as f64 / found.len() as f64;
    let recall = true_positives as f64 / fixture.spike_timestamps.len() as f64;
    assert_eq!(precision, 1.0, "found {found:?}");
    assert_eq!(recall, 1.0);
    assert!(fixture.spike_timestamps.windows(2).all(|w| w[1] - w[0] == 150 * FIXTURE_TICK_MS));
}

#[test]
fn detection_is_identical_in_both_modes() {
    let fixture = spike_stream(3, 600, 3, 150, 10.0);
    let config = DetectorConfig {
        percentile_trigger: true,
        ..DetectorConfig::default()
    };
    let a = detect_with(&fixture.samples, &config, &[], ExecMode::Sequential).unwrap();
    let b = detect_with(&fixture.samples, &config, &[], ExecMode::Parallel).unwrap();
    assert_eq!(a, b);
}
