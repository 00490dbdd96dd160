//! Deterministic synthetic telemetry with known injected anomalies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::{MetricName, MetricSample};

pub const FIXTURE_START_TS: i64 = 1_700_000_000_000;
pub const FIXTURE_TICK_MS: i64 = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeFixture {
    /// Time-ordered samples for every metric family, one tick per second.
    pub samples: Vec<MetricSample>,
    /// Timestamps of the injected latency spikes.
    pub spike_timestamps: Vec<i64>,
    pub latency_mean: f64,
    pub latency_sd: f64,
}

/// Builds `ticks` seconds of telemetry with `spikes` latency spikes of
/// `spike_sigmas` noise standard deviations.
///
/// Latency noise is N(100, 5) clipped to +/- 2 sd so that, apart from the
/// spikes, no sample can reach |z| >= 3 against a full trailing window.
/// Spikes start after `spacing` ticks and are `spacing` ticks apart.
pub fn spike_stream(seed: u64, ticks: usize, spikes: usize, spacing: usize, spike_sigmas: f64) -> SpikeFixture {
    let mean = 100.0;
    let sd = 5.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let spike_ticks: Vec<usize> = (1..=spikes).map(|i| i * spacing).filter(|t| *t < ticks).collect();
    let mut samples = Vec::with_capacity(ticks * 7);
    let mut spike_timestamps = Vec::new();
    for tick in 0..ticks {
        let ts = FIXTURE_START_TS + tick as i64 * FIXTURE_TICK_MS;
        let mut noise = || f64::clamp(unit.sample(&mut rng), -2.0, 2.0);
        let mut latency = mean + sd * noise();
        if spike_ticks.contains(&tick) {
            latency = mean + spike_sigmas * sd;
            spike_timestamps.push(ts);
        }
        let cpu = 0.5 + 0.05 * noise();
        let throughput = 30.0 + 1.0 * noise();
        let rows = [
            (MetricName::LatencyMs, latency, "ms"),
            (MetricName::CpuUtil, cpu, "fraction"),
            (MetricName::ThroughputRps, throughput, "rps"),
            (MetricName::CostInfra, 20.0, "currency-per-step"),
            (MetricName::CostLicense, 2.0, "currency-per-step"),
            (MetricName::CostMaintenance, 1.0, "currency-per-step"),
            (MetricName::CostOps, 3.0, "currency-per-step"),
        ];
        for (metric, value, unit) in rows {
            samples.push(MetricSample::new(ts, "web", metric, value, unit).expect("fixture values are valid"));
        }
    }
    SpikeFixture {
        samples,
        spike_timestamps,
        latency_mean: mean,
        latency_sd: sd,
    }
}

/// The fixture as JSON-Lines text.
pub fn to_json_lines(samples: &[MetricSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&s.to_json_line());
        out.push('\n');
    }
    out
}
