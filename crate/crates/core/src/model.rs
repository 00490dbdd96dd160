//! Shared domain types, metric ingestion and the discrete state space.
//!
//! Raw telemetry arrives as [`MetricSample`] records (JSON-Lines or CSV).
//! Samples falling into one step window are folded into a [`SystemSnapshot`],
//! which [`discretize`] maps onto one of the 270 [`DiscreteState`]s the agent
//! learns over.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("validation failure: {0}")]
    ValidationFailure(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("incomplete window: missing {0}")]
    IncompleteWindow(&'static str),
    #[error("state index {0} out of range")]
    StateIndexOutOfRange(usize),
}

/// Metric names accepted on the ingestion path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    LatencyMs,
    ThroughputRps,
    CpuUtil,
    CostInfra,
    CostLicense,
    CostMaintenance,
    CostOps,
}

impl MetricName {
    pub const ALL: [MetricName; 7] = [
        MetricName::LatencyMs,
        MetricName::ThroughputRps,
        MetricName::CpuUtil,
        MetricName::CostInfra,
        MetricName::CostLicense,
        MetricName::CostMaintenance,
        MetricName::CostOps,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::LatencyMs => "latency_ms",
            MetricName::ThroughputRps => "throughput_rps",
            MetricName::CpuUtil => "cpu_util",
            MetricName::CostInfra => "cost_infra",
            MetricName::CostLicense => "cost_license",
            MetricName::CostMaintenance => "cost_maintenance",
            MetricName::CostOps => "cost_ops",
        }
    }

    pub fn is_cost(self) -> bool {
        matches!(
            self,
            MetricName::CostInfra
                | MetricName::CostLicense
                | MetricName::CostMaintenance
                | MetricName::CostOps
        )
    }

    /// Checks the range invariant of a value for this metric.
    pub fn validate(self, value: f64) -> Result<(), ModelError> {
        if !value.is_finite() {
            return Err(ModelError::ValidationFailure(format!(
                "{self}: value {value} is not finite"
            )));
        }
        match self {
            MetricName::CpuUtil if !(0.0..=1.0).contains(&value) => Err(
                ModelError::ValidationFailure(format!("cpu_util {value} outside [0, 1]")),
            ),
            _ if value < 0.0 => Err(ModelError::ValidationFailure(format!(
                "{self} {value} is negative"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ModelError::UnknownMetric(s.to_string()))
    }
}

/// One observed telemetry record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    /// Epoch milliseconds, UTC.
    #[serde(rename = "ts")]
    pub timestamp: i64,
    pub source: String,
    pub metric: MetricName,
    pub value: f64,
    pub unit: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    ts: i64,
    source: String,
    metric: String,
    value: f64,
    unit: String,
}

impl MetricSample {
    pub fn new(
        timestamp: i64,
        source: impl Into<String>,
        metric: MetricName,
        value: f64,
        unit: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let sample = MetricSample {
            timestamp,
            source: source.into(),
            metric,
            value,
            unit: unit.into(),
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.timestamp <= 0 {
            return Err(ModelError::ValidationFailure(format!(
                "timestamp {} must be positive",
                self.timestamp
            )));
        }
        self.metric.validate(self.value)
    }

    /// Serializes to one JSON-Lines record (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metric samples always serialize")
    }

    fn from_raw(raw: RawRecord) -> Result<Self, ModelError> {
        let metric = raw.metric.parse()?;
        MetricSample::new(raw.ts, raw.source, metric, raw.value, raw.unit)
    }
}

/// Parses and validates one JSON-Lines metric record.
pub fn parse_metric_line(line: &str) -> Result<MetricSample, ModelError> {
    let raw: RawRecord = serde_json::from_str(line.trim())
        .map_err(|e| ModelError::MalformedRecord(e.to_string()))?;
    MetricSample::from_raw(raw)
}

/// Validates an already-decoded JSON value as a metric record.
pub fn parse_metric_value(value: serde_json::Value) -> Result<MetricSample, ModelError> {
    let raw: RawRecord =
        serde_json::from_value(value).map_err(|e| ModelError::MalformedRecord(e.to_string()))?;
    MetricSample::from_raw(raw)
}

/// Result of reading a whole metrics file: accepted samples plus per-line rejections.
#[derive(Debug, Default, Clone, PartialEq, Serialize)]
pub struct IngestOutcome {
    pub samples: Vec<MetricSample>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    /// 1-based line number for files, 0-based index for JSON arrays.
    pub position: usize,
    pub reason: String,
}

/// Reads JSON-Lines text. Blank lines are skipped.
pub fn read_json_lines(text: &str) -> IngestOutcome {
    let mut out = IngestOutcome::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_metric_line(line) {
            Ok(s) => out.samples.push(s),
            Err(e) => out.rejected.push(Rejection {
                position: i + 1,
                reason: e.to_string(),
            }),
        }
    }
    out
}

pub const CSV_HEADER: [&str; 5] = ["ts", "source", "metric", "value", "unit"];

/// Reads CSV with the header `ts,source,metric,value,unit`.
pub fn read_csv(text: &str) -> Result<IngestOutcome, ModelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| ModelError::MalformedRecord(e.to_string()))?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(ModelError::MalformedRecord(format!(
            "expected CSV header `{}`",
            CSV_HEADER.join(",")
        )));
    }
    let mut out = IngestOutcome::default();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let parsed = record
            .map_err(|e| ModelError::MalformedRecord(e.to_string()))
            .and_then(|r| {
                let field = |k: usize| r.get(k).unwrap_or_default();
                let ts = field(0)
                    .parse::<i64>()
                    .map_err(|e| ModelError::MalformedRecord(format!("ts: {e}")))?;
                let value = field(3)
                    .parse::<f64>()
                    .map_err(|e| ModelError::MalformedRecord(format!("value: {e}")))?;
                MetricSample::from_raw(RawRecord {
                    ts,
                    source: field(1).to_string(),
                    metric: field(2).to_string(),
                    value,
                    unit: field(4).to_string(),
                })
            });
        match parsed {
            Ok(s) => out.samples.push(s),
            Err(e) => out.rejected.push(Rejection {
                position: line,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Aggregated whole-system view for one step window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSnapshot {
    pub cpu_util: f64,
    pub latency_ms: f64,
    pub throughput_rps: f64,
    pub total_cost: f64,
    pub cache_enabled: bool,
    pub replicas: u32,
}

impl SystemSnapshot {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("cpu_util", self.cpu_util),
            ("latency_ms", self.latency_ms),
            ("throughput_rps", self.throughput_rps),
            ("total_cost", self.total_cost),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::ValidationFailure(format!("{name} = {v}")));
            }
        }
        if self.cpu_util > 1.0 {
            return Err(ModelError::ValidationFailure(format!(
                "cpu_util = {}",
                self.cpu_util
            )));
        }
        if self.replicas < 1 {
            return Err(ModelError::ValidationFailure("replicas must be >= 1".into()));
        }
        Ok(())
    }
}

/// Cost components of one step, in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub infrastructure: f64,
    pub licensing: f64,
    pub maintenance: f64,
    pub operational: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(infrastructure: f64, licensing: f64, maintenance: f64, operational: f64) -> Self {
        CostBreakdown {
            infrastructure,
            licensing,
            maintenance,
            operational,
            total: infrastructure + licensing + maintenance + operational,
        }
    }
}

/// Deployment facts that are not carried by telemetry but are part of the snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Deployment {
    pub replicas: u32,
    pub cache_enabled: bool,
    pub code_optimized: bool,
}

impl Default for Deployment {
    fn default() -> Self {
        Deployment {
            replicas: 2,
            cache_enabled: false,
            code_optimized: false,
        }
    }
}

/// Objectives a state is judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetsConfig {
    pub slo_latency_ms: f64,
    pub cost_budget: f64,
}

impl Default for TargetsConfig {
    fn default() -> Self {
        TargetsConfig {
            slo_latency_ms: 250.0,
            cost_budget: 30.0,
        }
    }
}

impl TargetsConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.slo_latency_ms > 0.0 && self.slo_latency_ms.is_finite()) {
            return Err(ModelError::ValidationFailure(
                "slo_latency_ms must be > 0".into(),
            ));
        }
        if !(self.cost_budget > 0.0 && self.cost_budget.is_finite()) {
            return Err(ModelError::ValidationFailure("cost_budget must be > 0".into()));
        }
        Ok(())
    }
}

// Summation over sorted values keeps the result independent of sample order.
fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Folds one window of samples into a snapshot plus its cost components.
///
/// Latency, utilization and throughput are averaged; every cost metric takes
/// its latest sample (ties broken by the larger value).
pub fn aggregate_window(
    samples: &[MetricSample],
    deployment: &Deployment,
) -> Result<(SystemSnapshot, CostBreakdown), ModelError> {
    let values = |m: MetricName| -> Vec<f64> {
        samples
            .iter()
            .filter(|s| s.metric == m)
            .map(|s| s.value)
            .collect()
    };
    let latest = |m: MetricName| -> Option<f64> {
        samples
            .iter()
            .filter(|s| s.metric == m)
            .max_by(|a, b| {
                a.timestamp
                    .cmp(&b.timestamp)
                    .then(a.value.total_cmp(&b.value))
            })
            .map(|s| s.value)
    };

    let mut latency = values(MetricName::LatencyMs);
    let mut cpu = values(MetricName::CpuUtil);
    let mut throughput = values(MetricName::ThroughputRps);
    if latency.is_empty() {
        return Err(ModelError::IncompleteWindow("latency_ms"));
    }
    if cpu.is_empty() {
        return Err(ModelError::IncompleteWindow("cpu_util"));
    }
    let costs = [
        MetricName::CostInfra,
        MetricName::CostLicense,
        MetricName::CostMaintenance,
        MetricName::CostOps,
    ]
    .map(latest);
    if costs.iter().all(Option::is_none) {
        return Err(ModelError::IncompleteWindow("cost_*"));
    }
    let [infra, license, maint, ops] = costs.map(|c| c.unwrap_or(0.0));
    let cost = CostBreakdown::new(infra, license, maint, ops);

    let snapshot = SystemSnapshot {
        cpu_util: order_free_mean(&mut cpu),
        latency_ms: order_free_mean(&mut latency),
        throughput_rps: if throughput.is_empty() {
            0.0
        } else {
            order_free_mean(&mut throughput)
        },
        total_cost: cost.total,
        cache_enabled: deployment.cache_enabled,
        replicas: deployment.replicas.max(1),
    };
    Ok((snapshot, cost))
}

/// Snapshot-only view of [`aggregate_window`].
pub fn aggregate_snapshot(
    samples: &[MetricSample],
    deployment: &Deployment,
) -> Result<SystemSnapshot, ModelError> {
    aggregate_window(samples, deployment).map(|(s, _)| s)
}

/// One aggregated step window taken from ingested telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Start of the window, epoch ms.
    pub ts: i64,
    pub snapshot: SystemSnapshot,
    pub cost: CostBreakdown,
}

/// Buckets samples into fixed windows of `window_ms` and aggregates each.
///
/// Windows that lack a required metric family are skipped and counted.
pub fn aggregate_windows(
    samples: &[MetricSample],
    window_ms: i64,
    deployment: &Deployment,
) -> (Vec<Observation>, usize) {
    let window_ms = window_ms.max(1);
    let mut sorted: Vec<&MetricSample> = samples.iter().collect();
    sorted.sort_by_key(|s| s.timestamp);
    let mut out = Vec::new();
    let mut skipped = 0;
    for chunk in sorted.chunk_by(|a, b| a.timestamp / window_ms == b.timestamp / window_ms) {
        let owned: Vec<MetricSample> = chunk.iter().map(|s| (*s).clone()).collect();
        match aggregate_window(&owned, deployment) {
            Ok((snapshot, cost)) => out.push(Observation {
                ts: (chunk[0].timestamp / window_ms) * window_ms,
                snapshot,
                cost,
            }),
            Err(_) => skipped += 1,
        }
    }
    (out, skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LatencyLevel {
    BelowHalfSlo,
    WithinSlo,
    BreachingSlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CostLevel {
    BelowHalfBudget,
    WithinBudget,
    OverBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReplicaBucket {
    One,
    TwoToThree,
    FourPlus,
}

impl ReplicaBucket {
    pub fn of(replicas: u32) -> Self {
        match replicas {
            0 | 1 => ReplicaBucket::One,
            2 | 3 => ReplicaBucket::TwoToThree,
            _ => ReplicaBucket::FourPlus,
        }
    }
}

/// The agent's observation of the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteState {
    pub util_bucket: u8,
    pub latency_level: LatencyLevel,
    pub cost_level: CostLevel,
    pub cache_enabled: bool,
    pub replica_bucket: ReplicaBucket,
}

pub const UTIL_BUCKETS: usize = 5;
pub const NUM_STATES: usize = 270;

const LATENCY_LEVELS: [LatencyLevel; 3] = [
    LatencyLevel::BelowHalfSlo,
    LatencyLevel::WithinSlo,
    LatencyLevel::BreachingSlo,
];
const COST_LEVELS: [CostLevel; 3] = [
    CostLevel::BelowHalfBudget,
    CostLevel::WithinBudget,
    CostLevel::OverBudget,
];
const REPLICA_BUCKETS: [ReplicaBucket; 3] = [
    ReplicaBucket::One,
    ReplicaBucket::TwoToThree,
    ReplicaBucket::FourPlus,
];

impl DiscreteState {
    /// Dense mixed-radix index, `util_bucket` most significant.
    pub fn index(&self) -> usize {
        let mut idx = self.util_bucket as usize;
        idx = idx * 3 + self.latency_level as usize;
        idx = idx * 3 + self.cost_level as usize;
        idx = idx * 2 + self.cache_enabled as usize;
        idx * 3 + self.replica_bucket as usize
    }

    pub fn from_index(index: usize) -> Result<Self, ModelError> {
        if index >= NUM_STATES {
            return Err(ModelError::StateIndexOutOfRange(index));
        }
        let replica = index % 3;
        let rest = index / 3;
        let cache = rest % 2;
        let rest = rest / 2;
        let cost = rest % 3;
        let rest = rest / 3;
        let latency = rest % 3;
        let util = rest / 3;
        Ok(DiscreteState {
            util_bucket: util as u8,
            latency_level: LATENCY_LEVELS[latency],
            cost_level: COST_LEVELS[cost],
            cache_enabled: cache == 1,
            replica_bucket: REPLICA_BUCKETS[replica],
        })
    }

    pub fn all() -> impl Iterator<Item = DiscreteState> {
        (0..NUM_STATES).map(|i| DiscreteState::from_index(i).expect("index in range"))
    }
}

/// Dense index of a state in `[0, 269]`.
pub fn state_index(state: &DiscreteState) -> usize {
    state.index()
}

/// Maps a continuous snapshot to its discrete state.
pub fn discretize(snapshot: &SystemSnapshot, targets: &TargetsConfig) -> DiscreteState {
    let util_bucket = ((snapshot.cpu_util * UTIL_BUCKETS as f64).floor() as i64)
        .clamp(0, UTIL_BUCKETS as i64 - 1) as u8;
    let slo = targets.slo_latency_ms;
    let latency_level = if snapshot.latency_ms < 0.5 * slo {
        LatencyLevel::BelowHalfSlo
    } else if snapshot.latency_ms <= slo {
        LatencyLevel::WithinSlo
    } else {
        LatencyLevel::BreachingSlo
    };
    let budget = targets.cost_budget;
    let cost_level = if snapshot.total_cost < 0.5 * budget {
        CostLevel::BelowHalfBudget
    } else if snapshot.total_cost <= budget {
        CostLevel::WithinBudget
    } else {
        CostLevel::OverBudget
    };
    DiscreteState {
        util_bucket,
        latency_level,
        cost_level,
        cache_enabled: snapshot.cache_enabled,
        replica_bucket: ReplicaBucket::of(snapshot.replicas),
    }
}

/// Cost-reduction actions. Ordinals are fixed and used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    ScaleUpReplicas = 0,
    ScaleDownReplicas = 1,
    EnableCache = 2,
    DisableCache = 3,
    RebalanceWorkload = 4,
    OptimizeCode = 5,
    NoOp = 6,
}

pub const NUM_ACTIONS: usize = 7;

impl ActionKind {
    pub const ALL: [ActionKind; NUM_ACTIONS] = [
        ActionKind::ScaleUpReplicas,
        ActionKind::ScaleDownReplicas,
        ActionKind::EnableCache,
        ActionKind::DisableCache,
        ActionKind::RebalanceWorkload,
        ActionKind::OptimizeCode,
        ActionKind::NoOp,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Self> {
        Self::ALL.get(ordinal).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::ScaleUpReplicas => "scale_up_replicas",
            ActionKind::ScaleDownReplicas => "scale_down_replicas",
            ActionKind::EnableCache => "enable_cache",
            ActionKind::DisableCache => "disable_cache",
            ActionKind::RebalanceWorkload => "rebalance_workload",
            ActionKind::OptimizeCode => "optimize_code",
            ActionKind::NoOp => "no_op",
        }
    }

    /// Actions that carry an effort penalty in the reward.
    pub fn requires_effort(self) -> bool {
        matches!(self, ActionKind::OptimizeCode | ActionKind::RebalanceWorkload)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(ts: i64, metric: MetricName, value: f64) -> MetricSample {
        MetricSample::new(ts, "web", metric, value, "x").unwrap()
    }

    #[test]
    fn parses_latency_record() {
        let s = parse_metric_line(
            r#"{"ts":1700000000000,"source":"web","metric":"latency_ms","value":150.0,"unit":"ms"}"#,
        )
        .unwrap();
        assert_eq!(s.timestamp, 1_700_000_000_000);
        assert_eq!(s.source, "web");
        assert_eq!(s.metric, MetricName::LatencyMs);
        assert_eq!(s.value, 150.0);
        assert_eq!(s.unit, "ms");
    }

    #[test]
    fn rejects_out_of_range_cpu() {
        let err = parse_metric_line(
            r#"{"ts":1700000000000,"source":"web","metric":"cpu_util","value":1.5,"unit":"fraction"}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::ValidationFailure(_)));
    }

    #[test]
    fn rejects_garbage_and_unknown_metric() {
        assert!(matches!(
            parse_metric_line("not json"),
            Err(ModelError::MalformedRecord(_))
        ));
        assert!(matches!(
            parse_metric_line(r#"{"ts":1,"source":"a","metric":"disk_io","value":1,"unit":"x"}"#),
            Err(ModelError::UnknownMetric(m)) if m == "disk_io"
        ));
        assert!(matches!(
            parse_metric_line(r#"{"ts":1,"source":"a","metric":"latency_ms","value":-3,"unit":"ms"}"#),
            Err(ModelError::ValidationFailure(_))
        ));
        assert!(matches!(
            parse_metric_line(r#"{"ts":0,"source":"a","metric":"latency_ms","value":3,"unit":"ms"}"#),
            Err(ModelError::ValidationFailure(_))
        ));
    }

    #[test]
    fn csv_reader_checks_header_and_rows() {
        let text = "ts,source,metric,value,unit\n5,web,latency_ms,12.5,ms\n6,web,cpu_util,NaN,fraction\n";
        let out = read_csv(text).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].position, 3);
        assert!(read_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn aggregates_means_and_cost_sum() {
        let samples = vec![
            sample(1, MetricName::LatencyMs, 100.0),
            sample(2, MetricName::LatencyMs, 200.0),
            sample(1, MetricName::CpuUtil, 0.4),
            sample(2, MetricName::CpuUtil, 0.6),
            sample(1, MetricName::CostInfra, 20.0),
            sample(1, MetricName::CostOps, 5.0),
        ];
        let snap = aggregate_snapshot(&samples, &Deployment::default()).unwrap();
        assert_eq!(snap.latency_ms, 150.0);
        assert_eq!(snap.cpu_util, 0.5);
        assert_eq!(snap.total_cost, 25.0);
        assert_eq!(snap.throughput_rps, 0.0);
    }

    #[test]
    fn single_sample_window_is_identity() {
        let samples = vec![
            sample(1, MetricName::LatencyMs, 120.0),
            sample(1, MetricName::CpuUtil, 0.3),
            sample(1, MetricName::ThroughputRps, 40.0),
            sample(1, MetricName::CostInfra, 26.0),
        ];
        let snap = aggregate_snapshot(&samples, &Deployment::default()).unwrap();
        assert_eq!(snap.latency_ms, 120.0);
        assert_eq!(snap.cpu_util, 0.3);
        assert_eq!(snap.throughput_rps, 40.0);
        assert_eq!(snap.total_cost, 26.0);
    }

    #[test]
    fn latest_cost_sample_wins() {
        let samples = vec![
            sample(1, MetricName::LatencyMs, 100.0),
            sample(1, MetricName::CpuUtil, 0.4),
            sample(1, MetricName::CostInfra, 20.0),
            sample(3, MetricName::CostInfra, 30.0),
            sample(2, MetricName::CostInfra, 40.0),
        ];
        let snap = aggregate_snapshot(&samples, &Deployment::default()).unwrap();
        assert_eq!(snap.total_cost, 30.0);
    }

    #[test]
    fn missing_cost_family_is_incomplete() {
        let samples = vec![
            sample(1, MetricName::LatencyMs, 100.0),
            sample(1, MetricName::CpuUtil, 0.4),
        ];
        assert_eq!(
            aggregate_snapshot(&samples, &Deployment::default()),
            Err(ModelError::IncompleteWindow("cost_*"))
        );
    }

    #[test]
    fn windows_are_bucketed_and_incomplete_ones_skipped() {
        let samples = vec![
            sample(1_000, MetricName::LatencyMs, 100.0),
            sample(1_500, MetricName::CpuUtil, 0.4),
            sample(1_900, MetricName::CostInfra, 20.0),
            sample(2_100, MetricName::LatencyMs, 100.0),
        ];
        let (obs, skipped) = aggregate_windows(&samples, 1_000, &Deployment::default());
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].ts, 1_000);
        assert_eq!(skipped, 1);
    }

    fn snap(cpu: f64, latency: f64, cost: f64, cache: bool, replicas: u32) -> SystemSnapshot {
        SystemSnapshot {
            cpu_util: cpu,
            latency_ms: latency,
            throughput_rps: 0.0,
            total_cost: cost,
            cache_enabled: cache,
            replicas,
        }
    }

    #[test]
    fn discretize_examples() {
        let targets = TargetsConfig {
            slo_latency_ms: 200.0,
            cost_budget: 100.0,
        };
        let s = discretize(&snap(0.37, 150.0, 80.0, true, 2), &targets);
        assert_eq!(
            s,
            DiscreteState {
                util_bucket: 1,
                latency_level: LatencyLevel::WithinSlo,
                cost_level: CostLevel::WithinBudget,
                cache_enabled: true,
                replica_bucket: ReplicaBucket::TwoToThree,
            }
        );
        assert_eq!(discretize(&snap(1.0, 1.0, 1.0, false, 1), &targets).util_bucket, 4);
        assert_eq!(
            discretize(&snap(0.1, 99.999, 1.0, false, 1), &targets).latency_level,
            LatencyLevel::BelowHalfSlo
        );
        assert_eq!(
            discretize(&snap(0.1, 100.0, 1.0, false, 1), &targets).latency_level,
            LatencyLevel::WithinSlo
        );
        assert_eq!(
            discretize(&snap(0.1, 200.0, 100.0, false, 1), &targets).cost_level,
            CostLevel::WithinBudget
        );
        assert_eq!(
            discretize(&snap(0.1, 200.1, 100.1, false, 4), &targets),
            DiscreteState {
                util_bucket: 0,
                latency_level: LatencyLevel::BreachingSlo,
                cost_level: CostLevel::OverBudget,
                cache_enabled: false,
                replica_bucket: ReplicaBucket::FourPlus,
            }
        );
    }

    #[test]
    fn index_extremes() {
        let min = DiscreteState {
            util_bucket: 0,
            latency_level: LatencyLevel::BelowHalfSlo,
            cost_level: CostLevel::BelowHalfBudget,
            cache_enabled: false,
            replica_bucket: ReplicaBucket::One,
        };
        let max = DiscreteState {
            util_bucket: 4,
            latency_level: LatencyLevel::BreachingSlo,
            cost_level: CostLevel::OverBudget,
            cache_enabled: true,
            replica_bucket: ReplicaBucket::FourPlus,
        };
        assert_eq!(state_index(&min), 0);
        assert_eq!(state_index(&max), 269);
        assert!(DiscreteState::from_index(270).is_err());
    }

    // Independent enumeration: nested loops in field order must visit 0..270 in order.
    #[test]
    fn index_matches_nested_enumeration() {
        let mut expected = 0usize;
        let mut seen = std::collections::HashSet::new();
        for util in 0..5u8 {
            for lat in LATENCY_LEVELS {
                for cost in COST_LEVELS {
                    for cache in [false, true] {
                        for rep in REPLICA_BUCKETS {
                            let s = DiscreteState {
                                util_bucket: util,
                                latency_level: lat,
                                cost_level: cost,
                                cache_enabled: cache,
                                replica_bucket: rep,
                            };
                            assert_eq!(s.index(), expected);
                            assert_eq!(DiscreteState::from_index(expected).unwrap(), s);
                            assert!(seen.insert(s));
                            expected += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(expected, NUM_STATES);
    }

    #[test]
    fn action_names_round_trip() {
        for (i, a) in ActionKind::ALL.into_iter().enumerate() {
            assert_eq!(a.ordinal(), i);
            assert_eq!(a.as_str().parse::<ActionKind>().unwrap(), a);
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                format!("\"{}\"", a.as_str())
            );
        }
        assert!("maybe".parse::<ActionKind>().is_err());
    }
}
