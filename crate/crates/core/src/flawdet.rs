//! Statistical and rule-based flaw detection over metric streams.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, ExecMode};
use crate::model::{ActionKind, MetricName, MetricSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlawError {
    #[error("window needs at least 2 values, got {0}")]
    WindowTooSmall(usize),
    #[error("window is empty")]
    EmptyWindow,
    #[error("percentile {0} outside (0, 100]")]
    PercentileOutOfRange(f64),
    #[error("stream is not sorted by timestamp at position {0}")]
    UnsortedStream(usize),
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid rule set: {0}")]
    InvalidRules(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub window_size: usize,
    pub z_threshold: f64,
    pub percentile: f64,
    /// When set, a sample above the trailing window's percentile is also a flaw.
    pub percentile_trigger: bool,
    pub static_bounds: BTreeMap<MetricName, Bounds>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window_size: 100,
            z_threshold: 3.0,
            percentile: 99.0,
            percentile_trigger: false,
            static_bounds: BTreeMap::new(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), FlawError> {
        if self.window_size < 2 {
            return Err(FlawError::InvalidConfig("window_size must be >= 2".into()));
        }
        if !(self.z_threshold > 0.0) {
            return Err(FlawError::InvalidConfig("z_threshold must be > 0".into()));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(FlawError::PercentileOutOfRange(self.percentile));
        }
        for (m, b) in &self.static_bounds {
            if !(b.min <= b.max) {
                return Err(FlawError::InvalidConfig(format!("bounds for {m}: min > max")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Gt,
    Lt,
    Ge,
    Le,
}

impl Comparator {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::Gt => value > bound,
            Comparator::Lt => value < bound,
            Comparator::Ge => value >= bound,
            Comparator::Le => value <= bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlawRule {
    pub id: String,
    pub metric: MetricName,
    pub comparator: Comparator,
    pub bound: f64,
    pub consecutive: usize,
    pub severity: Severity,
    pub suggested_action: Option<ActionKind>,
}

/// Parses a rule file (JSON array of rules) and checks rule-set invariants.
pub fn parse_rules(json: &str) -> Result<Vec<FlawRule>, FlawError> {
    let rules: Vec<FlawRule> =
        serde_json::from_str(json).map_err(|e| FlawError::InvalidRules(e.to_string()))?;
    validate_rules(&rules)?;
    Ok(rules)
}

pub fn validate_rules(rules: &[FlawRule]) -> Result<(), FlawError> {
    let mut ids = std::collections::HashSet::new();
    for r in rules {
        if r.consecutive < 1 {
            return Err(FlawError::InvalidRules(format!(
                "rule {}: consecutive must be >= 1",
                r.id
            )));
        }
        if !r.bound.is_finite() {
            return Err(FlawError::InvalidRules(format!("rule {}: bound not finite", r.id)));
        }
        if !ids.insert(r.id.as_str()) {
            return Err(FlawError::InvalidRules(format!("duplicate rule id {}", r.id)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flaw {
    pub rule_or_detector: String,
    pub metric: MetricName,
    pub first_ts: i64,
    pub last_ts: i64,
    pub observed: f64,
    pub expected: String,
    pub severity: Severity,
    pub suggested_action: Option<ActionKind>,
}

fn mean_and_population_sd(window: &[f64]) -> (f64, f64) {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-score test of `candidate` against a trailing window (population σ).
///
/// A constant window flags any candidate that differs from the constant.
pub fn zscore_anomaly(window: &[f64], candidate: f64, threshold: f64) -> Result<bool, FlawError> {
    if window.len() < 2 {
        return Err(FlawError::WindowTooSmall(window.len()));
    }
    let (mean, sd) = mean_and_population_sd(window);
    if sd > 0.0 {
        Ok((candidate - mean).abs() / sd >= threshold)
    } else {
        Ok(candidate != mean)
    }
}

/// Nearest-rank percentile; the result is always an element of `window`.
pub fn percentile_nearest_rank(window: &[f64], p: f64) -> Result<f64, FlawError> {
    if window.is_empty() {
        return Err(FlawError::EmptyWindow);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(FlawError::PercentileOutOfRange(p));
    }
    let mut sorted = window.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

pub fn median(window: &[f64]) -> Option<f64> {
    if window.is_empty() {
        return None;
    }
    let mut sorted = window.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

pub const STATIC_BOUND_DETECTOR: &str = "static-bound";
pub const ZSCORE_DETECTOR: &str = "zscore";
pub const PERCENTILE_DETECTOR: &str = "percentile";

/// Inclusive static bounds check.
pub fn check_static_bounds(sample: &MetricSample, config: &DetectorConfig) -> Option<Flaw> {
    let b = config.static_bounds.get(&sample.metric)?;
    if sample.value >= b.min && sample.value <= b.max {
        return None;
    }
    Some(Flaw {
        rule_or_detector: STATIC_BOUND_DETECTOR.to_string(),
        metric: sample.metric,
        first_ts: sample.timestamp,
        last_ts: sample.timestamp,
        observed: sample.value,
        expected: format!("within [{}, {}]", b.min, b.max),
        severity: Severity::Medium,
        suggested_action: None,
    })
}

fn ensure_sorted(stream: &[MetricSample]) -> Result<(), FlawError> {
    match stream
        .windows(2)
        .position(|w| w[1].timestamp < w[0].timestamp)
    {
        Some(i) => Err(FlawError::UnsortedStream(i + 1)),
        None => Ok(()),
    }
}

fn flaw_order(a: &Flaw, b: &Flaw) -> std::cmp::Ordering {
    a.first_ts
        .cmp(&b.first_ts)
        .then_with(|| a.rule_or_detector.cmp(&b.rule_or_detector))
}

/// Evaluates run-length rules. One flaw per maximal qualifying run.
pub fn apply_rules(stream: &[MetricSample], rules: &[FlawRule]) -> Result<Vec<Flaw>, FlawError> {
    ensure_sorted(stream)?;
    let mut flaws = Vec::new();
    for rule in rules {
        let mut run: Vec<&MetricSample> = Vec::new();
        let close = |run: &mut Vec<&MetricSample>, flaws: &mut Vec<Flaw>| {
            if run.len() >= rule.consecutive {
                let worst = run
                    .iter()
                    .map(|s| s.value)
                    .max_by(|a, b| {
                        let da = (a - rule.bound).abs();
                        let db = (b - rule.bound).abs();
                        da.total_cmp(&db)
                    })
                    .unwrap_or(rule.bound);
                flaws.push(Flaw {
                    rule_or_detector: rule.id.clone(),
                    metric: rule.metric,
                    first_ts: run[0].timestamp,
                    last_ts: run[run.len() - 1].timestamp,
                    observed: worst,
                    expected: format!(
                        "not {} {} for {} consecutive samples",
                        rule.comparator.symbol(),
                        rule.bound,
                        rule.consecutive
                    ),
                    severity: rule.severity,
                    suggested_action: rule.suggested_action,
                });
            }
            run.clear();
        };
        for s in stream.iter().filter(|s| s.metric == rule.metric) {
            if rule.comparator.holds(s.value, rule.bound) {
                run.push(s);
            } else {
                close(&mut run, &mut flaws);
            }
        }
        close(&mut run, &mut flaws);
    }
    flaws.sort_by(flaw_order);
    Ok(flaws)
}

/// Runs the trailing-window detectors over one metric's time-ordered values.
///
/// Only positions with a full `window_size` history are tested.
fn scan_series(series: &[&MetricSample], config: &DetectorConfig) -> Vec<Flaw> {
    let mut flaws = Vec::new();
    let w = config.window_size;
    if series.len() <= w {
        return flaws;
    }
    let values: Vec<f64> = series.iter().map(|s| s.value).collect();
    for i in w..values.len() {
        let window = &values[i - w..i];
        let candidate = values[i];
        let s = series[i];
        if zscore_anomaly(window, candidate, config.z_threshold).unwrap_or(false) {
            let (mean, sd) = mean_and_population_sd(window);
            flaws.push(Flaw {
                rule_or_detector: ZSCORE_DETECTOR.to_string(),
                metric: s.metric,
                first_ts: s.timestamp,
                last_ts: s.timestamp,
                observed: candidate,
                expected: format!(
                    "|z| < {} (mean {:.4}, sd {:.4})",
                    config.z_threshold, mean, sd
                ),
                severity: Severity::High,
                suggested_action: None,
            });
        }
        if config.percentile_trigger {
            if let Ok(p) = percentile_nearest_rank(window, config.percentile) {
                if candidate > p {
                    flaws.push(Flaw {
                        rule_or_detector: PERCENTILE_DETECTOR.to_string(),
                        metric: s.metric,
                        first_ts: s.timestamp,
                        last_ts: s.timestamp,
                        observed: candidate,
                        expected: format!("<= p{} = {}", config.percentile, p),
                        severity: Severity::Low,
                        suggested_action: None,
                    });
                }
            }
        }
    }
    flaws
}

/// Full detection pass: static bounds, trailing-window detectors per
/// (source, metric) series, and rules. Output ordered like [`apply_rules`].
pub fn detect(
    stream: &[MetricSample],
    config: &DetectorConfig,
    rules: &[FlawRule],
) -> Result<Vec<Flaw>, FlawError> {
    detect_with(stream, config, rules, ExecMode::default())
}

pub fn detect_with(
    stream: &[MetricSample],
    config: &DetectorConfig,
    rules: &[FlawRule],
    mode: ExecMode,
) -> Result<Vec<Flaw>, FlawError> {
    config.validate()?;
    ensure_sorted(stream)?;
    let mut flaws: Vec<Flaw> = stream
        .iter()
        .filter_map(|s| check_static_bounds(s, config))
        .collect();

    let mut series: BTreeMap<(&str, MetricName), Vec<&MetricSample>> = BTreeMap::new();
    for s in stream {
        series.entry((s.source.as_str(), s.metric)).or_default().push(s);
    }
    let groups: Vec<Vec<&MetricSample>> = series.into_values().collect();
    for found in exec::map(mode, &groups, |g| scan_series(g, config)) {
        flaws.extend(found);
    }
    flaws.extend(apply_rules(stream, rules)?);
    flaws.sort_by(flaw_order);
    Ok(flaws)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlawGroup {
    pub metric: MetricName,
    pub max_severity: Severity,
    pub count: usize,
    pub flaws: Vec<Flaw>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub summary: String,
    pub groups: Vec<FlawGroup>,
}

impl DiagnosticReport {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Groups flaws by metric, worst groups first (max severity, then count).
pub fn diagnose(flaws: &[Flaw]) -> DiagnosticReport {
    let mut by_metric: BTreeMap<MetricName, Vec<Flaw>> = BTreeMap::new();
    for f in flaws {
        by_metric.entry(f.metric).or_default().push(f.clone());
    }
    let mut groups: Vec<FlawGroup> = by_metric
        .into_iter()
        .map(|(metric, flaws)| FlawGroup {
            metric,
            max_severity: flaws.iter().map(|f| f.severity).max().unwrap_or(Severity::Low),
            count: flaws.len(),
            flaws,
        })
        .collect();
    groups.sort_by(|a, b| {
        b.max_severity
            .cmp(&a.max_severity)
            .then(b.count.cmp(&a.count))
            .then(a.metric.cmp(&b.metric))
    });

    let mut summary = String::new();
    if groups.is_empty() {
        summary.push_str("No flaws detected.\n");
    }
    for g in &groups {
        summary.push_str(&format!(
            "{}: {} flaw(s), max severity {}\n",
            g.metric, g.count, g.max_severity
        ));
        for f in &g.flaws {
            summary.push_str(&format!(
                "  - [{}] {} observed {} at {}..{} (expected {})",
                f.severity, f.rule_or_detector, f.observed, f.first_ts, f.last_ts, f.expected
            ));
            if let Some(a) = f.suggested_action {
                summary.push_str(&format!("; suggested remediation: {a}"));
            }
            summary.push('\n');
        }
    }
    DiagnosticReport { summary, groups }
}
