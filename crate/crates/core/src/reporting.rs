//! KPI computation, report assembly and CSV/JSON export.
//!
//! Step duration is one time unit, so requests served in a step equal its
//! `throughput_rps` numerically. `cumulative_savings_vs_baseline` is the proxy
//! for optimisation progress: baseline cost minus actual cost over the series.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Recommendation;
use crate::flawdet::{percentile_nearest_rank, Flaw};
use crate::model::{CostBreakdown, Observation, SystemSnapshot, TargetsConfig};
use crate::simenv::StepOutcome;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("series is empty")]
    EmptySeries,
    #[error("unsupported format `{0}` (expected json or csv)")]
    UnsupportedFormat(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Anything that carries one step's snapshot and cost components.
pub trait KpiInput {
    fn snapshot(&self) -> &SystemSnapshot;
    fn cost(&self) -> &CostBreakdown;
}

impl KpiInput for StepOutcome {
    fn snapshot(&self) -> &SystemSnapshot {
        &self.snapshot
    }
    fn cost(&self) -> &CostBreakdown {
        &self.cost
    }
}

impl KpiInput for Observation {
    fn snapshot(&self) -> &SystemSnapshot {
        &self.snapshot
    }
    fn cost(&self) -> &CostBreakdown {
        &self.cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSet {
    pub mean_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub mean_throughput_rps: f64,
    pub mean_cpu_util: f64,
    pub total_cost: f64,
    /// `None` when no requests were served.
    pub cost_per_transaction: Option<f64>,
    pub slo_breach_fraction: f64,
    pub cumulative_savings_vs_baseline: f64,
}

impl KpiSet {
    const FIELDS: [&'static str; 8] = [
        "mean_latency_ms",
        "p95_latency_ms",
        "mean_throughput_rps",
        "mean_cpu_util",
        "total_cost",
        "cost_per_transaction",
        "slo_breach_fraction",
        "cumulative_savings_vs_baseline",
    ];
}

pub fn compute_kpis<T: KpiInput, B: KpiInput>(
    outcomes: &[T],
    targets: &TargetsConfig,
    baseline: Option<&[B]>,
) -> Result<KpiSet, ReportError> {
    if outcomes.is_empty() {
        return Err(ReportError::EmptySeries);
    }
    let n = outcomes.len() as f64;
    let latencies: Vec<f64> = outcomes.iter().map(|o| o.snapshot().latency_ms).collect();
    let mean = |f: fn(&SystemSnapshot) -> f64| outcomes.iter().map(|o| f(o.snapshot())).sum::<f64>() / n;
    let total_cost: f64 = outcomes.iter().map(|o| o.cost().total).sum();
    let total_requests: f64 = outcomes.iter().map(|o| o.snapshot().throughput_rps).sum();
    let breaches = latencies
        .iter()
        .filter(|l| **l > targets.slo_latency_ms)
        .count();
    let savings = baseline
        .map(|b| b.iter().map(|o| o.cost().total).sum::<f64>() - total_cost)
        .unwrap_or(0.0);
    Ok(KpiSet {
        mean_latency_ms: mean(|s| s.latency_ms),
        p95_latency_ms: percentile_nearest_rank(&latencies, 95.0)
            .expect("non-empty series with a valid percentile"),
        mean_throughput_rps: mean(|s| s.throughput_rps),
        mean_cpu_util: mean(|s| s.cpu_util),
        total_cost,
        cost_per_transaction: (total_requests > 0.0).then(|| total_cost / total_requests),
        slo_breach_fraction: breaches as f64 / n,
        cumulative_savings_vs_baseline: savings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportWindow {
    pub start_ts: i64,
    pub end_ts: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub ts: i64,
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub generated_at: i64,
    pub window: ReportWindow,
    /// `None` when the window holds no data.
    pub kpis: Option<KpiSet>,
    pub flaws: Vec<Flaw>,
    pub recommendations: Vec<Recommendation>,
    pub cost_breakdown_series: Vec<CostPoint>,
}

impl Report {
    /// Assembles a report; the window spans the series (or collapses to
    /// `generated_at` when the series is empty).
    pub fn new(
        generated_at: i64,
        kpis: Option<KpiSet>,
        flaws: Vec<Flaw>,
        recommendations: Vec<Recommendation>,
        mut cost_breakdown_series: Vec<CostPoint>,
    ) -> Self {
        cost_breakdown_series.sort_by_key(|p| p.ts);
        let window = match (cost_breakdown_series.first(), cost_breakdown_series.last()) {
            (Some(a), Some(b)) => ReportWindow {
                start_ts: a.ts,
                end_ts: b.ts,
            },
            _ => ReportWindow {
                start_ts: generated_at,
                end_ts: generated_at,
            },
        };
        Report {
            generated_at,
            window,
            kpis,
            flaws,
            recommendations,
            cost_breakdown_series,
        }
    }
}

impl Report {
    /// Report over aggregated telemetry. KPIs are absent when there is none.
    pub fn from_observations(
        generated_at: i64,
        observations: &[Observation],
        targets: &TargetsConfig,
        flaws: Vec<Flaw>,
        recommendations: Vec<Recommendation>,
    ) -> Self {
        let kpis = compute_kpis::<_, Observation>(observations, targets, None).ok();
        let series = observations
            .iter()
            .map(|o| CostPoint {
                ts: o.ts,
                cost: o.cost,
            })
            .collect();
        Report::new(generated_at, kpis, flaws, recommendations, series)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Csv,
}

impl FromStr for ExportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            _ => Err(ReportError::UnsupportedFormat(s.to_string())),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportFormat::Json => "json",
            ExportFormat::Csv => "csv",
        })
    }
}

impl ExportFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Json => "application/json",
            ExportFormat::Csv => "text/csv",
        }
    }
}

pub const CSV_SECTIONS: [&str; 4] = ["# kpis", "# flaws", "# recommendations", "# cost_series"];

fn num(v: f64) -> String {
    // Display prints the shortest string that parses back to the same f64.
    v.to_string()
}

fn section<I, R>(out: &mut Vec<u8>, title: &str, header: &[&str], rows: I) -> Result<(), ReportError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    out.extend_from_slice(title.as_bytes());
    out.push(b'\n');
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())?;
    }
    out.extend(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?);
    Ok(())
}

fn to_csv(report: &Report) -> Result<Vec<u8>, ReportError> {
    let mut out = Vec::new();
    section(
        &mut out,
        CSV_SECTIONS[0],
        &KpiSet::FIELDS,
        report.kpis.iter().map(|k| {
            vec![
                num(k.mean_latency_ms),
                num(k.p95_latency_ms),
                num(k.mean_throughput_rps),
                num(k.mean_cpu_util),
                num(k.total_cost),
                k.cost_per_transaction.map(num).unwrap_or_default(),
                num(k.slo_breach_fraction),
                num(k.cumulative_savings_vs_baseline),
            ]
        }),
    )?;
    section(
        &mut out,
        CSV_SECTIONS[1],
        &[
            "rule_or_detector",
            "metric",
            "first_ts",
            "last_ts",
            "observed",
            "expected",
            "severity",
            "suggested_action",
        ],
        report.flaws.iter().map(|f| {
            vec![
                f.rule_or_detector.clone(),
                f.metric.to_string(),
                f.first_ts.to_string(),
                f.last_ts.to_string(),
                num(f.observed),
                f.expected.clone(),
                f.severity.to_string(),
                f.suggested_action.map(|a| a.to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    section(
        &mut out,
        CSV_SECTIONS[2],
        &[
            "id",
            "rank",
            "action",
            "state_index",
            "q_value",
            "predicted_savings",
            "effort_cost",
            "roi",
        ],
        report.recommendations.iter().map(|r| {
            vec![
                r.id.clone(),
                r.rank.to_string(),
                r.action.to_string(),
                r.state.index().to_string(),
                num(r.q_value),
                num(r.predicted_savings),
                num(r.effort_cost),
                num(r.roi),
            ]
        }),
    )?;
    section(
        &mut out,
        CSV_SECTIONS[3],
        &[
            "ts",
            "infrastructure",
            "licensing",
            "maintenance",
            "operational",
            "total",
        ],
        report.cost_breakdown_series.iter().map(|p| {
            vec![
                p.ts.to_string(),
                num(p.cost.infrastructure),
                num(p.cost.licensing),
                num(p.cost.maintenance),
                num(p.cost.operational),
                num(p.cost.total),
            ]
        }),
    )?;
    Ok(out)
}

pub fn export_report(report: &Report, format: ExportFormat) -> Result<Vec<u8>, ReportError> {
    match format {
        ExportFormat::Json => Ok(serde_json::to_vec_pretty(report)?),
        ExportFormat::Csv => to_csv(report),
    }
}

pub fn import_report(json: &[u8]) -> Result<Report, ReportError> {
    Ok(serde_json::from_slice(json)?)
}
