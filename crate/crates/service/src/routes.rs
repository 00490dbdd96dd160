use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use aiopt_core::agent::{
    apply_feedback, recommend, simulate_whatif, train, AgentError, Decision, FeedbackEvent,
};
use aiopt_core::flawdet::{detect, diagnose, Flaw};
use aiopt_core::model::{discretize, parse_metric_value, ActionKind};
use aiopt_core::reporting::{compute_kpis, export_report, ExportFormat, Report};
use aiopt_core::simenv::{reset, state_from_snapshot, EnvState};
use aiopt_core::AppConfig;
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::store::{Session, Store};

type Shared = State<Arc<Store>>;

fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

/// Decodes an optional JSON body; an empty body means "all defaults".
fn body_or_default<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::Unprocessable(e.to_string()))
}

fn env_state_for(session: &Session, config: &AppConfig) -> Option<EnvState> {
    session
        .latest_observation(config)
        .map(|o| state_from_snapshot(&o.snapshot, &config.deployment, &config.env))
}

#[derive(Serialize)]
struct IngestRejection {
    index: usize,
    reason: String,
}

pub async fn ingest(State(store): Shared, body: Bytes) -> Result<Json<Value>, ApiError> {
    let value: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::BadRequest(format!("body is not JSON: {e}")))?;
    let Value::Array(records) = value else {
        return Err(ApiError::BadRequest("body must be a JSON array of metric records".into()));
    };
    let mut accepted = Vec::with_capacity(records.len());
    let mut reasons = Vec::new();
    for (index, record) in records.into_iter().enumerate() {
        match parse_metric_value(record) {
            Ok(sample) => accepted.push(sample),
            Err(e) => reasons.push(IngestRejection {
                index,
                reason: e.to_string(),
            }),
        }
    }
    let ingested = accepted.len();
    let mut session = store.write().await;
    session.ingest(accepted);
    session.revision += 1;
    Ok(Json(json!({
        "ingested": ingested,
        "rejected": reasons.len(),
        "reasons": reasons,
        "revision": session.revision,
    })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRequest {
    episodes: Option<u32>,
    seed: Option<u64>,
}

pub async fn start_training(State(store): Shared, body: Bytes) -> Result<Response, ApiError> {
    let request: TrainRequest = body_or_default(&body)?;
    let mut agent = store.config.agent.clone();
    let mut env = store.config.env.clone();
    if let Some(episodes) = request.episodes {
        agent.episodes = episodes;
    }
    if let Some(seed) = request.seed {
        agent.rng_seed = seed;
        env.rng_seed = seed;
    }
    agent
        .validate()
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let guard = store.begin_training().ok_or(ApiError::TrainingInProgress)?;

    let targets = store.config.targets.clone();
    let weights = store.config.weights.clone();
    let job = {
        let store = Arc::clone(&store);
        tokio::spawn(async move {
            let _guard = guard;
            let trained = tokio::task::spawn_blocking(move || train(&env, &targets, &agent, &weights))
                .await
                .map_err(|e| ApiError::Internal(format!("training task failed: {e}")))?
                .map_err(|e| ApiError::Internal(e.to_string()))?;
            let (table, stats) = trained;
            let mut session = store.write().await;
            session.table = Some(table);
            session.revision += 1;
            Ok::<_, ApiError>((stats, session.revision))
        })
    };
    let (stats, revision) = job
        .await
        .map_err(|e| ApiError::Internal(format!("training task failed: {e}")))??;
    let n = stats.episodes.len() as f64;
    Ok(Json(json!({
        "episodes": stats.episodes.len(),
        "final_epsilon": stats.final_epsilon,
        "mean_total_reward": stats.episodes.iter().map(|e| e.total_reward).sum::<f64>() / n,
        "mean_total_cost": stats.episodes.iter().map(|e| e.total_cost).sum::<f64>() / n,
        "last_episode": stats.episodes.last(),
        "revision": revision,
    }))
    .into_response())
}

#[derive(Debug, Deserialize)]
pub struct TopQuery {
    top: Option<String>,
}

pub async fn recommendations(
    State(store): Shared,
    Query(query): Query<TopQuery>,
) -> Result<Json<Value>, ApiError> {
    let k = match query.top.as_deref() {
        None => 3,
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| ApiError::Unprocessable(format!("top must be an integer, got `{raw}`")))?,
    };
    if !(1..=aiopt_core::model::NUM_ACTIONS).contains(&k) {
        return Err(ApiError::Unprocessable(format!("top must be in [1, 7], got {k}")));
    }
    let config = &store.config;
    // Issuing only records ids; it is not a revision-bearing mutation.
    let mut session = store.write().await;
    let table = session.table.as_ref().ok_or(ApiError::NotTrained)?;
    let observation = session.latest_observation(config).ok_or(ApiError::NoData)?;
    let current = discretize(&observation.snapshot, &config.targets);
    let env_state = state_from_snapshot(&observation.snapshot, &config.deployment, &config.env);
    let recs = recommend(table, &current, &env_state, k, &config.env, config.horizon)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    session.book.issue(&recs);
    Ok(Json(json!({ "recommendations": recs, "revision": session.revision })))
}

#[derive(Debug, Deserialize)]
struct FeedbackRequest {
    decision: String,
}

pub async fn feedback(
    State(store): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let request: FeedbackRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let decision: Decision = request.decision.parse().map_err(ApiError::Unprocessable)?;
    let mut session = store.write().await;
    let Session { table, book, .. } = &mut *session;
    let table = table.as_mut().ok_or(ApiError::NotTrained)?;
    let event = FeedbackEvent {
        recommendation_id: id,
        decision,
        timestamp: now_ms(),
    };
    let new_q_value = match apply_feedback(table, &event, book, &store.config.agent) {
        Ok(v) => v,
        Err(AgentError::UnknownRecommendation(id)) => {
            return Err(ApiError::NotFound(format!("unknown recommendation {id}")))
        }
        Err(AgentError::AlreadyResolved(id)) => {
            return Err(ApiError::Conflict(format!("recommendation {id} is already resolved")))
        }
        Err(e) => return Err(ApiError::Internal(e.to_string())),
    };
    session.revision += 1;
    Ok(Json(json!({ "new_q_value": new_q_value, "revision": session.revision })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    action: String,
    horizon: Option<i64>,
}

pub async fn simulate(State(store): Shared, body: Bytes) -> Result<Json<Value>, ApiError> {
    let request: SimulateRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let action: ActionKind = request.action.parse().map_err(ApiError::Unprocessable)?;
    let horizon = request.horizon.unwrap_or(i64::from(store.config.horizon));
    if horizon < 1 || horizon > i64::from(u32::MAX) {
        return Err(ApiError::Unprocessable(format!("horizon must be >= 1, got {horizon}")));
    }
    let config = &store.config;
    let start = {
        let session = store.read().await;
        env_state_for(&session, config).unwrap_or_else(|| reset(&config.env))
    };
    let whatif = simulate_whatif(&start, action, &config.env, horizon as u32);
    Ok(Json(json!(whatif)))
}

fn current_flaws(session: &Session, config: &AppConfig) -> Result<Vec<Flaw>, ApiError> {
    detect(&session.samples, &config.detector, &config.rules).map_err(|e| ApiError::Internal(e.to_string()))
}

pub async fn flaws(State(store): Shared) -> Result<Json<Value>, ApiError> {
    let session = store.read().await;
    let flaws = current_flaws(&session, &store.config)?;
    let diagnostic = diagnose(&flaws);
    Ok(Json(json!({ "flaws": flaws, "diagnostic": diagnostic })))
}

#[derive(Debug, Deserialize)]
pub struct FormatQuery {
    format: Option<String>,
}

pub async fn report(
    State(store): Shared,
    Query(query): Query<FormatQuery>,
) -> Result<Response, ApiError> {
    let format: ExportFormat = query
        .format
        .as_deref()
        .unwrap_or("json")
        .parse()
        .map_err(|e: aiopt_core::reporting::ReportError| ApiError::Unprocessable(e.to_string()))?;
    let session = store.read().await;
    let config = &store.config;
    let report = Report::from_observations(
        now_ms(),
        &session.observations(config),
        &config.targets,
        current_flaws(&session, config)?,
        session.book.issued().cloned().collect(),
    );
    let bytes = export_report(&report, format).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, format.content_type())], bytes).into_response())
}

pub async fn kpis(State(store): Shared) -> Json<Value> {
    let session = store.read().await;
    let observations = session.observations(&store.config);
    match compute_kpis::<_, aiopt_core::model::Observation>(&observations, &store.config.targets, None) {
        Ok(kpis) => Json(json!({ "empty": false, "windows": observations.len(), "kpis": kpis })),
        Err(_) => Json(json!({ "empty": true, "windows": 0, "kpis": null })),
    }
}

pub async fn state(State(store): Shared) -> Json<Value> {
    let session = store.read().await;
    let config = &store.config;
    let latest = session.latest_observation(config);
    let discrete = latest.as_ref().map(|o| discretize(&o.snapshot, &config.targets));
    Json(json!({
        "revision": session.revision,
        "trained": session.table.is_some(),
        "training": store.is_training(),
        "samples": session.samples.len(),
        "snapshot": latest.as_ref().map(|o| &o.snapshot),
        "discrete_state": discrete,
        "state_index": discrete.map(|d| d.index()),
    }))
}
