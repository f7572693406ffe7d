//! JSON API for the judgment and highlight front end.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, TimeDelta, Utc};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ranker::{highlight, HighlightSpan, MatchedTerm};
use crate::store::{DocStatus, JudgmentFilter, JudgmentRecord, Store, StoreError};

/// Grades at or above this count as relevant for precision.
pub const RELEVANT_GRADE: u8 = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Labels for grades 0..=3.
    pub scale_labels: [String; 4],
    /// Default `t` for `precision_at_threshold`.
    pub threshold: f64,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            scale_labels: [
                "Irrelevant".into(),
                "On topic, no threat intelligence".into(),
                "Relevant threat intelligence".into(),
                "Actionable threat intelligence".into(),
            ],
            threshold: 0.5,
            static_dir: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
    config: Arc<ServiceConfig>,
    rng: Arc<Mutex<ChaCha8Rng>>,
}

impl AppState {
    pub fn new(store: Arc<Store>, config: ServiceConfig, seed: u64) -> Self {
        Self {
            store,
            config: Arc::new(config),
            rng: Arc::new(Mutex::new(ChaCha8Rng::seed_from_u64(seed))),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    field: Option<&'static str>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field: Some(field),
            ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_field", message)
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownDocument(id) => Self::new(
                StatusCode::NOT_FOUND,
                "unknown_document",
                format!("no document {id}"),
            ),
            StoreError::InvalidGrade(g) => {
                Self::invalid("grade", format!("grade {g} outside 0..=3"))
            }
            other => Self::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "storage",
                other.to_string(),
            ),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Some(f) = self.field {
            body["field"] = json!(f);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResponse {
    pub doc_id: String,
    pub url: String,
    pub title: String,
    pub text: String,
    pub r: Option<f64>,
    pub served_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SampleStrategy {
    #[default]
    Random,
    UnjudgedFirst,
}

#[derive(Debug, Deserialize)]
pub struct SampleQuery {
    #[serde(default)]
    strategy: SampleStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightResponse {
    pub doc_id: String,
    pub text: String,
    pub r: f64,
    pub spans: Vec<HighlightSpan>,
    pub matched_terms: Vec<MatchedTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsResponse {
    pub docs_total: usize,
    pub docs_ranked: usize,
    pub judgments_total: usize,
    pub grade_histogram: [usize; 4],
    /// Minimum, the nine deciles and maximum of the stored scores; empty
    /// when nothing is ranked.
    pub score_deciles: Vec<f64>,
    pub threshold: f64,
    pub precision_at_threshold: Option<f64>,
}

#[derive(Debug, Deserialize)]
pub struct StatsQuery {
    t: Option<f64>,
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/sample", get(sample))
        .route("/api/judgments", post(post_judgment))
        .route("/api/docs/{id}/highlight", get(doc_highlight))
        .route("/api/stats", get(stats))
        .route("/api/config", get(config));
    let api = match &state.config.static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    };
    api.with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn config(State(s): State<AppState>) -> Json<Value> {
    let scale: Vec<Value> = s
        .config
        .scale_labels
        .iter()
        .enumerate()
        .map(|(g, l)| json!({ "grade": g, "label": l }))
        .collect();
    Json(json!({ "scale": scale, "threshold": s.config.threshold }))
}

/// Documents with extracted text, i.e. parsed or ranked.
fn harvested_ids(store: &Store) -> Result<Vec<String>, StoreError> {
    let mut ids = store.document_ids(Some(DocStatus::Parsed))?;
    ids.extend(store.document_ids(Some(DocStatus::Ranked))?);
    Ok(ids)
}

async fn sample(
    State(s): State<AppState>,
    Query(q): Query<SampleQuery>,
) -> ApiResult<SampleResponse> {
    let ids = harvested_ids(&s.store)?;
    if ids.is_empty() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "empty_store",
            "no harvested documents to judge",
        ));
    }
    let pool = match q.strategy {
        SampleStrategy::Random => ids,
        SampleStrategy::UnjudgedFirst => {
            let judged = s.store.judged_doc_ids()?;
            let unjudged: Vec<String> = ids
                .iter()
                .filter(|id| !judged.contains(*id))
                .cloned()
                .collect();
            if unjudged.is_empty() {
                ids
            } else {
                unjudged
            }
        }
    };
    let pick = {
        let mut rng = s.rng.lock().unwrap_or_else(|p| p.into_inner());
        pool.choose(&mut *rng).expect("pool is non-empty").clone()
    };
    let doc = s.store.get_document(&pick)?.ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_document",
            format!("no document {pick}"),
        )
    })?;
    Ok(Json(SampleResponse {
        doc_id: doc.doc_id,
        url: doc.url,
        title: doc.title,
        text: doc.text,
        r: doc.relevance_score,
        served_at: Utc::now(),
    }))
}

fn field_str(body: &Value, field: &'static str) -> Result<String, ApiError> {
    match body.get(field) {
        Some(Value::String(v)) if !v.trim().is_empty() => Ok(v.clone()),
        Some(Value::String(_)) => Err(ApiError::invalid(
            field,
            format!("{field} must not be empty"),
        )),
        Some(_) => Err(ApiError::invalid(
            field,
            format!("{field} must be a string"),
        )),
        None => Err(ApiError::invalid(field, format!("{field} is required"))),
    }
}

fn field_grade(body: &Value) -> Result<u8, ApiError> {
    let raw = body
        .get("grade")
        .ok_or_else(|| ApiError::invalid("grade", "grade is required"))?;
    raw.as_u64()
        .filter(|g| *g <= 3)
        .map(|g| g as u8)
        .ok_or_else(|| {
            ApiError::invalid(
                "grade",
                format!("grade must be an integer in 0..=3, got {raw}"),
            )
        })
}

async fn post_judgment(
    State(s): State<AppState>,
    body: Option<Json<Value>>,
) -> ApiResult<JudgmentRecord> {
    let Some(Json(body)) = body else {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_body",
            "expected a JSON object body",
        ));
    };
    if !body.is_object() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_body",
            "expected a JSON object body",
        ));
    }
    let grade = field_grade(&body)?;
    let doc_id = field_str(&body, "doc_id")?;
    let judge_id = field_str(&body, "judge_id")?;
    if !s.store.contains(&doc_id)? {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_document",
            format!("no document {doc_id}"),
        ));
    }
    // Timestamps for a (doc, judge) pair must increase; nudge past the
    // previous one when the clock has not moved.
    let mut attempts = 0;
    loop {
        let mut judged_at = Utc::now();
        if let Some(prev) = s.store.latest_judgment_time(&doc_id, &judge_id)? {
            if judged_at <= prev {
                judged_at = prev + TimeDelta::nanoseconds(1);
            }
        }
        let record = JudgmentRecord {
            doc_id: doc_id.clone(),
            judge_id: judge_id.clone(),
            grade,
            judged_at,
        };
        match s.store.put_judgment(&record) {
            Ok(()) => return Ok(Json(record)),
            Err(StoreError::StaleJudgment { .. }) if attempts < 3 => attempts += 1,
            Err(e) => return Err(e.into()),
        }
    }
}

async fn doc_highlight(
    State(s): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let doc = s.store.get_document(&id)?.ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_document",
            format!("no document {id}"),
        )
    })?;
    let (Some(r), Some(matched)) = (doc.relevance_score, s.store.matched_terms(&id)?) else {
        let body = json!({ "error": "not_ranked", "message": format!("document {id} has not been ranked"), "doc_id": id });
        return Ok((StatusCode::CONFLICT, Json(body)).into_response());
    };
    let spans = highlight(&doc.text, matched.iter().map(|m| m.term.as_str()));
    Ok(Json(HighlightResponse {
        doc_id: doc.doc_id,
        text: doc.text,
        r,
        spans,
        matched_terms: matched,
    })
    .into_response())
}

/// Linear-interpolated quantiles at 0, 0.1, ..., 1 of `values`.
pub fn deciles(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let last = (v.len() - 1) as f64;
    (0..=10)
        .map(|k| {
            let pos = last * k as f64 / 10.0;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        })
        .collect()
}

/// Computes the statistics served by `/api/stats`. Precision uses the
/// latest judgment of each (doc, judge) pair.
pub fn compute_stats(store: &Store, t: f64) -> Result<StatsResponse, StoreError> {
    let docs_total = store.count_documents(None)?;
    let scores = store.relevance_scores()?;
    let all = store.list_judgments(&JudgmentFilter::default())?;
    let mut grade_histogram = [0usize; 4];
    for j in &all {
        grade_histogram[usize::from(j.grade)] += 1;
    }
    let score_of: std::collections::HashMap<&str, f64> =
        scores.iter().map(|(id, r)| (id.as_str(), *r)).collect();
    let latest = store.list_judgments(&JudgmentFilter {
        latest_only: true,
        ..Default::default()
    })?;
    let above: Vec<&JudgmentRecord> = latest
        .iter()
        .filter(|j| score_of.get(j.doc_id.as_str()).is_some_and(|r| *r >= t))
        .collect();
    let precision_at_threshold = (!above.is_empty()).then(|| {
        above.iter().filter(|j| j.grade >= RELEVANT_GRADE).count() as f64 / above.len() as f64
    });
    let values: Vec<f64> = scores.iter().map(|(_, r)| *r).collect();
    Ok(StatsResponse {
        docs_total,
        docs_ranked: scores.len(),
        judgments_total: all.len(),
        grade_histogram,
        score_deciles: deciles(&values),
        threshold: t,
        precision_at_threshold,
    })
}

async fn stats(State(s): State<AppState>, Query(q): Query<StatsQuery>) -> ApiResult<StatsResponse> {
    let t = q.t.unwrap_or(s.config.threshold);
    if !t.is_finite() {
        return Err(ApiError::invalid("t", "threshold must be finite"));
    }
    Ok(Json(compute_stats(&s.store, t)?))
}
