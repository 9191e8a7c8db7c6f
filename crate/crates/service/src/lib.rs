//! HTTP API for interactive sort sessions.
//!
//! | method | path | |
//! |---|---|---|
//! | `POST` | `/sessions` | create from `{"items": [...], "algorithm"?, "params"?}` |
//! | `GET` | `/sessions/{id}/next-pair` | pending pair and its `pair_token` |
//! | `POST` | `/sessions/{id}/outcome` | `{"pair_token", "winner": "first" \| "second" \| "draw"}` |
//! | `GET` | `/sessions/{id}/ranking` | current ranking, best first |
//! | `GET` | `/sessions/{id}` | full persisted state |
//! | `GET` | `/healthz` | liveness |
//!
//! Every JSON body carries `schema_version`. Errors are
//! `{"schema_version", "error", "message"}` with status 400 (validation),
//! 404 (unknown session), 409 (stale token or finished session; the latter
//! adds `"done": true` and a `"ranking"` path) or 500 (storage).

pub mod store;

use std::future::Future;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tssort::{Algorithm, ComparisonOutcome, EngineParams, SessionSnapshot};

pub use store::{PersistedSession, SessionRecord, SessionStore, StoreError, SCHEMA_VERSION};

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound(String),
    Stale(String),
    Finished { session_id: String, message: String },
    Internal(String),
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::Validation(_) | StoreError::Engine(_) => {
                ApiError::BadRequest(err.to_string())
            }
            StoreError::StalePair { .. } => ApiError::Stale(err.to_string()),
            StoreError::Finished(_) => ApiError::Finished {
                session_id: String::new(),
                message: err.to_string(),
            },
            StoreError::Storage { .. } | StoreError::Corrupt { .. } => {
                tracing::error!(%err, "storage failure");
                ApiError::Internal(err.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, message) = match &self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "invalid_request", m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, "not_found", m),
            ApiError::Stale(m) => (StatusCode::CONFLICT, "stale_pair_token", m),
            ApiError::Finished { message, .. } => {
                (StatusCode::CONFLICT, "session_finished", message)
            }
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_failure", m),
        };
        let mut body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": code,
            "message": message,
        });
        if let ApiError::Finished { session_id, .. } = &self {
            body["done"] = json!(true);
            body["ranking"] = json!(format!("/sessions/{session_id}/ranking"));
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub items: Vec<String>,
    #[serde(default)]
    pub algorithm: Option<String>,
    #[serde(default)]
    pub params: Option<EngineParams>,
}

#[derive(Debug, Deserialize)]
pub struct OutcomeRequest {
    pub pair_token: String,
    pub winner: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Progress {
    pub schema_version: u32,
    pub session_id: String,
    pub algorithm: Algorithm,
    pub item_count: usize,
    pub comparisons_done: usize,
    pub budget: usize,
    pub done: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairItem {
    pub index: usize,
    pub label: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NextPair {
    pub schema_version: u32,
    pub session_id: String,
    pub pair_token: String,
    pub first: PairItem,
    pub second: PairItem,
    pub comparisons_done: usize,
    pub budget: usize,
    pub done: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankingRow {
    pub rank: usize,
    pub index: usize,
    pub label: String,
    pub mu: f64,
    pub sigma: Option<f64>,
    pub score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RankingResponse {
    pub schema_version: u32,
    pub session_id: String,
    pub comparisons_done: usize,
    pub budget: usize,
    pub done: bool,
    pub ranking: Vec<RankingRow>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionState {
    pub schema_version: u32,
    pub session_id: String,
    pub item_labels: Vec<String>,
    pub created_at: String,
    pub updated_at: String,
    pub state_digest: String,
    pub comparisons_done: usize,
    pub budget: usize,
    pub done: bool,
    pub engine_state: SessionSnapshot,
}

fn progress(rec: &SessionRecord) -> Progress {
    Progress {
        schema_version: SCHEMA_VERSION,
        session_id: rec.session_id.clone(),
        algorithm: rec.session.algorithm(),
        item_count: rec.item_labels.len(),
        comparisons_done: rec.session.comparisons_done(),
        budget: rec.session.budget(),
        done: rec.session.is_finished(),
    }
}

fn parse_winner(winner: &str) -> ApiResult<ComparisonOutcome> {
    match winner {
        "first" => Ok(ComparisonOutcome::FirstWins),
        "second" => Ok(ComparisonOutcome::SecondWins),
        "draw" => Ok(ComparisonOutcome::Draw),
        other => Err(ApiError::BadRequest(format!(
            "winner must be \"first\", \"second\" or \"draw\", got {other:?}"
        ))),
    }
}

fn lookup(store: &SessionStore, id: &str) -> ApiResult<Arc<tokio::sync::Mutex<SessionRecord>>> {
    store
        .get(id)
        .ok_or_else(|| ApiError::NotFound(format!("no session {id:?}")))
}

fn finished_for(id: &str) -> impl Fn(ApiError) -> ApiError + '_ {
    move |err| match err {
        ApiError::Finished { message, .. } => ApiError::Finished {
            session_id: id.to_string(),
            message,
        },
        other => other,
    }
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "schema_version": SCHEMA_VERSION, "status": "ok" }))
}

async fn create_session(
    State(store): State<Arc<SessionStore>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Progress>)> {
    let req: CreateRequest = parse_body(&body)?;
    let algorithm = match req.algorithm.as_deref() {
        Some(label) => label
            .parse::<Algorithm>()
            .map_err(|e| ApiError::BadRequest(format!("algorithm: {e}")))?,
        None => Algorithm::default(),
    };
    let record = SessionRecord::create(req.items, algorithm, req.params.unwrap_or_default())?;
    let body = progress(&record);
    store.insert(record)?;
    tracing::info!(session_id = %body.session_id, items = body.item_count, "session created");
    Ok((StatusCode::CREATED, Json(body)))
}

async fn next_pair(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> ApiResult<Json<NextPair>> {
    let entry = lookup(&store, &id)?;
    let rec = entry.lock().await;
    let (pair, token) = rec
        .next_pair()
        .map_err(ApiError::from)
        .map_err(finished_for(&id))?;
    Ok(Json(NextPair {
        schema_version: SCHEMA_VERSION,
        session_id: id,
        pair_token: token,
        first: PairItem {
            index: pair.first,
            label: rec.item_labels[pair.first].clone(),
        },
        second: PairItem {
            index: pair.second,
            label: rec.item_labels[pair.second].clone(),
        },
        comparisons_done: rec.session.comparisons_done(),
        budget: rec.session.budget(),
        done: false,
    }))
}

async fn post_outcome(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Progress>> {
    let entry = lookup(&store, &id)?;
    let req: OutcomeRequest = parse_body(&body)?;
    let outcome = parse_winner(&req.winner)?;
    let mut rec = entry.lock().await;
    // Apply to a copy so a failed write leaves memory and disk in agreement.
    let mut next = rec.clone();
    next.apply(&req.pair_token, outcome)
        .map_err(ApiError::from)
        .map_err(finished_for(&id))?;
    store.persist(&next)?;
    *rec = next;
    Ok(Json(progress(&rec)))
}

async fn get_ranking(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> ApiResult<Json<RankingResponse>> {
    let entry = lookup(&store, &id)?;
    let rec = entry.lock().await;
    let ranking = rec
        .ranking()
        .into_iter()
        .map(|r| RankingRow {
            rank: r.rank,
            index: r.index,
            label: rec.item_labels[r.index].clone(),
            mu: r.mu,
            sigma: r.sigma,
            score: r.score,
        })
        .collect();
    Ok(Json(RankingResponse {
        schema_version: SCHEMA_VERSION,
        session_id: id,
        comparisons_done: rec.session.comparisons_done(),
        budget: rec.session.budget(),
        done: rec.session.is_finished(),
        ranking,
    }))
}

async fn get_session(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionState>> {
    let entry = lookup(&store, &id)?;
    let rec = entry.lock().await;
    let doc = rec.to_persisted();
    Ok(Json(SessionState {
        schema_version: doc.schema_version,
        session_id: doc.session_id,
        item_labels: doc.item_labels,
        created_at: doc.created_at,
        updated_at: doc.updated_at,
        state_digest: doc.state_digest,
        comparisons_done: rec.session.comparisons_done(),
        budget: rec.session.budget(),
        done: rec.session.is_finished(),
        engine_state: doc.engine_state,
    }))
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next-pair", get(next_pair))
        .route("/sessions/{id}/outcome", post(post_outcome))
        .route("/sessions/{id}/ranking", get(get_ranking))
        .with_state(store)
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: Arc<SessionStore>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store))
        .with_graceful_shutdown(shutdown)
        .await
}
