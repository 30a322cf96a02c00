//! HTTP/JSON routes.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pairrank_core::eval::{fit_scores, normalize_scores, params_string, MethodParams};
use pairrank_core::{Dataset, ItemCatalog, ItemId, Method, ScoreTable};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::error::{Result, ServiceError};
use crate::survey::{ItemState, Strategy, Survey};

pub struct AppState {
    survey: Mutex<Survey>,
    default_strategy: Strategy,
    /// Serialized batch tables keyed by method and parameters, with the log
    /// length they were computed from.
    cache: Mutex<HashMap<(Method, String), (usize, Bytes)>>,
}

impl AppState {
    pub fn new(survey: Survey, default_strategy: Strategy) -> Arc<AppState> {
        Arc::new(AppState { survey: Mutex::new(survey), default_strategy, cache: Mutex::new(HashMap::new()) })
    }

    pub fn survey(&self) -> MutexGuard<'_, Survey> {
        self.survey.lock().unwrap_or_else(|e| e.into_inner())
    }
}

pub fn router(state: Arc<AppState>, image_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/next", get(next_pair))
        .route("/api/sessions/{id}/vote", post(vote))
        .route("/api/scores", get(scores))
        .route("/api/items", get(items))
        .with_state(state);
    match image_dir {
        Some(dir) => api.nest_service("/images", ServeDir::new(dir)),
        None => api,
    }
}

fn image_uri(catalog: &ItemCatalog, id: &ItemId) -> Option<String> {
    catalog.get(id).and_then(|e| e.image.as_ref()).map(|p| format!("/images/{}", p.trim_start_matches('/')))
}

#[derive(Serialize)]
struct SessionCreated {
    session_id: String,
}

async fn create_session(State(state): State<Arc<AppState>>) -> Result<Json<SessionCreated>> {
    let session_id = state.survey().create_session()?;
    Ok(Json(SessionCreated { session_id }))
}

#[derive(Deserialize)]
struct NextQuery {
    strategy: Option<String>,
}

#[derive(Serialize)]
struct Side {
    id: ItemId,
    image: Option<String>,
}

#[derive(Serialize)]
struct PairResponse {
    token: String,
    left: Side,
    right: Side,
}

async fn next_pair(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> Result<Json<PairResponse>> {
    let strategy = match q.strategy.as_deref() {
        Some(s) => s.parse()?,
        None => state.default_strategy,
    };
    let mut survey = state.survey();
    let ticket = survey.next_pair(&id, strategy)?;
    let catalog = survey.catalog();
    let side = |idx: usize| {
        let id = catalog.id(idx).clone();
        Side { image: image_uri(catalog, &id), id }
    };
    Ok(Json(PairResponse { token: ticket.token, left: side(ticket.left), right: side(ticket.right) }))
}

#[derive(Deserialize)]
struct VoteBody {
    token: String,
    outcome: String,
}

#[derive(Serialize)]
struct SideState {
    id: ItemId,
    #[serde(flatten)]
    state: ItemState,
}

#[derive(Serialize)]
struct Updated {
    left: SideState,
    right: SideState,
}

#[derive(Serialize)]
struct VoteResponse {
    recorded: bool,
    updated: Updated,
}

async fn vote(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: std::result::Result<Json<VoteBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<VoteResponse>> {
    let Json(body) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let choice = body.outcome.parse()?;
    let receipt = state.survey().vote(&id, &body.token, choice)?;
    let side = |(id, state): (ItemId, ItemState)| SideState { id, state };
    Ok(Json(VoteResponse {
        recorded: receipt.recorded,
        updated: Updated { left: side(receipt.left), right: side(receipt.right) },
    }))
}

#[derive(Serialize)]
struct ScoreItem<'a> {
    id: &'a ItemId,
    score: f64,
    normalized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
}

#[derive(Serialize)]
struct ScoresResponse<'a> {
    method: Method,
    params: &'a BTreeMap<String, f64>,
    records: usize,
    items: Vec<ScoreItem<'a>>,
}

fn render_table(table: &ScoreTable, records: usize) -> Result<Bytes> {
    let normalized = normalize_scores(table)?.table;
    let items = table
        .entries()
        .iter()
        .zip(normalized.entries())
        .map(|(e, n)| ScoreItem {
            id: &e.item,
            score: e.score,
            normalized: n.score,
            mu: e.rating.map(|r| r.mu),
            sigma: e.rating.map(|r| r.sigma()),
        })
        .collect();
    let body = ScoresResponse { method: table.method, params: &table.params, records, items };
    Ok(Bytes::from(serde_json::to_vec(&body).map_err(pairrank_core::Error::from)?))
}

fn json_bytes(bytes: Bytes) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

/// `method` selects the rater; any other query key overrides one of its
/// parameters, e.g. `method=lsr&alpha_reg=0`.
async fn scores(
    State(state): State<Arc<AppState>>,
    Query(mut q): Query<BTreeMap<String, String>>,
) -> Result<Response> {
    let method = q.remove("method").ok_or_else(|| ServiceError::BadRequest("missing method".into()))?;
    let method: Method = method.parse().map_err(|e: pairrank_core::Error| ServiceError::BadRequest(e.to_string()))?;
    if method.is_online() {
        if let Some(k) = q.keys().next() {
            return Err(ServiceError::BadRequest(format!("{method} parameters are fixed by the service, got {k:?}")));
        }
        let survey = state.survey();
        let table = survey.online_table(method)?;
        return Ok(json_bytes(render_table(&table, survey.records().len())?));
    }
    let mut overrides = BTreeMap::new();
    for (k, v) in q {
        let v: f64 = v.parse().map_err(|_| ServiceError::BadRequest(format!("parameter {k}={v:?} is not a number")))?;
        overrides.insert(k, v);
    }
    let params = MethodParams::default_for(method)
        .with_overrides(&overrides)
        .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let key = (method, params_string(&params.to_map()));

    let (catalog, records) = {
        let survey = state.survey();
        (Arc::clone(survey.catalog()), survey.records())
    };
    if records.is_empty() {
        return Err(ServiceError::EmptyLog);
    }
    let len = records.len();
    let cached = state.cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key).cloned();
    if let Some((n, bytes)) = cached {
        if n == len {
            return Ok(json_bytes(bytes));
        }
    }
    let bytes = tokio::task::spawn_blocking(move || -> Result<Bytes> {
        let data = Dataset::with_catalog((*catalog).clone(), records.to_vec())?;
        render_table(&fit_scores(&data, &params)?, len)
    })
    .await
    .map_err(|e| ServiceError::Task(e.to_string()))??;
    let mut cache = state.cache.lock().unwrap_or_else(|e| e.into_inner());
    let entry = cache.entry(key).or_insert((0, Bytes::new()));
    if entry.0 <= len {
        *entry = (len, bytes.clone());
    }
    Ok(json_bytes(bytes))
}

#[derive(Serialize)]
struct ItemView {
    id: ItemId,
    image: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

async fn items(State(state): State<Arc<AppState>>) -> Json<Vec<ItemView>> {
    let catalog = Arc::clone(state.survey().catalog());
    Json(
        catalog
            .entries()
            .iter()
            .map(|e| ItemView { image: image_uri(&catalog, &e.id), id: e.id.clone(), metadata: e.metadata.clone() })
            .collect(),
    )
}
