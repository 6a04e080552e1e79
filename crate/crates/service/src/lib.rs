//! HTTP JSON API over the trendsketch engine.

mod error;
pub mod registry;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use trendsketch_core::constraint::{AnnotationInterpreter, StructuredInterpreter};
use trendsketch_core::ingest::{dataset_summary, load_csv, CsvMapping, DatasetSummary, IngestWarning};
use trendsketch_core::model::BuildConfig;
use trendsketch_core::pipeline::{
    build, run_cluster, run_query, signal_page, ClusterRequest, ClusterResponse, PenaltyOverrides,
    QueryRequest, QueryResponse, SignalPage, DEFAULT_PAGE_LIMIT,
};
use trendsketch_core::ps::{PsScene, ResolutionSet};
use trendsketch_core::search::Unindexable;

pub use error::{ApiError, ApiJson, ErrorBody, ErrorDetail};
pub use registry::Registry;

const MAX_UPLOAD_BYTES: usize = 256 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<Registry>,
    pub interpreter: Arc<dyn AnnotationInterpreter>,
}

impl AppState {
    pub fn new(registry: Registry) -> Self {
        AppState {
            registry: Arc::new(registry),
            interpreter: Arc::new(StructuredInterpreter),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/datasets", post(create_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/datasets/{id}/signals", get(list_signals))
        .route("/datasets/{id}/index", post(create_index))
        .route("/indexes/{id}", get(get_index))
        .route("/indexes/{id}/query", post(query))
        .route("/indexes/{id}/cluster", post(cluster))
        .route("/ps/resolve", post(ps_resolve))
        .fallback(|uri: axum::http::Uri| async move { ApiError::not_found("route", uri.path()) })
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetCreated {
    pub dataset_id: String,
    pub summary: DatasetSummary,
    pub warnings: Vec<IngestWarning>,
}

async fn create_dataset(
    State(state): State<AppState>,
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<(StatusCode, Json<DatasetCreated>), ApiError> {
    let mut multipart = multipart.map_err(|r| ApiError::bad_request("invalid_multipart", r.body_text()))?;
    let mut csv: Option<Bytes> = None;
    let mut mapping: Option<CsvMapping> = None;
    let bad = |e: axum::extract::multipart::MultipartError| {
        ApiError::bad_request("invalid_multipart", e.body_text())
    };
    while let Some(field) = multipart.next_field().await.map_err(bad)? {
        match field.name() {
            Some("csv") | Some("file") => csv = Some(field.bytes().await.map_err(bad)?),
            Some("mapping") => {
                let raw = field.bytes().await.map_err(bad)?;
                mapping = Some(
                    serde_json::from_slice(&raw)
                        .map_err(|e| ApiError::bad_request("invalid_mapping", format!("mapping: {e}")))?,
                );
            }
            _ => {}
        }
    }
    let csv = csv.ok_or_else(|| ApiError::bad_request("invalid_multipart", "missing `csv` part"))?;
    let mapping =
        mapping.ok_or_else(|| ApiError::bad_request("invalid_multipart", "missing `mapping` part"))?;

    let outcome = tokio::task::spawn_blocking(move || load_csv(&csv, &mapping))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::bad_request("ingest_error", e.to_string()))?;
    let dataset = state
        .registry
        .insert_dataset(outcome.dataset)
        .map_err(|e| match e.downcast_ref::<registry::DatasetConflict>() {
            Some(c) => ApiError::new(StatusCode::CONFLICT, "dataset_conflict", c.to_string()),
            None => ApiError::internal(e.to_string()),
        })?;
    tracing::info!(
        dataset = dataset.id(),
        signals = dataset.signals().len(),
        "dataset stored"
    );
    Ok((
        StatusCode::CREATED,
        Json(DatasetCreated {
            dataset_id: dataset.id().to_string(),
            summary: dataset_summary(&dataset),
            warnings: outcome.warnings,
        }),
    ))
}

async fn get_dataset(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<DatasetSummary>, ApiError> {
    let ds = state
        .registry
        .dataset(&id)
        .ok_or_else(|| ApiError::not_found("dataset", &id))?;
    Ok(Json(dataset_summary(&ds)))
}

#[derive(Debug, Deserialize)]
struct PageParams {
    limit: Option<usize>,
    offset: Option<usize>,
}

async fn list_signals(
    State(state): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<PageParams>, axum::extract::rejection::QueryRejection>,
) -> Result<Json<SignalPage>, ApiError> {
    let Query(params) = params.map_err(|r| ApiError::bad_request("invalid_query_string", r.body_text()))?;
    let ds = state
        .registry
        .dataset(&id)
        .ok_or_else(|| ApiError::not_found("dataset", &id))?;
    Ok(Json(signal_page(
        &ds,
        params.offset.unwrap_or(0),
        params.limit.unwrap_or(DEFAULT_PAGE_LIMIT),
    )))
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct IndexRequest {
    #[serde(default)]
    pub penalty_config: PenaltyOverrides,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IndexCreated {
    pub index_id: String,
    pub dataset_id: String,
    pub build: BuildConfig,
    pub indexed: usize,
    pub unindexable: Vec<Unindexable>,
}

fn index_info(stored: &registry::StoredIndex) -> IndexCreated {
    IndexCreated {
        index_id: stored.id.clone(),
        dataset_id: stored.dataset.id().to_string(),
        build: stored.index.build.clone(),
        indexed: stored.index.len(),
        unindexable: stored.index.unindexable.clone(),
    }
}

/// The body is optional; an empty body builds with default settings.
async fn create_index(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<IndexCreated>), ApiError> {
    let req: IndexRequest = if body.iter().all(u8::is_ascii_whitespace) {
        IndexRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("invalid_json", e.to_string()))?
    };
    let dataset = state
        .registry
        .dataset(&id)
        .ok_or_else(|| ApiError::not_found("dataset", &id))?;
    let ds = dataset.clone();
    let index = tokio::task::spawn_blocking(move || build(&ds, &req.penalty_config))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let stored = state
        .registry
        .insert_index(dataset, index)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    tracing::info!(index = stored.id, dataset = stored.dataset.id(), "index built");
    Ok((StatusCode::CREATED, Json(index_info(&stored))))
}

async fn get_index(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<IndexCreated>, ApiError> {
    let stored = state
        .registry
        .index(&id)
        .ok_or_else(|| ApiError::not_found("index", &id))?;
    Ok(Json(index_info(&stored)))
}

async fn query(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<QueryRequest>,
) -> Result<Json<QueryResponse>, ApiError> {
    let stored = state
        .registry
        .index(&id)
        .ok_or_else(|| ApiError::not_found("index", &id))?;
    let interpreter = state.interpreter.clone();
    let resp = tokio::task::spawn_blocking(move || {
        run_query((&stored.dataset, &stored.index), &req, interpreter.as_ref())
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(resp))
}

async fn cluster(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<ClusterRequest>,
) -> Result<Json<ClusterResponse>, ApiError> {
    let stored = state
        .registry
        .index(&id)
        .ok_or_else(|| ApiError::not_found("index", &id))?;
    let resp = tokio::task::spawn_blocking(move || run_cluster((&stored.dataset, &stored.index), &req))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(resp))
}

async fn ps_resolve(ApiJson(scene): ApiJson<PsScene>) -> Result<Json<ResolutionSet>, ApiError> {
    scene
        .resolve()
        .map(Json)
        .map_err(|e| ApiError::bad_request("invalid_scene", e))
}
