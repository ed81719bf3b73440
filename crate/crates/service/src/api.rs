//! HTTP API.
//!
//! Scenarios are accepted as JSON (`Content-Type: application/json`) or TOML
//! (anything else); responses are JSON except map and report CSV downloads.
//! Scenario versions are exposed as `ETag`; `PUT`/`DELETE` with a stale
//! `If-Match` get 409.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use eloran_core::coverage::Scenario;
use eloran_core::geodata::TerrainClassTable;
use eloran_core::jitter::{read_tor_log, write_jitter_report};
use serde::Deserialize;
use serde_json::json;

use crate::error::ServiceError;
use crate::jobs::JobManager;
use crate::report::{build_jitter_report, JitterOptions};
use crate::store::{ScenarioStore, StoredScenario};

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<ScenarioStore>,
    pub jobs: Arc<JobManager>,
}

impl AppState {
    pub fn new(store: ScenarioStore) -> Self {
        Self {
            store: Arc::new(store),
            jobs: Arc::new(JobManager::new()),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/scenarios", post(create_scenario).get(list_scenarios))
        .route(
            "/api/scenarios/:id",
            get(get_scenario).put(replace_scenario).delete(delete_scenario),
        )
        .route("/api/scenarios/:id/compute", post(compute))
        .route("/api/scenarios/:id/accuracy-map", get(accuracy_map))
        .route("/api/jobs/:id", get(job_status).delete(cancel_job))
        .route("/api/jitter-estimates", post(jitter_estimates))
        .route("/api/meta/terrain-classes", get(terrain_classes))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// A day of 1 Hz TOR records for a few stations is tens of megabytes.
const MAX_BODY_BYTES: usize = 256 * 1024 * 1024;

type ApiResult = Result<Response, ServiceError>;

fn parse_scenario(headers: &HeaderMap, body: &[u8]) -> Result<Scenario, ServiceError> {
    let text = std::str::from_utf8(body).map_err(|_| ServiceError::BadRequest("body is not UTF-8".into()))?;
    let is_json = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.contains("json"));
    Ok(if is_json {
        Scenario::from_json_str(text)?
    } else {
        Scenario::from_toml_str(text)?
    })
}

/// `If-Match: "3"` -> Some(3); `*` or absent -> None.
fn if_match(headers: &HeaderMap) -> Result<Option<u64>, ServiceError> {
    let Some(v) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let v = v.to_str().map_err(|_| ServiceError::BadRequest("unreadable If-Match".into()))?.trim();
    if v == "*" {
        return Ok(None);
    }
    v.trim_start_matches("W/")
        .trim_matches('"')
        .parse()
        .map(Some)
        .map_err(|_| ServiceError::BadRequest(format!("If-Match `{v}` is not a scenario version")))
}

fn with_etag(status: StatusCode, s: StoredScenario) -> Response {
    let etag = HeaderValue::from_str(&format!("\"{}\"", s.version)).expect("ascii");
    let mut resp = (status, Json(s)).into_response();
    resp.headers_mut().insert(header::ETAG, etag);
    resp
}

async fn create_scenario(State(st): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let scenario = parse_scenario(&headers, &body)?;
    let stored = st.store.create(scenario)?;
    let location = HeaderValue::from_str(&format!("/api/scenarios/{}", stored.id)).expect("ascii");
    let mut resp = with_etag(StatusCode::CREATED, stored);
    resp.headers_mut().insert(header::LOCATION, location);
    Ok(resp)
}

async fn list_scenarios(State(st): State<AppState>) -> ApiResult {
    Ok(Json(st.store.list()).into_response())
}

async fn get_scenario(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st
        .store
        .get(&id)
        .ok_or_else(|| ServiceError::NotFound(format!("scenario {id}")))?;
    Ok(with_etag(StatusCode::OK, s))
}

async fn replace_scenario(
    State(st): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let scenario = parse_scenario(&headers, &body)?;
    let stored = st.store.replace(&id, scenario, if_match(&headers)?)?;
    Ok(with_etag(StatusCode::OK, stored))
}

async fn delete_scenario(State(st): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    st.store.delete(&id, if_match(&headers)?)?;
    st.jobs.cancel_scenario(&id);
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn compute(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (store, jobs) = (st.store.clone(), st.jobs.clone());
    // loading rasters and curves is blocking work
    let status = tokio::task::spawn_blocking(move || jobs.submit(&store, &id))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok((StatusCode::ACCEPTED, Json(status)).into_response())
}

async fn job_status(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st
        .jobs
        .status(&id)
        .ok_or_else(|| ServiceError::NotFound(format!("job {id}")))?;
    Ok(Json(s).into_response())
}

async fn cancel_job(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st
        .jobs
        .cancel(&id)
        .ok_or_else(|| ServiceError::NotFound(format!("job {id}")))?;
    Ok(Json(s).into_response())
}

#[derive(Debug, Deserialize)]
struct MapQuery {
    format: Option<String>,
}

async fn accuracy_map(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<MapQuery>) -> ApiResult {
    let grid = st
        .store
        .grid(&id)?
        .ok_or_else(|| ServiceError::NotFound(format!("accuracy map of scenario {id}")))?;
    match q.format.as_deref().unwrap_or("geojson") {
        "geojson" => Ok((
            [(header::CONTENT_TYPE, "application/geo+json")],
            grid.to_geojson().to_string(),
        )
            .into_response()),
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv")], grid.to_csv()).into_response()),
        other => Err(ServiceError::BadRequest(format!("unknown format `{other}` (geojson or csv)"))),
    }
}

#[derive(Debug, Deserialize)]
struct JitterQuery {
    #[serde(flatten)]
    options: JitterOptions,
    format: Option<String>,
}

async fn jitter_estimates(State(_): State<AppState>, Query(q): Query<JitterQuery>, body: Bytes) -> ApiResult {
    let report = tokio::task::spawn_blocking(move || {
        let rows = read_tor_log(body.as_ref())?;
        build_jitter_report(&rows, &q.options)
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    match q.format.as_deref().unwrap_or("json") {
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv")], write_jitter_report(&report)).into_response()),
        "json" => Ok(Json(json!({
            "metadata": report.metadata.iter().cloned().collect::<std::collections::BTreeMap<_, _>>(),
            "rows": report.rows,
            "errors": report.errors.iter().map(|(site, station, message)| json!({
                "site_id": site, "station_id": station, "message": message,
            })).collect::<Vec<_>>(),
            "averages": report.averages,
        }))
        .into_response()),
        other => Err(ServiceError::BadRequest(format!("unknown format `{other}` (json or csv)"))),
    }
}

async fn terrain_classes() -> ApiResult {
    Ok(Json(TerrainClassTable::default().entries().to_vec()).into_response())
}
