//! JSON API over the store, consumed by the review dashboard.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/api/matches` | |
//! | POST | `/api/matches` | match metadata |
//! | GET | `/api/matches/{id}` | |
//! | POST | `/api/matches/{id}/annotations` | episode file (CSV) |
//! | POST | `/api/matches/{id}/sensor-data` | `{devices: [{player, device_index?, config, data}]}` |
//! | POST | `/api/matches/{id}/detect` | `{thresholds?}` |
//! | GET | `/api/matches/{id}/warnings?state=` | |
//! | GET | `/api/matches/{id}/events?player=&period=` | |
//! | GET | `/api/warnings/{id}` | |
//! | POST | `/api/warnings/{id}/resolution` | `{action, corrected_description?, episode_id?}` |
//! | GET | `/api/rules` | |
//! | POST | `/api/mine` | `{mining?}` |
//!
//! Errors are `{"error", "message", "fields"?}` with status 400 for
//! unparseable bodies, 404 for unknown ids, 409 for a second resolution and
//! 422 for domain validation.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use footlab_core::mining::MiningParams;
use footlab_core::pipeline::{self, DeviceData, PipelineConfig};
use footlab_core::store::{parse_episode_file, Resolution};
use footlab_core::{AssociationRule, DeviceConfig, Error, ForestModel, MatchMeta, Store, Thresholds, WarningState};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub model: Option<Arc<ForestModel>>,
    pub manual_rules: Arc<Vec<AssociationRule>>,
    pub config: Arc<PipelineConfig>,
}

impl AppState {
    pub fn new(store: Store, model: Option<ForestModel>, manual_rules: Vec<AssociationRule>, config: PipelineConfig) -> Self {
        AppState {
            store: Arc::new(store),
            model: model.map(Arc::new),
            manual_rules: Arc::new(manual_rules),
            config: Arc::new(config),
        }
    }
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            Error::Format(_) | Error::Row { .. } | Error::Decode { .. } | Error::Json(_) => {
                (StatusCode::BAD_REQUEST, "malformed")
            }
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            Error::Validation(_) | Error::Argument(_) | Error::Contract(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "validation")
            }
            Error::Io(_) | Error::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let mut body = json!({ "error": kind, "message": self.0.to_string() });
        if let Error::Validation(fields) = &self.0 {
            body["fields"] = json!(fields);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs store work off the async workers.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> footlab_core::Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(result) => result.map_err(ApiError),
        Err(join) => Err(ApiError(Error::Io(std::io::Error::other(join.to_string())))),
    }
}

fn parse_json<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError(Error::Json(e)))
}

/// Like [`parse_json`], but an empty body yields the default.
fn parse_json_or_default<T: DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        parse_json(body)
    }
}

pub fn router(state: AppState) -> Router {
    let mut app = Router::new()
        .route("/api/matches", get(list_matches).post(create_match))
        .route("/api/matches/{id}", get(get_match))
        .route("/api/matches/{id}/annotations", post(upload_annotations))
        .route("/api/matches/{id}/sensor-data", post(upload_sensor_data))
        .route("/api/matches/{id}/detect", post(run_detect))
        .route("/api/matches/{id}/warnings", get(list_warnings))
        .route("/api/matches/{id}/events", get(list_events))
        .route("/api/warnings/{id}", get(get_warning))
        .route("/api/warnings/{id}/resolution", post(resolve))
        .route("/api/rules", get(list_rules))
        .route("/api/mine", post(run_mine));
    if let Some(dir) = &state.config.ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app.with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn list_matches(State(s): State<AppState>) -> ApiResult<Json<Vec<MatchMeta>>> {
    Ok(Json(blocking(move || s.store.list_matches()).await?))
}

async fn create_match(State(s): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<MatchMeta>)> {
    let meta: MatchMeta = parse_json(&body)?;
    let bad = meta.invalid_fields();
    if !bad.is_empty() {
        return Err(ApiError(Error::Validation(bad)));
    }
    let stored = meta.clone();
    blocking(move || s.store.upsert_match(&stored)).await?;
    Ok((StatusCode::CREATED, Json(meta)))
}

async fn get_match(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<MatchMeta>> {
    Ok(Json(blocking(move || s.store.get_match(&id)).await?))
}

async fn upload_annotations(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let episodes = parse_episode_file(&body)?;
    let match_id = id.clone();
    let stored = blocking(move || s.store.upsert_episodes(&match_id, &episodes)).await?;
    Ok(Json(json!({ "match_id": id, "episodes": stored })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorUpload {
    devices: Vec<DeviceUpload>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceUpload {
    player: String,
    #[serde(default)]
    device_index: u16,
    config: DeviceConfig,
    /// The device file as text.
    data: String,
}

async fn upload_sensor_data(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Vec<footlab_core::ActivityLabelRow>>> {
    let upload: SensorUpload = parse_json(&body)?;
    let Some(model) = s.model.clone() else {
        return Err(ApiError(Error::Validation(vec!["model_file".into()])));
    };
    let devices: Vec<DeviceData> = upload
        .devices
        .into_iter()
        .map(|d| DeviceData { player: d.player, device_index: d.device_index, config: d.config, bytes: d.data.into_bytes() })
        .collect();
    let window = s.config.window;
    let rows = blocking(move || pipeline::ingest_match(&s.store, &id, &devices, &model, window)).await?;
    Ok(Json(rows))
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectRequest {
    #[serde(default)]
    thresholds: Option<Thresholds>,
}

async fn run_detect(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Vec<footlab_core::Warning>>> {
    let request: DetectRequest = parse_json_or_default(&body)?;
    let thresholds = request.thresholds.unwrap_or(s.config.thresholds);
    thresholds.validate()?;
    let warnings = blocking(move || {
        let rules = s.store.rules()?;
        if rules.is_empty() {
            return Err(Error::Validation(vec!["rules".into()]));
        }
        pipeline::detect_match(&s.store, &id, &rules, &thresholds, &s.config.mining)
    })
    .await?;
    Ok(Json(warnings))
}

#[derive(Deserialize)]
struct WarningQuery {
    state: Option<String>,
}

async fn list_warnings(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<WarningQuery>,
) -> ApiResult<Json<Vec<footlab_core::Warning>>> {
    let state = match q.state.as_deref() {
        None | Some("") => None,
        Some(token) => Some(token.parse::<WarningState>().map_err(|_| Error::Validation(vec!["state".into()]))?),
    };
    Ok(Json(blocking(move || s.store.warnings(&id, state)).await?))
}

#[derive(Deserialize)]
struct EventQuery {
    player: Option<String>,
    period: Option<String>,
}

async fn list_events(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventQuery>,
) -> ApiResult<Json<Vec<footlab_core::EventRow>>> {
    let period = match q.period.as_deref() {
        None | Some("") => None,
        Some(token) => Some(token.parse::<u32>().map_err(|_| Error::Validation(vec!["period".into()]))?),
    };
    let player = q.player.filter(|p| !p.is_empty());
    Ok(Json(blocking(move || s.store.query_events(&id, period, player.as_deref())).await?))
}

async fn get_warning(State(s): State<AppState>, Path(id): Path<i64>) -> ApiResult<Json<footlab_core::Warning>> {
    Ok(Json(blocking(move || s.store.get_warning(id)).await?))
}

async fn resolve(State(s): State<AppState>, Path(id): Path<i64>, body: Bytes) -> ApiResult<Json<footlab_core::Warning>> {
    let resolution: Resolution = parse_json(&body)?;
    Ok(Json(blocking(move || s.store.resolve_warning(id, &resolution)).await?))
}

async fn list_rules(State(s): State<AppState>) -> ApiResult<Json<Vec<AssociationRule>>> {
    Ok(Json(blocking(move || s.store.rules()).await?))
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MineRequest {
    #[serde(default)]
    mining: Option<MiningParams>,
}

async fn run_mine(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<Vec<AssociationRule>>> {
    let request: MineRequest = parse_json_or_default(&body)?;
    let params = request.mining.unwrap_or_else(|| s.config.mining.clone());
    let rules = blocking(move || pipeline::mine_store(&s.store, &params, &s.manual_rules)).await?;
    Ok(Json(rules))
}
