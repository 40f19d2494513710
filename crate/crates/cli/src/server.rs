//! Local HTTP service for interactive preset tuning.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use lsynth::annotate::default_min_pixels;
use lsynth::dataset::{render_day, DatasetManifest};
use lsynth::metrics::total_variation;
use lsynth::models::{branch_counts, preset_by_name, preset_names, sample_plant, PlantModelPreset, Species};
use lsynth::render::{encode_image, Light, MIN_RESOLUTION};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

pub const MAX_BATCH: usize = 1000;
pub const MAX_RESOLUTION: u32 = 2048;

/// Named override sets. Each session is replaced wholesale on PUT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub preset: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Session>>>,
    errors: Arc<AtomicU64>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    id: Option<String>,
}

impl ApiError {
    fn bad(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
            id: None,
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
            id: None,
        }
    }

    fn internal(state: &AppState, err: impl std::fmt::Display) -> Self {
        let id = format!("E{:06}", state.errors.fetch_add(1, Ordering::Relaxed) + 1);
        log::error!("{id}: {err}");
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: err.to_string(),
            id: Some(id),
        }
    }

    /// Caller mistakes map to 400, everything else to 500.
    fn from_core(state: &AppState, err: lsynth::Error) -> Self {
        match err {
            lsynth::Error::InvalidArgument(_) | lsynth::Error::DimensionMismatch(_) | lsynth::Error::Parse(_) => {
                ApiError::bad(err.to_string())
            }
            e => ApiError::internal(state, e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(id) = self.id {
            body["error_id"] = Value::String(id);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T>(req: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    req.map(|Json(v)| v).map_err(|e| ApiError::bad(e.body_text()))
}

fn lookup_preset(name: &str) -> ApiResult<PlantModelPreset> {
    preset_by_name(name).ok_or_else(|| ApiError::not_found(format!("unknown preset '{name}'")))
}

/// Preset named in the request or session, with session overrides applied
/// before request overrides.
fn configured_preset(
    state: &AppState,
    preset: Option<&str>,
    session: Option<&str>,
    overrides: &BTreeMap<String, f64>,
) -> ApiResult<PlantModelPreset> {
    let stored = match session {
        Some(name) => Some(
            state
                .sessions
                .read()
                .expect("session lock")
                .get(name)
                .cloned()
                .ok_or_else(|| ApiError::not_found(format!("unknown session '{name}'")))?,
        ),
        None => None,
    };
    let name = preset
        .or(stored.as_ref().map(|s| s.preset.as_str()))
        .ok_or_else(|| ApiError::bad("preset: required unless a session is given"))?;
    let mut p = lookup_preset(name)?;
    let empty = BTreeMap::new();
    let from_session = stored.as_ref().map_or(&empty, |s| &s.overrides);
    for (k, v) in from_session.iter().chain(overrides) {
        p.apply_override(k, *v).map_err(|e| ApiError::bad(format!("overrides.{k}: {e}")))?;
    }
    Ok(p)
}

async fn health() -> &'static str {
    "ok"
}

#[derive(Serialize)]
struct PresetInfo {
    name: String,
    species: Species,
    variant: u32,
    timeline: u32,
    params: Vec<lsynth::models::StochasticParam>,
    target: Option<BTreeMap<u32, f64>>,
}

async fn presets() -> Json<Vec<PresetInfo>> {
    Json(
        preset_names()
            .into_iter()
            .filter_map(|n| preset_by_name(&n))
            .map(|p| PresetInfo {
                name: p.name.clone(),
                species: p.species,
                variant: p.variant,
                timeline: p.timeline,
                params: p.params.clone(),
                target: p.target.clone(),
            })
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    pub preset: Option<String>,
    pub session: Option<String>,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
    /// Defaults to the last simulated day.
    pub day: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub resolution: u32,
    pub min_pixels: Option<usize>,
}

fn default_resolution() -> u32 {
    256
}

async fn render_handler(State(state): State<AppState>, req: Result<Json<RenderRequest>, JsonRejection>) -> ApiResult<Response> {
    let req = body(req)?;
    if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&req.resolution) {
        return Err(ApiError::bad(format!("resolution: must be in {MIN_RESOLUTION}..={MAX_RESOLUTION}")));
    }
    let preset = configured_preset(&state, req.preset.as_deref(), req.session.as_deref(), &req.overrides)?;
    let day = req.day.unwrap_or(preset.timeline);
    if day == 0 || day > preset.timeline {
        return Err(ApiError::bad(format!("day: must be in 1..={}", preset.timeline)));
    }
    let min_pixels = req.min_pixels.unwrap_or_else(|| default_min_pixels(req.resolution, req.resolution));
    let st = state.clone();
    let rendered = tokio::task::spawn_blocking(move || -> lsynth::Result<_> {
        let plant = sample_plant(&preset, req.seed)?;
        let id = format!("{}_s{}_d{day:02}", preset.name, req.seed);
        let (img, _, rec) = render_day(&preset, &plant, day, req.resolution, &Light::default(), min_pixels, &id, 0)?;
        Ok((encode_image(&img)?, rec))
    })
    .await
    .map_err(|e| ApiError::internal(&st, e))?;
    // the request was validated above, so a failure here is a render failure
    let (png, rec) = rendered.map_err(|e| ApiError::internal(&state, e))?;

    let visible = rec.visibility.iter().filter(|v| v.pixels >= min_pixels).count();
    let annotation = json!({
        "image_id": rec.image_id,
        "species": rec.species,
        "task": rec.task,
        "day": rec.day,
        "count": rec.count,
        "visible_organs": visible,
        "organs": rec.visibility.len(),
    });
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    headers.insert("x-count", HeaderValue::from(rec.count));
    headers.insert(
        "x-annotation",
        HeaderValue::from_str(&annotation.to_string()).map_err(|e| ApiError::internal(&state, e))?,
    );
    Ok((headers, png).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchRequest {
    pub preset: Option<String>,
    pub session: Option<String>,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Real manifest to compare against instead of the preset target.
    pub target_manifest: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BatchResponse {
    pub preset: String,
    pub n: usize,
    pub histogram: BTreeMap<u32, usize>,
    pub target: Option<BTreeMap<u32, f64>>,
    /// Total-variation distance to `target`.
    pub distance: Option<f64>,
}

fn manifest_histogram(path: &Path) -> ApiResult<BTreeMap<u32, f64>> {
    if !path.is_file() {
        return Err(ApiError::not_found(format!("manifest '{}' not found", path.display())));
    }
    let m = DatasetManifest::load(path).map_err(|e| ApiError::bad(e.to_string()))?;
    if m.is_empty() {
        return Err(ApiError::bad(format!("manifest '{}' has no records", path.display())));
    }
    Ok(m.count_histogram())
}

async fn simulate_batch(State(state): State<AppState>, req: Result<Json<BatchRequest>, JsonRejection>) -> ApiResult<Json<BatchResponse>> {
    let req = body(req)?;
    if req.n == 0 || req.n > MAX_BATCH {
        return Err(ApiError::bad(format!("n: must be in 1..={MAX_BATCH}")));
    }
    let preset = configured_preset(&state, req.preset.as_deref(), req.session.as_deref(), &req.overrides)?;
    if preset.species != Species::Canola {
        return Err(ApiError::bad("preset: branch histograms need a canola preset"));
    }
    let target = match &req.target_manifest {
        Some(p) => Some(manifest_histogram(p)?),
        None => preset.target_distribution(),
    };
    let st = state.clone();
    let name = preset.name.clone();
    let (n, seed) = (req.n, req.seed);
    let histogram = tokio::task::spawn_blocking(move || branch_counts(&preset, n, seed))
        .await
        .map_err(|e| ApiError::internal(&st, e))?
        .map_err(|e| ApiError::from_core(&state, e))?;
    let distance = target.as_ref().map(|t| {
        let h: BTreeMap<u32, f64> = histogram.iter().map(|(&k, &v)| (k, v as f64)).collect();
        total_variation(&h, t)
    });
    let target = target.map(|t| {
        let s: f64 = t.values().sum();
        t.into_iter().map(|(k, v)| (k, v / s)).collect()
    });
    Ok(Json(BatchResponse {
        preset: name,
        n,
        histogram,
        target,
        distance,
    }))
}

#[derive(Debug, Deserialize)]
pub struct RealQuery {
    pub manifest: Option<PathBuf>,
}

async fn real_distribution(Query(q): Query<RealQuery>) -> ApiResult<Json<Value>> {
    let path = q.manifest.ok_or_else(|| ApiError::bad("manifest: query parameter required"))?;
    let h = manifest_histogram(&path)?;
    let total: f64 = h.values().sum();
    let counts: BTreeMap<u32, usize> = h.iter().map(|(&k, &v)| (k, v as usize)).collect();
    Ok(Json(json!({ "histogram": counts, "total": total as usize })))
}

fn valid_session_name(name: &str) -> bool {
    !name.is_empty() && name.len() <= 64 && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

async fn put_session(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
    req: Result<Json<Session>, JsonRejection>,
) -> ApiResult<Json<Session>> {
    if !valid_session_name(&name) {
        return Err(ApiError::bad("session name: 1-64 characters of [A-Za-z0-9_-]"));
    }
    let session = body(req)?;
    // reject bad presets and overrides at write time
    configured_preset(&state, Some(&session.preset), None, &session.overrides)?;
    state.sessions.write().expect("session lock").insert(name, session.clone());
    Ok(Json(session))
}

async fn get_session(State(state): State<AppState>, UrlPath(name): UrlPath<String>) -> ApiResult<Json<Session>> {
    state
        .sessions
        .read()
        .expect("session lock")
        .get(&name)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown session '{name}'")))
}

/// Routes; `ui` is served as static files for any other path.
pub fn app(ui: Option<PathBuf>) -> Router {
    let router = Router::new()
        .route("/health", get(health))
        .route("/presets", get(presets))
        .route("/render", post(render_handler))
        .route("/simulate-batch", post(simulate_batch))
        .route("/real-distribution", get(real_distribution))
        .route("/sessions/{name}", put(put_session).get(get_session))
        .with_state(AppState::default());
    match ui {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router,
    }
}

pub async fn serve(host: &str, port: u16, ui: Option<PathBuf>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .map_err(|e| anyhow::anyhow!("binding {host}:{port}: {e}"))?;
    log::info!("listening on http://{}", listener.local_addr()?);
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app(ui)).await?;
    Ok(())
}
