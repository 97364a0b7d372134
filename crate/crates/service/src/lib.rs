//! HTTP JSON front end for a trained quality model: prediction, maps,
//! feedback, guided-photography sessions and best-frame selection.

mod error;
mod sessions;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::rejection::{BytesRejection, JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use image::{ImageFormat, RgbImage};
use piqflow_core::data::DistortionCategory;
use piqflow_core::feedback::{
    build_report, full_report, quality_bucket, select_best_frame, FeedbackReport, FrameChoice, GuidedEvent,
    GuidedState, QualityBucket, StepOutput,
};
use piqflow_core::maps::{distortion_maps, quality_map, SpatialMap};
use piqflow_core::predictor::{MultiTaskModel, Prediction};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::ApiError;
use sessions::SessionStore;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub max_image_bytes: usize,
    pub max_frames: usize,
    pub session_ttl_secs: u64,
    /// Allowed CORS origins; `*` allows any. Empty disables CORS headers.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            max_image_bytes: 20 * 1024 * 1024,
            max_frames: 64,
            session_ttl_secs: 30 * 60,
            cors_origins: vec![],
        }
    }
}

struct AppState {
    model: Arc<MultiTaskModel>,
    model_version: String,
    sessions: SessionStore,
    config: ServiceConfig,
}

type Shared = State<Arc<AppState>>;

pub fn model_version(model: &MultiTaskModel) -> String {
    format!(
        "{}-v{}/{}/{}",
        model.format,
        model.version,
        model.mode_name(),
        model.feature_config.id
    )
}

pub fn router(model: MultiTaskModel, config: ServiceConfig) -> Router {
    build(model, config).0
}

fn build(model: MultiTaskModel, config: ServiceConfig) -> (Router, Arc<AppState>) {
    let limit = config.max_image_bytes;
    // base64 inflates by 4/3; leave room for the JSON envelope
    let event_limit = limit / 3 * 4 + 4096;
    let frames_limit = limit.saturating_mul(config.max_frames).saturating_add(64 * 1024);
    let cors = cors_layer(&config.cors_origins);
    let state = Arc::new(AppState {
        model_version: model_version(&model),
        model: Arc::new(model),
        sessions: SessionStore::new(Duration::from_secs(config.session_ttl_secs)),
        config,
    });
    let router = Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict).layer(DefaultBodyLimit::max(limit)))
        .route("/feedback", post(feedback).layer(DefaultBodyLimit::max(limit)))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route(
            "/sessions/{id}/events",
            post(session_event).layer(DefaultBodyLimit::max(event_limit)),
        )
        .route(
            "/select-frame",
            post(select_frame).layer(DefaultBodyLimit::max(frames_limit)),
        )
        .with_state(state.clone());
    let router = match cors {
        Some(layer) => router.layer(layer),
        None => router,
    };
    (router, state)
}

fn cors_layer(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::from(Any)
    } else {
        let list: Vec<HeaderValue> = origins.iter().filter_map(|o| o.parse().ok()).collect();
        AllowOrigin::list(list)
    };
    Some(CorsLayer::new().allow_origin(allow).allow_methods(Any).allow_headers(Any))
}

/// Serves until interrupted, evicting idle sessions once a minute.
pub async fn serve(model: MultiTaskModel, config: ServiceConfig) -> std::io::Result<()> {
    let addr: SocketAddr = config
        .bind
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bind address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let (app, state) = build(model, config);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            state.sessions.evict_expired();
        }
    });
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Decodes PNG or JPEG bytes, enforcing the size limit.
pub fn decode_image(bytes: &[u8], limit: usize) -> Result<RgbImage, ApiError> {
    if bytes.len() > limit {
        return Err(ApiError::too_large(limit));
    }
    match image::guess_format(bytes) {
        Ok(ImageFormat::Png | ImageFormat::Jpeg) => {}
        Ok(other) => return Err(ApiError::undecodable(format!("unsupported image format {other:?}"))),
        Err(_) => return Err(ApiError::undecodable("not a PNG or JPEG image")),
    }
    image::load_from_memory(bytes)
        .map(|img| img.to_rgb8())
        .map_err(|e| ApiError::undecodable(e.to_string()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn body_bytes(body: Result<Bytes, BytesRejection>) -> Result<Bytes, ApiError> {
    body.map_err(|r| ApiError::rejection(r.status(), r.body_text()))
}

async fn health(State(state): Shared) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "model_version": state.model_version }))
}

#[derive(Debug, Default, Deserialize)]
struct PredictParams {
    tile: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MapGrids {
    pub quality: SpatialMap,
    pub distortions: Vec<SpatialMap>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictResponse {
    pub quality: f64,
    pub bucket: QualityBucket,
    pub distortions: BTreeMap<DistortionCategory, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<MapGrids>,
}

pub fn predict_response(model: &MultiTaskModel, img: &RgbImage, tile: Option<u32>) -> piqflow_core::Result<PredictResponse> {
    let p = model.predict(img, None)?;
    let grid = match tile {
        Some(n) => Some(MapGrids {
            quality: quality_map(model, img, n)?,
            distortions: distortion_maps(model, img, n)?,
        }),
        None => None,
    };
    Ok(PredictResponse {
        quality: p.quality,
        bucket: quality_bucket(p.quality.clamp(0.0, 100.0))?,
        distortions: DistortionCategory::ALL
            .into_iter()
            .map(|c| (c, p.distortions.get(c)))
            .collect(),
        grid,
    })
}

async fn predict(
    State(state): Shared,
    params: Result<Query<PredictParams>, QueryRejection>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<PredictResponse>, ApiError> {
    let Query(params) = params.map_err(|r| ApiError::bad_request(r.body_text()))?;
    let bytes = body_bytes(body)?;
    let limit = state.config.max_image_bytes;
    let model = state.model.clone();
    blocking(move || {
        let img = decode_image(&bytes, limit)?;
        Ok(predict_response(&model, &img, params.tile)?)
    })
    .await
    .map(Json)
}

#[derive(Debug, Default, Deserialize)]
struct FeedbackParams {
    #[serde(default)]
    localized: bool,
}

async fn feedback(
    State(state): Shared,
    params: Result<Query<FeedbackParams>, QueryRejection>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<FeedbackReport>, ApiError> {
    let Query(params) = params.map_err(|r| ApiError::bad_request(r.body_text()))?;
    let bytes = body_bytes(body)?;
    let limit = state.config.max_image_bytes;
    let model = state.model.clone();
    blocking(move || {
        let img = decode_image(&bytes, limit)?;
        let report = if params.localized {
            full_report(&*model, &img)?
        } else {
            let p = model.predict(&img, None)?;
            build_report(p.quality.clamp(0.0, 100.0), &p.distortions)?
        };
        Ok(report)
    })
    .await
    .map(Json)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
}

async fn create_session(State(state): Shared) -> (StatusCode, Json<CreatedSession>) {
    let session_id = state.sessions.create();
    (StatusCode::CREATED, Json(CreatedSession { session_id }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub state: GuidedState,
    pub attempts: u32,
    pub last_prediction: Option<Prediction>,
}

fn unknown_session(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
}

async fn get_session(State(state): Shared, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let handle = state.sessions.get(&id).ok_or_else(|| unknown_session(&id))?;
    let entry = handle.lock().await;
    Ok(Json(SessionView {
        session_id: id,
        state: entry.session.state(),
        attempts: entry.session.attempts,
        last_prediction: entry.session.last_prediction.clone(),
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventBody {
    event: String,
    /// Base64-encoded PNG or JPEG, for `capture`.
    image: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EventResponse {
    pub session_id: String,
    pub state: GuidedState,
    pub attempts: u32,
    pub output: StepOutput,
}

fn parse_event(body: EventBody, limit: usize) -> Result<GuidedEvent, ApiError> {
    let event = match body.event.as_str() {
        "capture" => {
            let encoded = body
                .image
                .ok_or_else(|| ApiError::bad_request("capture needs an `image` (base64 PNG or JPEG)"))?;
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(encoded.trim())
                .map_err(|e| ApiError::bad_request(format!("image is not valid base64: {e}")))?;
            GuidedEvent::Capture(decode_image(&bytes, limit)?)
        }
        "request_distortion_feedback" => GuidedEvent::RequestDistortionFeedback,
        "save" => GuidedEvent::Save,
        "retake" => GuidedEvent::Retake,
        other => return Err(ApiError::bad_request(format!("unknown event `{other}`"))),
    };
    Ok(event)
}

async fn session_event(
    State(state): Shared,
    Path(id): Path<String>,
    body: Result<Json<EventBody>, JsonRejection>,
) -> Result<Json<EventResponse>, ApiError> {
    let handle = state.sessions.get(&id).ok_or_else(|| unknown_session(&id))?;
    let mut entry = handle.clone().try_lock_owned().map_err(|_| {
        ApiError::new(
            StatusCode::CONFLICT,
            "session_busy",
            format!("session `{id}` is already processing an event"),
        )
    })?;
    let Json(body) = body.map_err(|r| ApiError::rejection(r.status(), r.body_text()))?;
    let limit = state.config.max_image_bytes;
    let model = state.model.clone();
    blocking(move || {
        let event = parse_event(body, limit)?;
        let output = entry.session.step(event, &*model)?;
        entry.touched = Instant::now();
        Ok(EventResponse {
            session_id: id,
            state: entry.session.state(),
            attempts: entry.session.attempts,
            output,
        })
    })
    .await
    .map(Json)
}

async fn select_frame(State(state): Shared, mut multipart: Multipart) -> Result<Json<FrameChoice>, ApiError> {
    let limit = state.config.max_image_bytes;
    let mut raw = Vec::new();
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::rejection(e.status(), e.body_text()))?
    {
        if raw.len() == state.config.max_frames {
            return Err(ApiError::bad_request(format!(
                "at most {} frames are accepted",
                state.config.max_frames
            )));
        }
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::rejection(e.status(), e.body_text()))?;
        raw.push(bytes);
    }
    if raw.is_empty() {
        return Err(ApiError::bad_request("no frames in the request"));
    }
    let model = state.model.clone();
    blocking(move || {
        let frames = raw
            .iter()
            .enumerate()
            .map(|(i, b)| {
                decode_image(b, limit).map_err(|mut e| {
                    e.body.message = format!("frame {i}: {}", e.body.message);
                    e
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(select_best_frame(&frames, &*model)?)
    })
    .await
    .map(Json)
}
