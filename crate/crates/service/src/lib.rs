//! The rasterkit operations behind an axum router. Handlers parse and
//! validate their inputs, then run the CPU-bound work on the blocking pool.

use std::net::SocketAddr;

use axum::extract::rejection::JsonRejection;
use axum::extract::DefaultBodyLimit;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rasterkit_api::{
    AlignDemoRequest, AlignDemoResponse, AugmentRequest, AugmentResponse, CurateRequest, CurateResponse, CuratedClip,
    ErrorBody, ErrorResponse, Health, LogSource, LogSummary, RenderRequest, ValidateRequest, ValidateResponse,
};
use rasterkit_core::align::{align_demo, synthesize};
use rasterkit_core::augment::{clip_windows, curate, render_view, CandidateClip, ClipConfig};
use rasterkit_core::io::{parse_log, run_batch, SceneLog};
use rasterkit_core::raster::{png_bytes, ppm_bytes, ImageFormat};
use tokio::net::TcpListener;

/// Request bodies carry whole logs.
pub const BODY_LIMIT: usize = 512 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn core(e: rasterkit_core::Error) -> ApiError {
        use rasterkit_core::Error as E;
        let status = match &e {
            E::NotFound { .. } => StatusCode::NOT_FOUND,
            E::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            E::Malformed { .. } | E::Schema { .. } | E::Invariant { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            body: ErrorBody::from_core(&e),
        }
    }

    fn in_log(e: rasterkit_core::Error, name: &str) -> ApiError {
        let mut err = ApiError::core(e);
        err.body.source = Some(name.to_string());
        err
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError {
            status: r.status(),
            body: ErrorBody::new("bad_request", r.body_text()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorResponse { error: self.body })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.unwrap_or_else(|e| {
        Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody::new("internal", format!("worker failed: {e}")),
        })
    })
}

fn parse_all(logs: &[LogSource]) -> ApiResult<Vec<SceneLog>> {
    logs.iter().map(|l| parse_log(&l.text).map_err(|e| ApiError::in_log(e, &l.name))).collect()
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

async fn validate(req: Result<Json<ValidateRequest>, JsonRejection>) -> ApiResult<Json<ValidateResponse>> {
    let Json(req) = req?;
    blocking(move || {
        let logs = parse_all(&req.logs)?;
        let clips = ClipConfig::default();
        let logs = req
            .logs
            .iter()
            .zip(&logs)
            .map(|(src, log)| LogSummary {
                name: src.name.clone(),
                log_id: log.log_id.clone(),
                frames: log.timestamps.len(),
                tracks: log.tracks.len(),
                cameras: log.cameras.len(),
                clips: clip_windows(&log.timestamps, &clips).len(),
            })
            .collect();
        Ok(Json(ValidateResponse { logs }))
    })
    .await
}

async fn render(req: Result<Json<RenderRequest>, JsonRejection>) -> ApiResult<Response> {
    let Json(req) = req?;
    blocking(move || {
        let log = parse_log(&req.log.text).map_err(|e| ApiError::in_log(e, &req.log.name))?;
        let fb = render_view(&log, req.t, req.agent.as_deref(), req.camera.as_deref(), &req.render).map_err(ApiError::core)?;
        let (bytes, mime) = match req.format {
            ImageFormat::Ppm => (ppm_bytes(&fb), "image/x-portable-pixmap"),
            ImageFormat::Png => (png_bytes(&fb).map_err(ApiError::core)?, "image/png"),
        };
        Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
    })
    .await
}

async fn augment(req: Result<Json<AugmentRequest>, JsonRejection>) -> ApiResult<Json<AugmentResponse>> {
    let Json(req) = req?;
    blocking(move || {
        let logs = parse_all(&req.logs)?;
        let summary = run_batch(&req.config, &logs).map_err(ApiError::core)?;
        tracing::info!(jobs = summary.jobs, images = summary.images, out = %summary.out.display(), "batch written");
        Ok(Json(summary))
    })
    .await
}

async fn curate_clips(req: Result<Json<CurateRequest>, JsonRejection>) -> ApiResult<Json<CurateResponse>> {
    let Json(req) = req?;
    blocking(move || {
        req.clips.validate().map_err(ApiError::core)?;
        if req.threshold.is_nan() {
            return Err(ApiError::core(rasterkit_core::Error::Config("threshold is NaN".into())));
        }
        let logs = parse_all(&req.logs)?;
        let mut candidates = Vec::new();
        for log in &logs {
            for id in &req.agents {
                if log.track(id).is_none() && logs.len() == 1 {
                    return Err(ApiError::core(rasterkit_core::Error::NotFound {
                        kind: "agent",
                        id: id.clone(),
                    }));
                }
            }
            let windows = clip_windows(&log.timestamps, &req.clips);
            for track in log.tracks.iter().filter(|t| req.agents.is_empty() || req.agents.iter().any(|a| a == t.id())) {
                for w in &windows {
                    candidates.push(CandidateClip::assess(&log.log_id, &track.trajectory, *w, &req.clips));
                }
            }
        }
        let kept = curate(&candidates, req.threshold);
        let clips: Vec<CuratedClip> = candidates
            .into_iter()
            .map(|clip| CuratedClip {
                kept: kept.contains(&clip),
                clip,
            })
            .collect();
        Ok(Json(CurateResponse {
            threshold: req.threshold,
            total: clips.len(),
            valid: clips.iter().filter(|c| c.clip.valid).count(),
            kept: kept.len(),
            clips,
        }))
    })
    .await
}

async fn align(req: Result<Json<AlignDemoRequest>, JsonRejection>) -> ApiResult<Json<AlignDemoResponse>> {
    let Json(req) = req?;
    blocking(move || {
        let data = synthesize(&req.config).map_err(ApiError::core)?;
        let aligned = align_demo(&data, &req.config).map_err(ApiError::core)?;
        let baseline = if req.baseline {
            Some(align_demo(&data, &req.config.baseline()).map_err(ApiError::core)?)
        } else {
            None
        };
        Ok(Json(AlignDemoResponse { aligned, baseline }))
    })
    .await
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        body: ErrorBody::new("not_found", "no such route"),
    }
}

pub fn router() -> Router {
    use rasterkit_api as api;
    Router::new()
        .route(api::HEALTH, get(health))
        .route(api::VALIDATE, post(validate))
        .route(api::RENDER, post(render))
        .route(api::AUGMENT, post(augment))
        .route(api::CURATE, post(curate_clips))
        .route(api::ALIGN_DEMO, post(align))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
}

/// Serves until the process is interrupted.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Binds `addr` and serves on a background task; returns the bound address.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router()).await {
            tracing::error!("server stopped: {e}");
        }
    });
    Ok(local)
}
