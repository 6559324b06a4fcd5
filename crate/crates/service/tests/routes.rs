use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rasterkit_api::{ErrorResponse, LogSource, ValidateResponse};
use rasterkit_core::io::{sample_log, to_canonical_json};
use tower::ServiceExt;

async fn post(uri: &str, body: serde_json::Value) -> (StatusCode, Vec<u8>) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = rasterkit_service::router().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn sample() -> LogSource {
    LogSource {
        name: "sample.json".into(),
        text: to_canonical_json(&sample_log()),
    }
}

#[tokio::test]
async fn validate_reports_clip_count() {
    let (status, body) = post("/v1/validate", serde_json::json!({ "logs": [sample()] })).await;
    assert_eq!(status, StatusCode::OK);
    let r: ValidateResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.logs[0].clips, 3);
}

#[tokio::test]
async fn schema_error_is_structured() {
    let bad = LogSource {
        name: "bad.json".into(),
        text: "{\n  \"log_id\": 5\n}".into(),
    };
    let (status, body) = post("/v1/validate", serde_json::json!({ "logs": [bad] })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let e: ErrorResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(e.error.kind, "schema_violation");
    assert_eq!(e.error.source.as_deref(), Some("bad.json"));
    assert_eq!(e.error.line, Some(2));
}

#[tokio::test]
async fn render_is_repeatable_ppm() {
    let req = serde_json::json!({ "log": sample(), "t": 3.0 });
    let (s1, a) = post("/v1/render", req.clone()).await;
    let (_, b) = post("/v1/render", req).await;
    assert_eq!(s1, StatusCode::OK);
    assert!(a.starts_with(b"P6\n1024 576\n255\n"));
    assert_eq!(a, b);
}

#[tokio::test]
async fn unknown_agent_is_not_found() {
    let (status, body) = post("/v1/render", serde_json::json!({ "log": sample(), "t": 3.0, "agent": "nobody" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let e: ErrorResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(e.error.kind, "not_found");
}

#[tokio::test]
async fn bad_body_uses_the_error_shape() {
    let (status, body) = post("/v1/augment", serde_json::json!({ "logs": [], "config": { "nope": 1 } })).await;
    assert!(status.is_client_error());
    let e: ErrorResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(e.error.kind, "bad_request");
}

#[tokio::test]
async fn curate_reports_kept_clips() {
    let (status, body) = post("/v1/curate", serde_json::json!({ "logs": [sample()], "threshold": 0.5 })).await;
    assert_eq!(status, StatusCode::OK);
    let r: rasterkit_api::CurateResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.total, sample_log().tracks.len() * 3);
    assert!(r.clips.iter().all(|c| c.kept == (c.clip.valid && c.clip.ade.unwrap() > 0.5)));
    assert_eq!(r.kept, r.clips.iter().filter(|c| c.kept).count());
}

#[tokio::test]
async fn augment_writes_to_the_requested_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = serde_json::json!({ "seed": 3, "workers": 2, "out": out, "fraction_perturbed": 0.0, "cross_agent": false });
    let (status, body) = post("/v1/augment", serde_json::json!({ "logs": [sample()], "config": cfg })).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let s: rasterkit_api::AugmentResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(s.jobs, 3);
    assert!(out.join("manifest.jsonl").is_file());
}
