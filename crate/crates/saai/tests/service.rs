mod common;

use std::path::Path;

use axum::body::{to_bytes, Body, Bytes};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use saai::commands;
use saai::process::ParamUpdate;
use saai::service::{router, ServiceConfig, SessionState, SessionStats};
use saai_core::window::Mode;

const PX: u32 = 128;

fn dataset(dir: &Path) {
    commands::simulate(&common::config(21, 300.0, 10, 1.0, PX), dir).unwrap();
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Bytes) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, to_bytes(res.into_body(), usize::MAX).await.unwrap())
}

async fn json_call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn create(app: &Router, dir: &Path, extra: Value) -> SessionState {
    let mut body = json!({ "source": { "dataset": { "path": dir } } });
    body.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    let (s, v) = json_call(app, Method::POST, "/v1/sessions", Some(body)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    serde_json::from_value(v).unwrap()
}

fn error_of(v: &Value) -> (&str, Option<&str>) {
    (v["error"]["code"].as_str().unwrap(), v["error"]["field"].as_str())
}

fn gray16(png: &[u8]) -> Vec<u16> {
    image::load_from_memory(png).unwrap().into_luma16().into_raw()
}

#[tokio::test]
async fn health_is_ok() {
    let app = router(ServiceConfig::default());
    let (s, v) = json_call(&app, Method::GET, "/v1/health", None).await;
    assert_eq!((s, v), (StatusCode::OK, json!({ "status": "ok" })));
}

#[tokio::test]
async fn dataset_session_loads_the_window() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(ServiceConfig::default());
    let st = create(&app, dir.path(), json!({})).await;
    assert_eq!(st.source, "dataset");
    assert_eq!(st.window, (0..10).collect::<Vec<u64>>());
    assert_eq!(st.params.mode, Mode::Saai);
    assert_eq!((st.params.rx_threshold, st.params.window_size), (90.0, 30));
    assert!(st.playback.exhausted && !st.playback.running);
    assert_eq!(st.version, 1);
    let (s, v) = json_call(&app, Method::GET, "/v1/sessions", None).await;
    assert_eq!((s, v), (StatusCode::OK, json!({ "sessions": [st.id] })));
    let (s, v) = json_call(&app, Method::GET, &format!("/v1/sessions/{}", st.id), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(serde_json::from_value::<SessionState>(v).unwrap(), st);
}

#[tokio::test]
async fn single_session_by_default() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(ServiceConfig::default());
    let first = create(&app, dir.path(), json!({})).await;
    let body = json!({ "source": { "dataset": { "path": dir.path() } } });
    let (s, v) = json_call(&app, Method::POST, "/v1/sessions", Some(body.clone())).await;
    assert_eq!((s, error_of(&v).0), (StatusCode::CONFLICT, "session_limit"));
    let (s, _) = call(&app, Method::DELETE, &format!("/v1/sessions/{}", first.id), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = json_call(&app, Method::POST, "/v1/sessions", Some(body.clone())).await;
    assert_eq!(s, StatusCode::CREATED);

    let multi = router(ServiceConfig {
        max_sessions: 2,
        ..ServiceConfig::default()
    });
    create(&multi, dir.path(), json!({})).await;
    create(&multi, dir.path(), json!({})).await;
}

#[tokio::test]
async fn unknown_sessions_are_404() {
    let app = router(ServiceConfig::default());
    for uri in [
        "/v1/sessions/7",
        "/v1/sessions/abc",
        "/v1/sessions/7/stats",
        "/v1/sessions/7/views/right.png",
    ] {
        let (s, v) = json_call(&app, Method::GET, uri, None).await;
        assert_eq!(
            (s, error_of(&v)),
            (StatusCode::NOT_FOUND, ("unknown_session", None)),
            "{uri}"
        );
    }
    let (s, v) = json_call(
        &app,
        Method::PATCH,
        "/v1/sessions/7/params",
        Some(json!({ "R_x": 95.0 })),
    )
    .await;
    assert_eq!((s, error_of(&v).0), (StatusCode::NOT_FOUND, "unknown_session"));
    let (s, _) = call(&app, Method::DELETE, "/v1/sessions/7", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn threshold_100_blanks_the_saai_view() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(ServiceConfig::default());
    let st = create(&app, dir.path(), json!({})).await;
    let base = format!("/v1/sessions/{}", st.id);
    let (_, before) = call(&app, Method::GET, &format!("{base}/views/right_raw.png"), None).await;
    assert!(gray16(&before).iter().any(|&v| v > 0));
    let (s, v) = json_call(
        &app,
        Method::PATCH,
        &format!("{base}/params"),
        Some(json!({ "R_x": 100.0 })),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["params"]["R_x"], 100.0);
    let (s, raw) = call(&app, Method::GET, &format!("{base}/views/right_raw.png"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(gray16(&raw).iter().all(|&v| v == 0));
    let (_, right) = call(&app, Method::GET, &format!("{base}/views/right.png"), None).await;
    let rgb = image::load_from_memory(&right).unwrap().into_rgb8();
    assert_eq!(rgb.dimensions(), (PX, PX));
    assert!(rgb.into_raw().iter().all(|&v| v == 0));
}

#[tokio::test]
async fn moving_the_focal_plane_rerenders() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(ServiceConfig::default());
    let st = create(&app, dir.path(), json!({ "params": { "mode": "thermal_integral" } })).await;
    let base = format!("/v1/sessions/{}", st.id);
    let view = format!("{base}/views/right_raw.png");
    let (_, before) = call(&app, Method::GET, &view, None).await;
    let (s, v) = json_call(
        &app,
        Method::PATCH,
        &format!("{base}/params"),
        Some(json!({ "FP": st.params.focal_distance + 1.0 })),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let after_state: SessionState = serde_json::from_value(v).unwrap();
    assert_eq!(after_state.version, st.version + 1);
    assert_eq!(after_state.window, st.window);
    let (_, after) = call(&app, Method::GET, &view, None).await;
    assert_ne!(gray16(&before), gray16(&after));
}

#[tokio::test]
async fn invalid_parameters_echo_the_field_and_change_nothing() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(ServiceConfig::default());
    let st = create(&app, dir.path(), json!({})).await;
    let base = format!("/v1/sessions/{}", st.id);
    let (_, before) = call(&app, Method::GET, &format!("{base}/views/right_raw.png"), None).await;
    for (body, field) in [
        (json!({ "R_x": 150.0 }), "R_x"),
        (json!({ "FP": 30.0, "C_n": -1.0 }), "C_n"),
        (json!({ "P_i": 2.0 }), "P_i"),
        (json!({ "R_o": -1.6 }), "R_o"),
        (json!({ "window_size": 0 }), "window_size"),
        (json!({ "window_size": 100000 }), "window_size"),
        (json!({ "epsilon": -1.0 }), "epsilon"),
    ] {
        let (s, v) = json_call(&app, Method::PATCH, &format!("{base}/params"), Some(body.clone())).await;
        assert_eq!(
            (s, error_of(&v)),
            (StatusCode::UNPROCESSABLE_ENTITY, ("invalid_parameter", Some(field))),
            "{body}"
        );
    }
    let (_, v) = json_call(&app, Method::GET, &base, None).await;
    assert_eq!(serde_json::from_value::<SessionState>(v).unwrap(), st);
    let (_, after) = call(&app, Method::GET, &format!("{base}/views/right_raw.png"), None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(ServiceConfig::default());
    let st = create(&app, dir.path(), json!({})).await;
    let base = format!("/v1/sessions/{}", st.id);
    let (s, v) = json_call(
        &app,
        Method::PATCH,
        &format!("{base}/params"),
        Some(json!({ "t": 100.0 })),
    )
    .await;
    assert_eq!((s, error_of(&v).0), (StatusCode::BAD_REQUEST, "bad_request"));
    let (s, v) = json_call(
        &app,
        Method::PATCH,
        &format!("{base}/params"),
        Some(json!({ "mode": "fancy" })),
    )
    .await;
    assert_eq!((s, error_of(&v).0), (StatusCode::BAD_REQUEST, "bad_request"));
    let (s, v) = json_call(
        &app,
        Method::POST,
        &format!("{base}/step"),
        Some(json!({ "count": "two" })),
    )
    .await;
    assert_eq!((s, error_of(&v).0), (StatusCode::BAD_REQUEST, "bad_request"));
    let (s, v) = json_call(&app, Method::GET, &format!("{base}/views/middle.png"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND, "{v}");
}

#[tokio::test]
async fn bad_sources_are_reported() {
    let app = router(ServiceConfig::default());
    let body = json!({ "source": { "dataset": { "path": "/nonexistent/dataset" } } });
    let (s, v) = json_call(&app, Method::POST, "/v1/sessions", Some(body)).await;
    assert_eq!((s, error_of(&v).0), (StatusCode::BAD_REQUEST, "invalid_source"));
    let body = json!({ "source": { "simulation": { "flight": { "count": 0 } } } });
    let (s, v) = json_call(&app, Method::POST, "/v1/sessions", Some(body)).await;
    assert_eq!((s, error_of(&v).0), (StatusCode::BAD_REQUEST, "invalid_source"));
    let (s, _) = json_call(&app, Method::GET, "/v1/sessions", None).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn stepping_and_reset() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(ServiceConfig::default());
    let st = create(
        &app,
        dir.path(),
        json!({ "prefill": 3, "params": { "window_size": 4 } }),
    )
    .await;
    assert_eq!((st.window.clone(), st.playback.cursor), (vec![0, 1, 2], 3));
    let base = format!("/v1/sessions/{}", st.id);
    let (_, v) = json_call(&app, Method::POST, &format!("{base}/step"), None).await;
    assert_eq!(v["window"], json!([0, 1, 2, 3]));
    let (_, v) = json_call(&app, Method::POST, &format!("{base}/step"), Some(json!({ "count": 3 }))).await;
    assert_eq!(v["window"], json!([3, 4, 5, 6]));
    let (_, v) = json_call(
        &app,
        Method::PATCH,
        &format!("{base}/params"),
        Some(json!({ "window_size": 6, "R_x": 95.0 })),
    )
    .await;
    assert_eq!(v["window"], json!([1, 2, 3, 4, 5, 6]));
    let (_, v) = json_call(
        &app,
        Method::POST,
        &format!("{base}/step"),
        Some(json!({ "count": 50 })),
    )
    .await;
    assert_eq!(
        (v["playback"]["cursor"].as_u64(), v["playback"]["exhausted"].as_bool()),
        (Some(10), Some(true))
    );
    assert_eq!(v["window"], json!([4, 5, 6, 7, 8, 9]));
    let (s, v) = json_call(&app, Method::POST, &format!("{base}/reset"), None).await;
    assert_eq!(s, StatusCode::OK);
    let reset: SessionState = serde_json::from_value(v).unwrap();
    assert_eq!(
        (reset.window, reset.params, reset.playback.cursor),
        (st.window, st.params, 3)
    );
    let (_, v) = json_call(&app, Method::GET, &format!("{base}/stats"), None).await;
    let stats: SessionStats = serde_json::from_value(v).unwrap();
    assert_eq!(stats.frames_stepped, 3 + 1 + 3 + 3 + 3);
    assert!(stats.renders >= 6 && stats.render.p95_ms > 0.0);
}

#[tokio::test]
async fn views_need_a_frame() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(ServiceConfig::default());
    let st = create(&app, dir.path(), json!({ "prefill": 0 })).await;
    let base = format!("/v1/sessions/{}", st.id);
    let (s, v) = json_call(&app, Method::GET, &format!("{base}/views/left.png"), None).await;
    assert_eq!((s, error_of(&v).0), (StatusCode::CONFLICT, "no_frames"));
    json_call(&app, Method::POST, &format!("{base}/step"), None).await;
    let (s, left) = call(&app, Method::GET, &format!("{base}/views/left.png"), None).await;
    assert_eq!(s, StatusCode::OK);
    let img = image::load_from_memory(&left).unwrap().into_rgb8();
    assert_eq!(img.dimensions(), (PX, PX));
}

#[tokio::test]
async fn run_replays_until_paused_or_exhausted() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let app = router(ServiceConfig::default());
    let st = create(&app, dir.path(), json!({ "prefill": 1 })).await;
    let base = format!("/v1/sessions/{}", st.id);
    let (s, v) = json_call(
        &app,
        Method::POST,
        &format!("{base}/run"),
        Some(json!({ "cadence_hz": 0.0 })),
    )
    .await;
    assert_eq!(
        (s, error_of(&v)),
        (
            StatusCode::UNPROCESSABLE_ENTITY,
            ("invalid_parameter", Some("cadence_hz"))
        )
    );
    let (s, v) = json_call(
        &app,
        Method::POST,
        &format!("{base}/run"),
        Some(json!({ "cadence_hz": 100.0 })),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["playback"]["running"], true);
    assert_eq!(v["playback"]["cadence_hz"], 100.0);
    let mut cursor = 1;
    for _ in 0..200 {
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
        let (_, v) = json_call(&app, Method::GET, &base, None).await;
        cursor = v["playback"]["cursor"].as_u64().unwrap();
        if v["playback"]["running"] == false {
            break;
        }
    }
    assert_eq!(cursor, 10);
    let (_, v) = json_call(&app, Method::POST, &format!("{base}/reset"), None).await;
    assert_eq!(v["playback"]["cursor"], 1);
    json_call(
        &app,
        Method::POST,
        &format!("{base}/run"),
        Some(json!({ "cadence_hz": 1.0 })),
    )
    .await;
    let (_, v) = json_call(&app, Method::POST, &format!("{base}/pause"), None).await;
    assert_eq!(v["playback"]["running"], false);
    tokio::time::sleep(std::time::Duration::from_millis(1200)).await;
    let (_, v) = json_call(&app, Method::GET, &base, None).await;
    assert_eq!(v["playback"]["cursor"], 1);
}

#[tokio::test]
async fn simulator_sessions_render_live() {
    let app = router(ServiceConfig::default());
    let cfg = common::config(5, 200.0, 6, 1.0, 64);
    let body = json!({ "source": { "simulation": cfg }, "prefill": 2, "params": { "window_size": 3 } });
    let (s, v) = json_call(&app, Method::POST, "/v1/sessions", Some(body)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    assert_eq!(
        (v["source"].as_str(), v["playback"]["frames_total"].as_u64()),
        (Some("simulation"), Some(6))
    );
    let base = format!("/v1/sessions/{}", v["id"]);
    let (_, v) = json_call(&app, Method::POST, &format!("{base}/step"), Some(json!({ "count": 2 }))).await;
    assert_eq!(v["window"], json!([1, 2, 3]));
    let frames = common::flight(&cfg).0;
    let (_, left) = call(&app, Method::GET, &format!("{base}/views/left.png"), None).await;
    let expect = saai::imageio::encode_colormapped_png(&frames[3].image).unwrap();
    assert_eq!(left.as_ref(), expect.as_slice());
}

/// A service render equals `process` with the same parameters, byte for byte.
async fn matches_process(update: ParamUpdate) {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let out = tempfile::tempdir().unwrap();
    let echo = commands::process(dir.path(), &update, out.path()).unwrap();
    let app = router(ServiceConfig::default());
    let params = serde_json::to_value(update).unwrap();
    let st = create(&app, dir.path(), json!({ "params": params })).await;
    assert_eq!(st.params, echo.params);
    assert_eq!(st.plane, echo.plane);
    let base = format!("/v1/sessions/{}", st.id);
    let (_, raw) = call(&app, Method::GET, &format!("{base}/views/right_raw.png"), None).await;
    assert_eq!(
        gray16(&raw),
        gray16(&std::fs::read(out.path().join("raw.png")).unwrap())
    );
    assert_eq!(
        raw.as_ref(),
        std::fs::read(out.path().join("raw.png")).unwrap().as_slice()
    );
    // The same holds after retuning a live session.
    let (_, v) = json_call(
        &app,
        Method::PATCH,
        &format!("{base}/params"),
        Some(json!({ "R_x": 97.0, "FP": 34.0 })),
    )
    .await;
    let tuned: SessionState = serde_json::from_value(v).unwrap();
    let again = tempfile::tempdir().unwrap();
    let update2 = ParamUpdate {
        rx_threshold: Some(97.0),
        focal_distance: Some(34.0),
        ..update
    };
    let echo2 = commands::process(dir.path(), &update2, again.path()).unwrap();
    assert_eq!(tuned.params, echo2.params);
    let (_, raw) = call(&app, Method::GET, &format!("{base}/views/right_raw.png"), None).await;
    assert_eq!(
        raw.as_ref(),
        std::fs::read(again.path().join("raw.png")).unwrap().as_slice()
    );
}

#[tokio::test]
async fn service_matches_process_for_ad_on_integral() {
    matches_process(ParamUpdate {
        mode: Some(Mode::AdOnIntegral),
        rx_threshold: Some(99.0),
        window_size: Some(30),
        ..ParamUpdate::default()
    })
    .await;
}

#[tokio::test]
async fn service_matches_process_for_saai() {
    matches_process(ParamUpdate {
        window_size: Some(30),
        contrast: Some(2.0),
        ..ParamUpdate::default()
    })
    .await;
}
