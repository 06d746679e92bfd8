use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mojikit::executor::Engine;
use mojikit::kinematics::{AxisId, Joint, StructureId};
use mojikit::presets::load_presets;
use mojikit::protocol::LinkConfig;
use mojikit::simulator::{round_tenth, FaultProfile};
use mojikit_service::{router, ServiceConfig, ServiceHandle, StreamEvent, TargetConfig};
use serde_json::Value;
use tower::ServiceExt;

fn start() -> (ServiceHandle, Router) {
    let handle = ServiceHandle::start(ServiceConfig::virtual_simulator()).unwrap();
    let app = router(handle.clone());
    (handle, app)
}

async fn send(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

/// Reads server-sent events from a streaming response body.
struct SseReader {
    body: Body,
    buf: String,
}

impl SseReader {
    async fn open(app: &Router, uri: &str) -> Self {
        let req = Request::builder().uri(uri).body(Body::empty()).unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        SseReader {
            body: resp.into_body(),
            buf: String::new(),
        }
    }

    /// Next (event name, data) pair; keep-alive comments are skipped.
    async fn next(&mut self) -> (String, String) {
        loop {
            if let Some(end) = self.buf.find("\n\n") {
                let raw: String = self.buf.drain(..end + 2).collect();
                let mut name = String::new();
                let mut data = String::new();
                for line in raw.lines() {
                    if let Some(v) = line.strip_prefix("event: ") {
                        name = v.to_string();
                    } else if let Some(v) = line.strip_prefix("data: ") {
                        data = v.to_string();
                    }
                }
                if !data.is_empty() {
                    return (name, data);
                }
                continue;
            }
            let frame = tokio::time::timeout(Duration::from_secs(5), self.body.frame())
                .await
                .expect("event within 5 s")
                .expect("stream open")
                .unwrap();
            if let Ok(chunk) = frame.into_data() {
                self.buf.push_str(std::str::from_utf8(&chunk).unwrap());
            }
        }
    }

    async fn raw(&mut self, n: usize) -> Vec<String> {
        let mut out = Vec::new();
        for _ in 0..n {
            let (name, data) = self.next().await;
            out.push(format!("{name}:{data}"));
        }
        out
    }

    async fn telemetry(&mut self) -> Value {
        let (name, data) = self.next().await;
        assert_eq!(name, "telemetry");
        serde_json::from_str(&data).unwrap()
    }
}

fn angle(ev: &Value, joint: Joint) -> f64 {
    ev["angles"][joint.index()].as_f64().unwrap()
}

#[tokio::test]
async fn validate_reports_without_failing_the_request() {
    let (_, app) = start();
    let doc = load_presets()
        .get("nod")
        .map(|s| mojikit::sequence::export_sequence(s).unwrap())
        .unwrap();
    let (status, body) = send(&app, "POST", "/validate", &doc).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["ok"], true);

    let overlap = r#"{"name":"o","version":1,"tracks":[{"structure":"head","blocks":[
        {"f_deg":0.0,"r_deg":0.0,"speed":1,"delay_ms":0,"start_ms":0,"duration_ms":500},
        {"f_deg":0.0,"r_deg":0.0,"speed":1,"delay_ms":0,"start_ms":400,"duration_ms":500}]}]}"#;
    let (status, body) = send(&app, "POST", "/validate", overlap).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["ok"], false);
    assert!(body["violations"]
        .as_array()
        .unwrap()
        .iter()
        .any(|v| v["kind"] == "overlap"));

    let (status, body) = send(&app, "POST", "/validate", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "parse");
}

#[tokio::test]
async fn play_tail_wag_moves_only_the_tail() {
    let (handle, app) = start();
    let (status, session) = send(&app, "POST", "/play?preset=tail_wag", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(session["state"], "playing");
    assert_eq!(session["target"]["kind"], "simulator");
    let mut stream = SseReader::open(&app, "/telemetry").await;
    stream.telemetry().await;
    handle.advance(150).await.unwrap();
    let wag = Joint::new(StructureId::Tail, AxisId::Wag).unwrap();
    let mut seen = Vec::new();
    for _ in 0..150 {
        let ev = stream.telemetry().await;
        let a = angle(&ev, wag);
        assert!((-90.0..=90.0).contains(&a));
        for j in Joint::all().filter(|j| j.structure != StructureId::Tail) {
            assert_eq!(angle(&ev, j), 0.0);
        }
        seen.push(a);
    }
    let min = seen.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = seen.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(min < -10.0 && max > 10.0, "{min}..{max}");
}

#[tokio::test]
async fn play_errors() {
    let (_, app) = start();
    let (status, body) = send(&app, "POST", "/play?preset=fly", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_preset");

    let (status, _) = send(&app, "POST", "/play", "garbage").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let bad = r#"{"name":"b","version":1,"tracks":[{"structure":"head","blocks":[
        {"f_deg":75.0,"r_deg":0.0,"speed":1,"delay_ms":0,"start_ms":0,"duration_ms":500}]}]}"#;
    let (status, body) = send(&app, "POST", "/play", bad).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["report"]["ok"], false);

    let (status, first) = send(&app, "POST", "/play?preset=nod", "").await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = send(&app, "POST", "/play?preset=nod", "").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "busy");
    let (status, second) = send(&app, "POST", "/play?preset=nod&replace=true", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_ne!(first["session_id"], second["session_id"]);
    let (_, old) = send(
        &app,
        "GET",
        &format!("/session?id={}", first["session_id"]),
        "",
    )
    .await;
    assert_eq!(old["session"]["state"], "stopped");
}

#[tokio::test]
async fn stop_is_idempotent_and_freezes_the_pose() {
    let (handle, app) = start();
    let (_, session) = send(&app, "POST", "/play?preset=head_shake", "").await;
    let id = session["session_id"].as_u64().unwrap();
    handle.advance(10).await.unwrap();
    let body = format!(r#"{{"session_id": {id}}}"#);
    let (status, stopped) = send(&app, "POST", "/stop", &body).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stopped["session"]["state"], "stopped");
    let mut stream = SseReader::open(&app, "/telemetry").await;
    let at_stop = stream.telemetry().await;
    handle.advance(50).await.unwrap();
    for _ in 0..50 {
        let ev = stream.telemetry().await;
        assert_eq!(ev["angles"], at_stop["angles"]);
        assert_eq!(ev["status"], "stopped");
    }
    let (status, again) = send(&app, "POST", "/stop", &body).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["session"]["state"], "stopped");
    let (status, _) = send(&app, "POST", "/stop", r#"{"session_id": 99}"#).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, "POST", "/stop", "").await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn idle_subscription_gets_a_snapshot_first() {
    let (_, app) = start();
    let mut stream = SseReader::open(&app, "/telemetry").await;
    let ev = stream.telemetry().await;
    assert_eq!(ev["t_ms"], 0);
    assert_eq!(ev["status"], "idle");
    assert_eq!(ev["angles"].as_array().unwrap().len(), 16);
    let req = Request::builder()
        .uri("/telemetry?session=4")
        .body(Body::empty())
        .unwrap();
    assert_eq!(
        app.clone().oneshot(req).await.unwrap().status(),
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn nod_stream_matches_the_engine_and_ends_on_target() {
    let (handle, app) = start();
    let nod = load_presets().get("nod").unwrap();
    let mut stream = SseReader::open(&app, "/telemetry").await;
    stream.telemetry().await;
    send(&app, "POST", "/play?preset=nod", "").await;
    let ticks = nod.total_duration_ms() / 20 + 5;
    handle.advance(ticks).await.unwrap();

    let mut engine = Engine::new();
    engine.enqueue(nod).unwrap();
    let pitch = Joint::new(StructureId::Head, AxisId::Pitch).unwrap();
    let mut last = None;
    for _ in 0..ticks {
        let ev = stream.telemetry().await;
        let pose = engine.tick(20);
        assert_eq!(ev["t_ms"], engine.clock_ms());
        for j in Joint::all() {
            assert_eq!(angle(&ev, j), round_tenth(pose.get(j)));
        }
        last = Some(ev);
    }
    let last = last.unwrap();
    let final_block = nod.track(StructureId::Head).unwrap().blocks.last().unwrap();
    assert_eq!(angle(&last, pitch), final_block.f_deg);
    assert_eq!(last["status"], "idle");
    let (_, s) = send(&app, "GET", "/session", "").await;
    assert_eq!(s["session"]["state"], "idle");
}

#[tokio::test]
async fn concurrent_subscribers_see_identical_events() {
    let (handle, app) = start();
    let mut a = SseReader::open(&app, "/telemetry").await;
    let mut b = SseReader::open(&app, "/telemetry").await;
    send(&app, "POST", "/play?preset=greet_combo", "").await;
    handle.advance(40).await.unwrap();
    assert_eq!(a.raw(41).await, b.raw(41).await);
}

#[tokio::test]
async fn decimation_skips_events() {
    let (handle, app) = start();
    let mut s = SseReader::open(&app, "/telemetry?decimate=5").await;
    assert_eq!(s.telemetry().await["t_ms"], 0);
    handle.advance(20).await.unwrap();
    for k in 1..=4 {
        assert_eq!(s.telemetry().await["t_ms"], 100 * k);
    }
    let req = Request::builder()
        .uri("/telemetry?decimate=0")
        .body(Body::empty())
        .unwrap();
    assert_eq!(
        app.clone().oneshot(req).await.unwrap().status(),
        StatusCode::BAD_REQUEST
    );
}

async fn recorded_stream(preset: &str) -> Vec<String> {
    let (handle, app) = start();
    let mut s = SseReader::open(&app, "/telemetry").await;
    send(&app, "POST", &format!("/play?preset={preset}"), "").await;
    handle.advance(120).await.unwrap();
    s.raw(121).await
}

#[tokio::test]
async fn virtual_clock_streams_are_reproducible() {
    assert_eq!(
        recorded_stream("stretch").await,
        recorded_stream("stretch").await
    );
}

#[tokio::test]
async fn tick_route_drives_the_virtual_clock() {
    let (_, app) = start();
    let (status, ev) = send(&app, "POST", "/tick", r#"{"ticks": 3}"#).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ev["t_ms"], 60);

    let wall = router(ServiceHandle::start(ServiceConfig::default()).unwrap());
    let (status, _) = send(&wall, "POST", "/tick", r#"{"ticks": 3}"#).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn wall_clock_ticks_on_its_own() {
    let handle = ServiceHandle::start(ServiceConfig::default()).unwrap();
    let (_, mut rx) = handle.subscribe().await.unwrap();
    let mut last = 0;
    for _ in 0..3 {
        let ev = tokio::time::timeout(Duration::from_secs(2), rx.recv())
            .await
            .unwrap()
            .unwrap();
        let StreamEvent::Telemetry(t) = ev else {
            panic!("unexpected {ev:?}")
        };
        assert!(t.t_ms > last);
        last = t.t_ms;
    }
}

#[tokio::test]
async fn knowledge_endpoints() {
    let (_, app) = start();
    let (_, stats) = send(&app, "GET", "/stats", "").await;
    let greet = stats["intent"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["category"] == "greeting_reunion")
        .unwrap();
    assert_eq!(
        (greet["count"].as_u64(), greet["percent"].as_f64()),
        (Some(7), Some(20.0))
    );

    let (_, cards) = send(&app, "GET", "/cards", "").await;
    assert_eq!(cards.as_array().unwrap().len(), 8);
    let (_, animal) = send(&app, "GET", "/cards?module=animal_centric", "").await;
    assert_eq!(animal.as_array().unwrap().len(), 4);
    let (status, card) = send(&app, "GET", "/cards/environmental_factors", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(card["module"], "environmental");
    let (status, _) = send(&app, "GET", "/cards/unicorn", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = send(&app, "GET", "/cards?module=plants", "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, routine) = send(&app, "GET", "/patterns?trigger=temporal_routine", "").await;
    assert_eq!(routine["total"], 5);
    assert_eq!(routine["items"].as_array().unwrap().len(), 5);
    let (_, page) = send(&app, "GET", "/patterns?offset=30&limit=10", "").await;
    assert_eq!(page["total"], 35);
    let ids: Vec<_> = page["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids, ["G9-1", "G9-2", "G9-3", "G9-4", "G9-5"]);
    let (status, _) = send(&app, "GET", "/patterns?intent=bogus", "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, presets) = send(&app, "GET", "/presets", "").await;
    assert_eq!(presets.as_array().unwrap().len(), 15);
}

#[tokio::test]
async fn knowledge_reads_leave_playback_alone() {
    let (handle, app) = start();
    send(&app, "POST", "/play?preset=roll", "").await;
    handle.advance(7).await.unwrap();
    let before = handle.advance(0).await.unwrap();
    let session = handle.session(None).await.unwrap();
    for uri in [
        "/stats",
        "/cards",
        "/cards/cat_emotions_behaviors",
        "/patterns?affect=ambiguous_mixed",
        "/presets",
    ] {
        send(&app, "GET", uri, "").await;
    }
    assert_eq!(handle.advance(0).await.unwrap(), before);
    assert_eq!(handle.session(None).await.unwrap(), session);
}

#[tokio::test]
async fn link_failures_surface_as_error_events() {
    let config = ServiceConfig {
        faults: FaultProfile::new(1.0, 0.0, 3).unwrap(),
        link: LinkConfig::default(),
        ..ServiceConfig::virtual_simulator()
    };
    let handle = ServiceHandle::start(config).unwrap();
    let app = router(handle.clone());
    let mut s = SseReader::open(&app, "/telemetry").await;
    s.telemetry().await;
    send(&app, "POST", "/play?preset=nod", "").await;
    handle.advance(5).await.unwrap();
    let mut saw_error = false;
    for _ in 0..8 {
        let (name, data) = s.next().await;
        if name == "error" {
            let v: Value = serde_json::from_str(&data).unwrap();
            assert_eq!(v["session_id"], 1);
            saw_error = true;
            break;
        }
    }
    assert!(saw_error);
}

#[tokio::test]
async fn serial_target_must_open() {
    let config = ServiceConfig {
        target: TargetConfig::Serial {
            port: "/nonexistent/tty".into(),
        },
        ..ServiceConfig::virtual_simulator()
    };
    assert!(ServiceHandle::start(config).is_err());
}
