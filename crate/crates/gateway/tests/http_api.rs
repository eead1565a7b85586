//! The HTTP surface, driven over a real socket.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use base64::Engine as _;
use reqwest::StatusCode;
use serde_json::{json, Value};

use safegate_core::imaging::{encode_png, Frame};
use safegate_core::messaging::{MemoryOutbox, POOR_LIGHTING_MESSAGE};
use safegate_core::perception::{AttributeBackend, DetectionContext, Describer};
use safegate_core::synth::{face_crop, paste, FaceJitter};
use safegate_gateway::server::{parse_time_point, router, AppState, NO_ACTIVITY, TOKEN_HEADER};
use safegate_gateway::{Engine, GatewayConfig, TokenKey};

struct Harness {
    base: String,
    key: TokenKey,
    mem: MemoryOutbox,
    client: reqwest::Client,
    _dir: tempfile::TempDir,
}

async fn start(describer: Describer, tweak: impl FnOnce(&mut GatewayConfig)) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = GatewayConfig {
        store_dir: dir.path().join("store"),
        outbox_dir: dir.path().join("outbox"),
        ..GatewayConfig::default()
    };
    tweak(&mut cfg);
    let mem = MemoryOutbox::default();
    let engine = Engine::builder(cfg.clone())
        .describer(describer)
        .outbox(Arc::new(mem.clone()))
        .build()
        .unwrap();
    let key = TokenKey::generate();
    let state = AppState::new(Arc::new(engine), key.clone(), &cfg);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    Harness { base: format!("http://{addr}"), key, mem, client: reqwest::Client::new(), _dir: dir }
}

impl Harness {
    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn ingest(&self, camera: &str, ts: u64, frame: &Frame, manifest: Option<Value>) -> reqwest::Response {
        let token = self.key.encrypt(&encode_png(frame).unwrap());
        let mut body = json!({ "camera_id": camera, "token": token, "timestamp_ms": ts });
        if let Some(m) = manifest {
            body["manifest"] = m;
        }
        self.client.post(self.url("/ingest")).json(&body).send().await.unwrap()
    }

    async fn ingest_ok(&self, camera: &str, ts: u64, frame: &Frame, manifest: Option<Value>) -> u64 {
        let resp = self.ingest(camera, ts, frame, manifest).await;
        assert_eq!(resp.status(), StatusCode::ACCEPTED);
        resp.json::<Value>().await.unwrap()["result_id"].as_u64().unwrap()
    }

    async fn wait_result(&self, id: u64) -> Value {
        let deadline = Instant::now() + Duration::from_secs(20);
        loop {
            let v: Value = self.client.get(self.url(&format!("/results/{id}"))).send().await.unwrap().json().await.unwrap();
            if v["status"] != "pending" {
                return v;
            }
            assert!(Instant::now() < deadline, "result {id} never finished");
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }

    async fn signed_post(&self, path: &str, body: &Value) -> reqwest::Response {
        let raw = serde_json::to_vec(body).unwrap();
        let token = self.key.encrypt(&raw);
        self.client
            .post(self.url(path))
            .header(TOKEN_HEADER, token)
            .header("content-type", "application/json")
            .body(raw)
            .send()
            .await
            .unwrap()
    }
}

fn png_b64(frame: &Frame) -> String {
    base64::engine::general_purpose::STANDARD.encode(encode_png(frame).unwrap())
}

fn scene(face: bool) -> Frame {
    let mut f = Frame::filled(320, 240, 3, 140).unwrap();
    if face {
        paste(&mut f, &face_crop(7, &FaceJitter::none()), 112, 60);
    }
    f
}

fn reza_manifest() -> Value {
    json!({ "boxes": [{ "kind": "Face", "bbox": [112, 60, 96, 96], "items": ["gun"] }] })
}

const T0: u64 = 1_714_557_600_000; // 2024-05-01 10:00 UTC

#[tokio::test(flavor = "multi_thread")]
async fn frame_to_notification_event_and_recording() {
    let h = start(Describer::default(), |_| {}).await;

    let resp = h
        .client
        .post(h.url("/profile"))
        .json(&json!({
            "name": "Reza",
            "contact": "reza@example.org",
            "images": [{ "png": png_b64(&face_crop(7, &FaceJitter::none())) }],
        }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let enrolled: Value = resp.json().await.unwrap();
    assert_eq!(enrolled["model_version"], 1);

    let quiet = h.ingest_ok("front", T0, &scene(false), None).await;
    let busy = h.ingest_ok("front", T0 + 200, &scene(true), Some(reza_manifest())).await;
    assert_eq!(h.wait_result(quiet).await["report"]["has_activity"], false);
    let done = h.wait_result(busy).await;
    assert_eq!(done["status"], "done");
    let msg = done["report"]["notification"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("Reza") && msg.contains("gun"), "{msg}");

    let recs = h.mem.records();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].subject, msg);

    let events: Value = h.client.get(h.url("/events?since=0")).send().await.unwrap().json().await.unwrap();
    let events = events.as_array().unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["message"], msg.as_str());
    let later: Value = h
        .client
        .get(h.url(&format!("/events?since={}", T0 + 1000)))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert!(later.as_array().unwrap().is_empty());

    let hit: Value = h
        .client
        .get(h.url("/recordings?date=2024-05-01&time=10:00"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(hit["status"], "ok");
    let segs = hit["segments"].as_array().unwrap();
    assert_eq!(segs.len(), 1);
    let frame_ref = segs[0]["frames"][0].as_str().unwrap();
    let media = h.client.get(h.url(&format!("/media/{frame_ref}"))).send().await.unwrap();
    assert_eq!(media.status(), StatusCode::OK);
    assert_eq!(media.headers()["content-type"], "image/png");

    let miss: Value = h
        .client
        .get(h.url("/recordings?date=2024-05-01&time=12:00"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(miss["status"], NO_ACTIVITY);
    assert!(miss["segments"].as_array().unwrap().is_empty());

    let bad = h.client.get(h.url("/recordings?date=2024-13-01&time=10:00")).send().await.unwrap();
    assert_eq!(bad.status(), StatusCode::BAD_REQUEST);
    let traversal = h.client.get(h.url("/media/recordings/../safegate.json")).send().await.unwrap();
    assert_eq!(traversal.status(), StatusCode::NOT_FOUND);

    let health: Value = h.client.get(h.url("/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(health["persons"], 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_tokens_and_bad_frames_are_rejected_without_side_effects() {
    let h = start(Describer::default(), |_| {}).await;

    let body = json!({ "camera_id": "front", "token": "not-a-token" });
    let resp = h.client.post(h.url("/ingest")).json(&body).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::UNAUTHORIZED);

    let other = TokenKey::generate().encrypt(&encode_png(&scene(true)).unwrap());
    let body = json!({ "camera_id": "front", "token": other });
    let resp = h.client.post(h.url("/ingest")).json(&body).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::UNAUTHORIZED);

    let body = json!({ "camera_id": "front", "token": h.key.encrypt(b"definitely not a png") });
    let resp = h.client.post(h.url("/ingest")).json(&body).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);

    // The service keeps working afterwards.
    let id = h.ingest_ok("front", T0, &scene(false), None).await;
    assert_eq!(h.wait_result(id).await["status"], "done");

    let recs: Value = h.client.get(h.url("/recordings?date=2024-05-01&time=10:00")).send().await.unwrap().json().await.unwrap();
    assert_eq!(recs["status"], NO_ACTIVITY);
    assert!(h.mem.records().is_empty());
}

#[tokio::test(flavor = "multi_thread")]
async fn enrollment_reports_guidance_labels() {
    let h = start(Describer::default(), |_| {}).await;
    let frame = Frame::filled(640, 480, 3, 90).unwrap();
    let resp = h
        .client
        .post(h.url("/profile"))
        .json(&json!({
            "name": "Ana",
            "images": [
                { "png": png_b64(&frame), "face": [4, 200, 100, 100] },
                { "png": png_b64(&frame), "face": [560, 10, 100, 100] },
            ],
        }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::UNPROCESSABLE_ENTITY);
    let v: Value = resp.json().await.unwrap();
    assert_eq!(v["labels"], json!(["Face in left edge", "Face in top right"]));

    let resp = h
        .client
        .post(h.url("/profile"))
        .json(&json!({ "name": "Ana", "images": [{ "png": "@@@" }] }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);

    // Re-enrolling the same name keeps the id and bumps the model version.
    let crop = |s| png_b64(&face_crop(3, &FaceJitter::seeded(s)));
    let mut ids = Vec::new();
    for round in 0..2u64 {
        let v: Value = h
            .client
            .post(h.url("/profile"))
            .json(&json!({ "name": "Ana", "images": [{ "png": crop(round) }, { "png": crop(round + 10) }] }))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        assert_eq!(v["model_version"], round + 1);
        ids.push(v["person_id"].clone());
    }
    assert_eq!(ids[0], ids[1]);
}

#[tokio::test(flavor = "multi_thread")]
async fn door_commands_need_a_matching_token() {
    let h = start(Describer::default(), |c| c.relock_interval_s = 1).await;

    let v: Value = h.client.get(h.url("/door")).send().await.unwrap().json().await.unwrap();
    assert_eq!(v["state"], "locked");
    assert_eq!(v["powered"], true);

    let open = json!({ "command": "open" });
    let unsigned = h.client.post(h.url("/door")).json(&open).send().await.unwrap();
    assert_eq!(unsigned.status(), StatusCode::UNAUTHORIZED);

    // A valid token over a different body does not authorise this one.
    let replay = h
        .client
        .post(h.url("/door"))
        .header(TOKEN_HEADER, h.key.encrypt(br#"{"command":"close"}"#))
        .header("content-type", "application/json")
        .body(serde_json::to_vec(&open).unwrap())
        .send()
        .await
        .unwrap();
    assert_eq!(replay.status(), StatusCode::UNAUTHORIZED);
    let v: Value = h.client.get(h.url("/door")).send().await.unwrap().json().await.unwrap();
    assert_eq!(v["state"], "locked");

    let v: Value = h.signed_post("/door", &open).await.json().await.unwrap();
    assert_eq!(v["state"], "unlocked");
    assert!(v["relock_deadline"].as_u64().unwrap() > v["now_ms"].as_u64().unwrap());

    tokio::time::sleep(Duration::from_millis(1300)).await;
    let v: Value = h.client.get(h.url("/door")).send().await.unwrap().json().await.unwrap();
    assert_eq!(v["state"], "locked", "relocks after the interval");
    assert!(v["relock_deadline"].is_null());

    h.signed_post("/door", &open).await;
    let v: Value = h.signed_post("/door/power", &json!({ "powered": false })).await.json().await.unwrap();
    assert_eq!(v["state"], "locked");
    assert_eq!(v["powered"], false);
    let resp = h.signed_post("/door", &open).await;
    assert_eq!(resp.status(), StatusCode::CONFLICT);
    let v: Value = h.signed_post("/door/power", &json!({ "powered": true })).await.json().await.unwrap();
    assert_eq!(v["state"], "locked");
}

#[tokio::test(flavor = "multi_thread")]
async fn guidance_and_emergency() {
    let h = start(Describer::default(), |_| {}).await;
    let label = |b: [i64; 4]| {
        let c = h.client.clone();
        let url = h.url("/guidance");
        async move {
            let v: Value = c
                .post(url)
                .json(&json!({ "window_w": 640, "window_h": 480, "box": b }))
                .send()
                .await
                .unwrap()
                .json()
                .await
                .unwrap();
            v["label"].as_str().unwrap().to_string()
        }
    };
    assert_eq!(label([270, 190, 100, 100]).await, "Face in center");
    assert_eq!(label([560, 10, 100, 100]).await, "Face in top right");
    assert_eq!(label([300, 200, 16, 16]).await, "Face is small. come closer");

    let v: Value = h
        .client
        .post(h.url("/guidance"))
        .json(&json!({
            "window_w": 640, "window_h": 480, "box": [270, 190, 100, 100],
            "orientation": [{ "t_ms": 0, "angle_deg": 0.0 }, { "t_ms": 500, "angle_deg": 30.0 }],
        }))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(v["warning"], "too fast");

    let resp = h
        .client
        .post(h.url("/guidance"))
        .json(&json!({ "window_w": 640, "window_h": 480, "box": [0, 0, 0, 10] }))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);

    let resp = h.signed_post("/emergency", &json!({ "camera_id": "front" })).await;
    assert_eq!(resp.status(), StatusCode::ACCEPTED);
    let recs = h.mem.records();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].channel.to_string(), "call");
    assert_ne!(recs[0].subject, POOR_LIGHTING_MESSAGE);
}

struct SlowAttributes(Duration);

impl AttributeBackend for SlowAttributes {
    fn attributes(
        &self,
        _frame: &Frame,
        _person: &safegate_core::imaging::BBox,
        _face: Option<&safegate_core::imaging::BBox>,
        _ctx: &DetectionContext<'_>,
    ) -> safegate_core::Result<Vec<String>> {
        std::thread::sleep(self.0);
        Ok(vec!["hat".into()])
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn ack_does_not_wait_for_perception() {
    let slow = Duration::from_millis(1500);
    let describer = Describer { attributes: Arc::new(SlowAttributes(slow)), ..Describer::default() };
    let h = start(describer, |_| {}).await;

    h.wait_result(h.ingest_ok("front", T0, &scene(false), None).await).await;
    let sent = Instant::now();
    let resp = h.ingest("front", T0 + 100, &scene(true), Some(reza_manifest())).await;
    let ack = sent.elapsed();
    assert_eq!(resp.status(), StatusCode::ACCEPTED);
    let id = resp.json::<Value>().await.unwrap()["result_id"].as_u64().unwrap();
    assert!(ack < slow / 3, "ack took {ack:?}");

    let pending = h.client.get(h.url(&format!("/results/{id}"))).send().await.unwrap();
    assert_eq!(pending.status(), StatusCode::ACCEPTED);
    let done = h.wait_result(id).await;
    assert!(sent.elapsed() >= slow);
    assert!(done["report"]["notification"]["message"].as_str().unwrap().contains("hat"));
}

#[test]
fn recordings_window_starts_at_the_minute() {
    assert_eq!(parse_time_point("2024-05-01", "10:00").unwrap(), T0);
}
