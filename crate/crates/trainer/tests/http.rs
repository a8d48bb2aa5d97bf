use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use base64::Engine;
use http_body_util::BodyExt;
use pronunciation_core::alignment::format_alignment;
use pronunciation_core::synth::{synthesize, SynthOptions};
use pronunciation_core::visual::parse_script;
use pronunciation_core::PhonemeClassTable;
use pronunciation_trainer::{router, ServiceConfig, TrainerService};
use serde_json::{json, Value};
use tower::ServiceExt;

const BOUNDARY: &str = "XBOUNDARYX";

fn app(dir: &std::path::Path) -> axum::Router {
    let svc = TrainerService::open(ServiceConfig::with_data_dir(dir)).unwrap();
    router(Arc::new(svc))
}

fn wav(symbols: &[&str]) -> Vec<u8> {
    let opts = SynthOptions {
        f0_hz: 110.0,
        seed: 5,
        ..SynthOptions::default()
    };
    synthesize(symbols, &PhonemeClassTable::default(), &opts)
        .unwrap()
        .audio
        .to_wav_bytes()
}

fn multipart(fields: &[(&str, &[u8])]) -> Body {
    let mut body = Vec::new();
    for (name, value) in fields {
        body.extend(format!("--{BOUNDARY}\r\n").bytes());
        if *name == "audio" {
            body.extend(
                "Content-Disposition: form-data; name=\"audio\"; filename=\"a.wav\"\r\nContent-Type: audio/wav\r\n\r\n"
                    .bytes(),
            );
        } else {
            body.extend(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").bytes());
        }
        body.extend_from_slice(value);
        body.extend(b"\r\n");
    }
    body.extend(format!("--{BOUNDARY}--\r\n").bytes());
    Body::from(body)
}

async fn send(app: &axum::Router, req: Request<Body>) -> (StatusCode, Vec<u8>, String) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_owned())
        .unwrap_or_default();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes, ctype)
}

async fn json_call(
    app: &axum::Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(b) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(b.to_string())
        }
        None => Body::empty(),
    };
    let (status, bytes, _) = send(app, req.body(body).unwrap()).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn attempt(
    app: &axum::Router,
    learner: &str,
    fields: &[(&str, &[u8])],
) -> (StatusCode, Value) {
    let req = Request::post(format!("/learners/{learner}/attempts"))
        .header(
            header::CONTENT_TYPE,
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(multipart(fields))
        .unwrap();
    let (status, bytes, _) = send(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn learner_lifecycle_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let (s, a) = json_call(
        &app,
        "POST",
        "/learners",
        Some(json!({"display_name": "Ivy"})),
    )
    .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(a["format_version"], 1);
    let (_, b) = json_call(
        &app,
        "POST",
        "/learners",
        Some(json!({"display_name": "Ivy"})),
    )
    .await;
    assert_ne!(a["learner_id"], b["learner_id"]);
    let id = a["learner_id"].as_str().unwrap().to_owned();

    let (s, report) = json_call(&app, "GET", &format!("/learners/{id}/report"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(report["attempts"], 0);
    assert_eq!(report["classes"], json!([]));

    let audio = wav(&["HH", "AH", "L", "OW"]);
    let (s, bundle) = attempt(
        &app,
        &id,
        &[
            ("node_id", b"cafe-hello"),
            ("course_id", b"cafe"),
            ("audio", &audio),
        ],
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{bundle}");
    assert_eq!(bundle["format_version"], 1);
    assert_eq!(bundle["scorecard"]["segments"].as_array().unwrap().len(), 4);

    let script_id = bundle["artifacts"]["animation_script"].as_str().unwrap();
    let (s, bytes, ctype) = send(
        &app,
        Request::get(format!("/artifacts/{script_id}"))
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype, "application/json");
    parse_script(std::str::from_utf8(&bytes).unwrap()).unwrap();
    let audio_id = bundle["artifacts"]["exaggerated_audio"].as_str().unwrap();
    let (s, bytes, ctype) = send(
        &app,
        Request::get(format!("/artifacts/{audio_id}"))
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ctype, "audio/wav");
    assert_eq!(&bytes[..4], b"RIFF");

    let (_, report) = json_call(&app, "GET", &format!("/learners/{id}/report"), None).await;
    assert_eq!(report["attempts"], 1);
    assert!(!report["classes"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn errors_carry_stage_and_code() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, e) = json_call(&app, "GET", "/learners/ghost/report", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(e["code"], "unknown_learner");
    assert_eq!(e["format_version"], 1);
    assert!(e["stage"].is_string() && e["message"].is_string());

    let (_, l) = json_call(
        &app,
        "POST",
        "/learners",
        Some(json!({"display_name": "Jo"})),
    )
    .await;
    let id = l["learner_id"].as_str().unwrap();
    let (s, e) = attempt(
        &app,
        id,
        &[("node_id", b"cafe-hello"), ("audio", b"not a wav")],
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["code"], "bad_audio");
    assert_eq!(e["stage"], "ingest");
    let (s, e) = attempt(&app, id, &[("node_id", b"cafe-hello")]).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["code"], "validation_error");

    let (s, e) = json_call(&app, "POST", "/learners", Some(json!({"name": "x"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{e}");
    let (s, _) = json_call(&app, "GET", "/courses/none", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, e) = send(
        &app,
        Request::get("/artifacts/missing")
            .body(Body::empty())
            .unwrap(),
    )
    .await
    .into_json();
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(e["code"], "unknown_artifact");
}

trait IntoJson {
    fn into_json(self) -> (StatusCode, Value);
}

impl IntoJson for (StatusCode, Vec<u8>, String) {
    fn into_json(self) -> (StatusCode, Value) {
        (self.0, serde_json::from_slice(&self.1).unwrap())
    }
}

#[tokio::test]
async fn courses_list_advance_and_create() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, list) = json_call(&app, "GET", "/courses", None).await;
    assert_eq!(s, StatusCode::OK);
    let ids: Vec<&str> = list["courses"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["course_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["basics", "cafe"]);
    let (_, cafe) = json_call(&app, "GET", "/courses/cafe", None).await;
    assert_eq!(cafe["kind"], "participatory");

    let (_, l) = json_call(
        &app,
        "POST",
        "/learners",
        Some(json!({"display_name": "Kit"})),
    )
    .await;
    let id = l["learner_id"].as_str().unwrap();
    let uri = format!("/learners/{id}/courses/cafe/advance");
    let (s, out) = json_call(
        &app,
        "POST",
        &uri,
        Some(json!({"node_id": "cafe-hello", "choice": 1})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(out["node"]["node_id"], "cafe-coffee");
    let (s, out) = json_call(
        &app,
        "POST",
        &uri,
        Some(json!({"node_id": "cafe-hello", "choice": 9})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(out["code"], "unknown_choice");

    // A supplied reference recording with its interval alignment.
    let utt = synthesize(
        &["T", "IY"],
        &PhonemeClassTable::default(),
        &SynthOptions::default(),
    )
    .unwrap();
    let request = json!({
        "learner_id": id,
        "title": "Tea",
        "sentences": [
            {"text": "tea", "phonemes": "T IY",
             "reference_wav": base64::engine::general_purpose::STANDARD.encode(utt.audio.to_wav_bytes()),
             "alignment": format_alignment(&utt.segments)},
            {"text": "bye", "phonemes": "B AY"}
        ]
    });
    let (s, course) = json_call(&app, "POST", "/courses", Some(request)).await;
    assert_eq!(s, StatusCode::CREATED, "{course}");
    assert_eq!(course["kind"], "custom");
    let entry = course["entry"].as_str().unwrap();
    let cid = course["course_id"].as_str().unwrap();
    let (s, bundle) = attempt(
        &app,
        id,
        &[
            ("node_id", entry.as_bytes()),
            ("course_id", cid.as_bytes()),
            ("audio", &wav(&["T", "IY"])),
        ],
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{bundle}");

    let bad = json!({"sentences": [{"text": "x", "phonemes": "T IY", "alignment": "x"}]});
    let (s, e) = json_call(&app, "POST", "/courses", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["code"], "validation_error");
    let (s, e) = json_call(
        &app,
        "POST",
        "/courses",
        Some(json!({"sentences": [{"text": "x", "phonemes": "ZZ"}]})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(e["code"], "unknown_phoneme");
}
