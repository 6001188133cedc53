use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode as AxStatus;
use axum::routing::get;
use axum::Router;
use logat_cloud::{ask, router, CloudConfig, CloudState};
use logat_core::frame::SequenceMeta;
use logat_core::gateway::AskRequest;
use logat_core::inference::DecodingConfig;
use logat_core::qa;
use logat_core::{Fps, MockLlm, Prediction, QAItem, RunConfig, Transcript};
use reqwest::StatusCode;

const PNG_1X1_B64: &str =
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNkYPhfDwAChwGA60e6kgAAAABJRU5ErkJggg==";

fn transcript(captions: &[&str]) -> Transcript {
    let meta = SequenceMeta::uniform("clip", Fps::ONE, captions.len() as u32);
    Transcript::global_only(&meta, captions.iter().map(|s| s.to_string()).collect()).unwrap()
}

fn options() -> Vec<String> {
    ["red", "green", "blue", "black", "white"].map(String::from).to_vec()
}

async fn fake_edge(store: HashMap<String, String>, tamper: bool) -> String {
    let store = Arc::new(store);
    let app = Router::new()
        .route(
            "/v1/transcripts/{id}",
            get(move |State(s): State<Arc<HashMap<String, String>>>, Path(id): Path<String>| async move {
                match s.get(&id) {
                    Some(body) if tamper => (AxStatus::OK, body.replace("frame one", "frame 0ne")),
                    Some(body) => (AxStatus::OK, body.clone()),
                    None => (AxStatus::NOT_FOUND, String::new()),
                }
            }),
        )
        .with_state(store);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn config(edge_url: Option<String>, token: Option<&str>) -> CloudConfig {
    CloudConfig {
        mock: true,
        edge_url,
        token: token.map(String::from),
        ..CloudConfig::from_run(&RunConfig::default())
    }
}

async fn start(cfg: CloudConfig) -> String {
    let state = CloudState::new(cfg).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    format!("http://{addr}")
}

async fn post(base: &str, body: String, token: Option<&str>) -> (StatusCode, serde_json::Value) {
    let mut req = reqwest::Client::new()
        .post(format!("{base}/v1/ask"))
        .header("content-type", "application/json")
        .body(body);
    if let Some(t) = token {
        req = req.bearer_auth(t);
    }
    let resp = req.send().await.unwrap();
    let status = resp.status();
    let text = resp.text().await.unwrap();
    (status, serde_json::from_str(&text).unwrap_or(serde_json::Value::Null))
}

fn ask_body(req: &AskRequest) -> String {
    serde_json::to_string(req).unwrap()
}

#[tokio::test]
async fn inline_ask_equals_direct_answer() {
    let base = start(config(None, None)).await;
    let t = transcript(&["a red ball", "marker: GOLD[q7]=C"]);
    let req = AskRequest {
        transcript_id: None,
        transcript: Some(t.to_jsonl()),
        question_id: Some("q7".into()),
        question: "Which colour is the ball in q7?".into(),
        options: options(),
    };
    let (s, body) = post(&base, ask_body(&req), None).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let served: Prediction = serde_json::from_value(body).unwrap();
    let item = QAItem {
        question_id: "q7".into(),
        video_id: "clip".into(),
        category: String::new(),
        question: req.question.clone(),
        options: options(),
        gold_index: None,
    };
    let direct = qa::answer(&t, &item, &MockLlm, &DecodingConfig::llm_default()).await.unwrap();
    assert_eq!(served, direct);
    assert_eq!(served.chosen_index, Some(2));
}

#[tokio::test]
async fn pull_by_id_from_edge() {
    let t = transcript(&["someone waves", "GOLD=B"]);
    let id = t.digest();
    let edge = fake_edge(HashMap::from([(id.clone(), t.to_jsonl())]), false).await;
    let base = start(config(Some(edge), None)).await;
    let req = AskRequest {
        transcript_id: Some(id.clone()),
        transcript: None,
        question_id: None,
        question: "Who waves?".into(),
        options: options(),
    };
    let (s, body) = post(&base, ask_body(&req), None).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["chosen_index"], 1);

    // the in-process entry point behaves the same
    let state = CloudState::new(config(None, None)).unwrap();
    let err = ask(&state, req.clone()).await.unwrap_err();
    assert_eq!(err.status, AxStatus::BAD_REQUEST);

    let missing = AskRequest { transcript_id: Some("0".repeat(64)), ..req.clone() };
    let (s, body) = post(&base, ask_body(&missing), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_transcript");
    let malformed = AskRequest { transcript_id: Some("nope".into()), ..req };
    let (s, _) = post(&base, ask_body(&malformed), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn tampered_edge_transcript_is_rejected() {
    let t = transcript(&["frame one", "frame two"]);
    let edge = fake_edge(HashMap::from([(t.digest(), t.to_jsonl())]), true).await;
    let base = start(config(Some(edge), None)).await;
    let req = AskRequest {
        transcript_id: Some(t.digest()),
        transcript: None,
        question_id: None,
        question: "?".into(),
        options: options(),
    };
    let (s, body) = post(&base, ask_body(&req), None).await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(body["code"], "digest_mismatch");
}

#[tokio::test]
async fn image_data_in_request_is_422() {
    let base = start(config(None, None)).await;
    let leaky = transcript(&[&format!("look: data:image/png;base64,{PNG_1X1_B64}")]);
    let req = AskRequest {
        transcript_id: None,
        transcript: Some(leaky.to_jsonl()),
        question_id: None,
        question: "What is shown?".into(),
        options: options(),
    };
    let (s, body) = post(&base, ask_body(&req), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "privacy_violation");
    assert!(body["violations"].as_array().is_some_and(|v| !v.is_empty()));

    let (s, _) = post(&base, format!(r#"{{"question":"q","options":["a","b"],"image":"{PNG_1X1_B64}"}}"#), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn request_validation() {
    let base = start(config(None, Some("tok"))).await;
    let t = transcript(&["x"]);
    let good = AskRequest {
        transcript_id: None,
        transcript: Some(t.to_jsonl()),
        question_id: None,
        question: "q?".into(),
        options: options(),
    };
    let (s, _) = post(&base, ask_body(&good), None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    let (s, body) = post(&base, ask_body(&good), Some("tok")).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["extraction_method"], "abstain");

    let both = AskRequest { transcript_id: Some(t.digest()), ..good.clone() };
    assert_eq!(post(&base, ask_body(&both), Some("tok")).await.0, StatusCode::BAD_REQUEST);
    let one_option = AskRequest { options: vec!["a".into()], ..good.clone() };
    assert_eq!(post(&base, ask_body(&one_option), Some("tok")).await.0, StatusCode::BAD_REQUEST);
    let corrupt = AskRequest { transcript: Some("{\"schema_version\":9}".into()), ..good };
    let (s, body) = post(&base, ask_body(&corrupt), Some("tok")).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "invalid_transcript");
}

#[tokio::test]
async fn llm_down_is_503() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut cfg = config(None, None);
    cfg.mock = false;
    cfg.llm.base_url = format!("http://127.0.0.1:{port}");
    cfg.llm.retries = 0;
    let base = start(cfg).await;
    let req = AskRequest {
        transcript_id: None,
        transcript: Some(transcript(&["x"]).to_jsonl()),
        question_id: None,
        question: "q?".into(),
        options: options(),
    };
    let (s, body) = post(&base, ask_body(&req), None).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["code"], "llm_unavailable");
}
