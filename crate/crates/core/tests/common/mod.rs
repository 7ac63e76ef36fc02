//! In-process mock of a remote scoring service.

#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::Router;

#[derive(Debug, Clone)]
pub struct Reply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl Reply {
    pub fn scores(scores: &[f64]) -> Self {
        Reply {
            status: 200,
            body: serde_json::json!({ "scores": scores }).to_string(),
            delay: Duration::ZERO,
        }
    }

    pub fn raw(status: u16, body: &str) -> Self {
        Reply {
            status,
            body: body.to_owned(),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Seen {
    pub body: Vec<u8>,
    pub client_header: Option<String>,
    pub content_type: Option<String>,
}

type Behaviour = dyn Fn(&[String]) -> Reply + Send + Sync;

#[derive(Clone)]
struct AppState {
    behaviour: Arc<Behaviour>,
    seen: Arc<Mutex<Vec<Seen>>>,
}

pub struct MockServer {
    pub addr: SocketAddr,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl MockServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }

    pub fn hits(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

async fn classify(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> (StatusCode, String) {
    let header = |name: &str| headers.get(name).and_then(|v| v.to_str().ok()).map(str::to_owned);
    state.seen.lock().unwrap().push(Seen {
        body: body.to_vec(),
        client_header: header("x-client"),
        content_type: header("content-type"),
    });
    let texts: Vec<String> = serde_json::from_slice::<serde_json::Value>(&body)
        .ok()
        .and_then(|v| serde_json::from_value(v["texts"].clone()).ok())
        .unwrap_or_default();
    let reply = (state.behaviour)(&texts);
    if !reply.delay.is_zero() {
        tokio::time::sleep(reply.delay).await;
    }
    (StatusCode::from_u16(reply.status).unwrap(), reply.body)
}

/// Starts a server on an ephemeral port; it lives until the process exits.
pub fn start(behaviour: impl Fn(&[String]) -> Reply + Send + Sync + 'static) -> MockServer {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let state = AppState {
        behaviour: Arc::new(behaviour),
        seen: seen.clone(),
    };
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = Router::new().route("/v1/classify", post(classify)).with_state(state);
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    MockServer { addr, seen }
}

/// Scores each text by whether it mentions "carcinoma".
pub fn keyword_scores(texts: &[String]) -> Reply {
    let scores: Vec<f64> = texts
        .iter()
        .map(|t| if t.contains("carcinoma") { 0.9 } else { 0.1 })
        .collect();
    Reply::scores(&scores)
}
