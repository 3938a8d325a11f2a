//! A service on an ephemeral port plus small HTTP and WebSocket clients.
#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use poetslate_cli::server::{router, AppState, Services};
use poetslate_cli::wire::WireEvent;
use poetslate_core::session::SessionConfig;
use poetslate_core::{ChainSpecs, CompletionBackend, StubBackend, Vocabulary};
use serde_json::Value;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub fn services(settle_ms: u64) -> Services {
    services_with(settle_ms, Arc::new(StubBackend), None)
}

pub fn services_with(settle_ms: u64, backend: Arc<dyn CompletionBackend>, log_path: Option<PathBuf>) -> Services {
    Services {
        vocabulary: Arc::new(Vocabulary::builtin()),
        backend,
        specs: Arc::new(ChainSpecs::standard()),
        session: SessionConfig {
            settle_ms,
            ..SessionConfig::default()
        },
        tick: Duration::from_millis(10),
        log_path,
        participant: None,
    }
}

/// Serves on 127.0.0.1 with an OS-assigned port; runs until the runtime stops.
pub async fn start(services: Services, multi_session: bool) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(AppState::new(services, multi_session));
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

pub async fn post(addr: SocketAddr, path: &str, body: &str) -> (u16, Value) {
    let resp = reqwest::Client::new()
        .post(format!("http://{addr}{path}"))
        .header("content-type", "application/json")
        .body(body.to_owned())
        .send()
        .await
        .unwrap();
    let status = resp.status().as_u16();
    let text = resp.text().await.unwrap();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null))
}

pub async fn get(addr: SocketAddr, path: &str) -> (u16, Value) {
    let resp = reqwest::get(format!("http://{addr}{path}")).await.unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().await.unwrap_or(Value::Null))
}

pub type Socket = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub async fn subscribe(addr: SocketAddr, path: &str) -> Socket {
    tokio_tungstenite::connect_async(format!("ws://{addr}{path}")).await.unwrap().0
}

/// Next event, or `None` after `wait` with nothing received.
pub async fn next_event(ws: &mut Socket, wait: Duration) -> Option<WireEvent> {
    loop {
        let msg = tokio::time::timeout(wait, ws.next()).await.ok()??.ok()?;
        match msg {
            Message::Text(t) => return Some(serde_json::from_str(&t).unwrap()),
            Message::Ping(p) => ws.send(Message::Pong(p)).await.ok()?,
            Message::Close(_) => return None,
            _ => {}
        }
    }
}

/// Events up to and including the first one matching `stop`.
pub async fn events_until(ws: &mut Socket, wait: Duration, stop: impl Fn(&WireEvent) -> bool) -> Vec<WireEvent> {
    let mut out = Vec::new();
    while let Some(ev) = next_event(ws, wait).await {
        let done = stop(&ev);
        out.push(ev);
        if done {
            break;
        }
    }
    out
}

pub fn tiles_json(tiles: &[(&str, f64, f64)]) -> String {
    let poses: Vec<Value> = tiles
        .iter()
        .map(|(w, x, y)| serde_json::json!({"word_id": w, "center": [x, y]}))
        .collect();
    serde_json::json!({ "poses": poses }).to_string()
}
