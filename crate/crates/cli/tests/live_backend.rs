use std::io::Read;
use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use poetslate_cli::live::{BackendConfig, LiveBackend};
use poetslate_core::chain::{BackendError, CompletionRequest, Stage};
use poetslate_core::{run_chain, ChainSpecs, CompletionBackend, Mode};
use serde_json::{json, Value};

const TOKEN: &str = "sk-test-5f0c1d2e9a";

type Seen = Arc<Mutex<Vec<(Option<String>, Value)>>>;

/// Chat-completion mock on its own runtime thread. Replies with `status`;
/// failures echo the authorization header back in the body.
fn mock(status: StatusCode) -> (SocketAddr, Seen) {
    let seen: Seen = Arc::default();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    let store = seen.clone();
    thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let app = Router::new().route(
                "/v1/chat/completions",
                post(move |headers: HeaderMap, Json(body): Json<Value>| {
                    let store = store.clone();
                    async move {
                        let auth = headers.get("authorization").map(|v| v.to_str().unwrap().to_owned());
                        let n = {
                            let mut s = store.lock().unwrap();
                            s.push((auth.clone(), body));
                            s.len()
                        };
                        if status.is_success() {
                            let content = format!("reply {n}");
                            (status, Json(json!({"choices": [{"message": {"role": "assistant", "content": content}}]})))
                        } else {
                            (status, Json(json!({"error": format!("rejected {}", auth.unwrap_or_default())})))
                        }
                    }
                }),
            );
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (addr, seen)
}

fn config(addr: SocketAddr) -> BackendConfig {
    BackendConfig {
        endpoint: format!("http://{addr}/v1"),
        timeout_ms: 2_000,
        backoff_ms: 10,
        ..BackendConfig::default()
    }
}

fn request(prompt: &str) -> CompletionRequest<'_> {
    CompletionRequest { mode: Mode::Ideate, stage: Stage::First, poem: "sun", prompt }
}

#[test]
fn sends_one_user_message_with_bearer_token() {
    let (addr, seen) = mock(StatusCode::OK);
    let backend = LiveBackend::new(config(addr), Some(TOKEN.into()));
    let out = run_chain(Mode::Interpret, "sun moon", &backend, &ChainSpecs::standard()).unwrap();
    assert_eq!(out.stage1_text, "reply 1");
    assert_eq!(out.stage2_text, "reply 2");
    assert_eq!(out.backend, "live");

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    let (auth, body) = &seen[0];
    assert_eq!(auth.as_deref(), Some(format!("Bearer {TOKEN}").as_str()));
    assert_eq!(body["model"], "gpt-4");
    assert_eq!(body["temperature"], 0.7);
    assert_eq!(body["max_tokens"], 256);
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 1);
    assert_eq!(messages[0]["role"], "user");
    assert!(messages[0]["content"].as_str().unwrap().contains("sun moon"));
    assert_eq!(seen[1].1["messages"][0]["content"], "Summarise this: reply 1 in only 5-15 words.");
}

#[test]
fn http_errors_are_scrubbed_and_not_retried() {
    let (addr, seen) = mock(StatusCode::UNAUTHORIZED);
    let backend = LiveBackend::new(config(addr), Some(TOKEN.into()));
    let err = backend.complete(&request("hello")).unwrap_err();
    assert!(matches!(err, BackendError::Http { status: 401, .. }));
    let shown = format!("{err} {err:?} {backend:?}");
    assert!(!shown.contains(TOKEN), "credential leaked: {shown}");
    assert!(shown.contains("[redacted]"));
    assert_eq!(seen.lock().unwrap().len(), 1);

    let chain = run_chain(Mode::Ideate, "sun", &backend, &ChainSpecs::standard()).unwrap_err();
    assert!(!chain.to_string().contains(TOKEN));
}

/// Accepts connections, reads the request, holds the socket for `hold`
/// and closes it without replying. Counts attempts.
fn silent_server(hold: Duration) -> (SocketAddr, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let count = Arc::new(AtomicUsize::new(0));
    let c = count.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            c.fetch_add(1, Ordering::SeqCst);
            thread::spawn(move || {
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                thread::sleep(hold);
            });
        }
    });
    (addr, count)
}

#[test]
fn transport_failures_retry_twice() {
    let (addr, count) = silent_server(Duration::ZERO);
    let backend = LiveBackend::new(config(addr), Some(TOKEN.into()));
    let err = backend.complete(&request("hello")).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)), "{err:?}");
    assert!(!err.to_string().contains(TOKEN));
    assert_eq!(count.load(Ordering::SeqCst), 3);
}

#[test]
fn slow_server_times_out() {
    let (addr, count) = silent_server(Duration::from_millis(1500));
    let mut cfg = config(addr);
    cfg.timeout_ms = 200;
    cfg.retries = 1;
    let backend = LiveBackend::new(cfg, None);
    assert_eq!(backend.complete(&request("hello")).unwrap_err(), BackendError::Timeout);
    assert_eq!(count.load(Ordering::SeqCst), 2);
}
