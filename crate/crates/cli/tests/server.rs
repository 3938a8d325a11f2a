mod support;

use std::sync::Arc;
use std::time::{Duration, Instant};

use poetslate_cli::wire::{EventKind, WireEvent};
use poetslate_core::analytics::read_log;
use poetslate_core::chain::Transcript;
use poetslate_core::{run_chain, ChainSpecs, Mode, ReplayBackend, StubBackend};
use support::*;

const WAIT: Duration = Duration::from_secs(3);

fn is_response(ev: &WireEvent) -> bool {
    matches!(ev.event, EventKind::Response { .. })
}

fn assert_gap_free(events: &[WireEvent]) {
    for w in events.windows(2) {
        assert_eq!(w[1].seq, w[0].seq + 1, "{events:#?}");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn fresh_session_state() {
    let addr = start(services(3000), false).await;
    let (status, state) = get(addr, "/state").await;
    assert_eq!(status, 200);
    assert_eq!(state["mode"], "collaborate");
    assert!(state["response"].is_null());
    assert_eq!(state["preview"], serde_json::json!([]));
    assert_eq!(state["schema_version"], 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn snapshot_validation() {
    let addr = start(services(3000), false).await;
    let (status, ack) = post(addr, "/snapshot", &tiles_json(&[("delicious", 80.0, 0.0), ("hate", 0.0, 0.0)])).await;
    assert_eq!(status, 200);
    assert_eq!(ack["preview"], serde_json::json!(["hate", "delicious"]));
    assert_eq!(ack["changed"], true);

    let (status, ack) = post(addr, "/snapshot", r#"{"detections": []}"#).await;
    assert_eq!(status, 200);
    assert_eq!(ack["preview"], serde_json::json!([]));

    let (status, err) = post(addr, "/snapshot", &tiles_json(&[("zzz", 0.0, 0.0)])).await;
    assert_eq!(status, 400);
    assert_eq!(err["code"], "unknown_word");

    let (status, err) = post(addr, "/snapshot", "{not json").await;
    assert_eq!(status, 400);
    assert_eq!(err["code"], "bad_request");
    let (status, _) = post(addr, "/snapshot", r#"{"poses": [], "detections": []}"#).await;
    assert_eq!(status, 400);

    let (status, _) = post(addr, "/close", "").await;
    assert_eq!(status, 204);
    let (status, err) = post(addr, "/snapshot", &tiles_json(&[("hate", 0.0, 0.0)])).await;
    assert_eq!(status, 409);
    assert_eq!(err["code"], "session_closed");
    assert_eq!(get(addr, "/state").await.1["closed"], true);
}

#[tokio::test(flavor = "multi_thread")]
async fn image_frame_detections_are_flipped() {
    let addr = start(services(3000), false).await;
    let body = r#"{"frame": "image", "detections": [
        {"word_id": "dead", "center": [0, 100], "corners": [[-30, 90], [30, 90], [30, 110], [-30, 110]]},
        {"word_id": "human", "center": [0, 0], "corners": [[-30, -10], [30, -10], [30, 10], [-30, 10]]}
    ]}"#;
    let (status, ack) = post(addr, "/snapshot", body).await;
    assert_eq!(status, 200);
    assert_eq!(ack["lines"], serde_json::json!([["human"], ["dead"]]));
}

#[tokio::test(flavor = "multi_thread")]
async fn settled_slate_produces_a_response() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let addr = start(services_with(300, Arc::new(StubBackend), Some(log.clone())), false).await;
    let mut ws = subscribe(addr, "/ws").await;
    let tiles = [("hate", 0.0, 0.0), ("delicious", 75.0, 0.0), ("mode_ideate", 0.0, -200.0)];
    post(addr, "/snapshot", &tiles_json(&tiles)).await;

    let events = events_until(&mut ws, WAIT, is_response).await;
    assert_gap_free(&events);
    let kinds: Vec<&str> = events
        .iter()
        .map(|e| match e.event {
            EventKind::SnapshotAccepted { .. } => "snapshot_accepted",
            EventKind::SettleCountdown { .. } => "settle_countdown",
            EventKind::Submission { .. } => "submission",
            EventKind::ChainStarted { .. } => "chain_started",
            EventKind::Response { .. } => "response",
            EventKind::Error { .. } => "error",
        })
        .collect();
    assert_eq!(kinds, ["snapshot_accepted", "settle_countdown", "submission", "chain_started", "response"]);
    let (submitted_at, accepted_at) = (events[2].t_ms, events[0].t_ms);
    assert!(submitted_at >= accepted_at + 300);

    let expected = run_chain(Mode::Ideate, "hate delicious", &StubBackend, &ChainSpecs::standard()).unwrap();
    let EventKind::Response { text, poem, mode, .. } = &events[4].event else { unreachable!() };
    assert_eq!((text, poem.as_str(), *mode), (&expected.stage2_text, "hate delicious", Mode::Ideate));

    // A late subscriber sees the response first.
    let mut late = subscribe(addr, "/ws").await;
    assert_eq!(next_event(&mut late, WAIT).await.unwrap(), events[4]);
    let (_, state) = get(addr, "/state").await;
    assert_eq!(state["response"]["text"], expected.stage2_text.as_str());
    assert_eq!(state["mode"], "ideate");

    // The chain was logged.
    tokio::time::sleep(Duration::from_millis(50)).await;
    let records = read_log(&log).unwrap().records;
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].stage2_text, expected.stage2_text);
    assert_eq!(records[0].word_ids.len(), 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn subscribers_see_identical_sequences() {
    let addr = start(services(200), false).await;
    let mut a = subscribe(addr, "/ws").await;
    let mut b = subscribe(addr, "/ws").await;
    post(addr, "/snapshot", &tiles_json(&[("human", 0.0, 0.0)])).await;
    tokio::time::sleep(Duration::from_millis(50)).await;
    post(addr, "/snapshot", &tiles_json(&[("human", 0.0, 0.0), ("machine", 80.0, 0.0)])).await;
    let ea = events_until(&mut a, WAIT, is_response).await;
    let eb = events_until(&mut b, WAIT, is_response).await;
    assert!(ea.len() >= 6);
    assert_eq!(ea, eb);
    assert_gap_free(&ea);
}

#[tokio::test(flavor = "multi_thread")]
async fn no_submission_while_tiles_keep_moving() {
    let settle = 250;
    let addr = start(services(settle), false).await;
    let mut ws = subscribe(addr, "/ws").await;
    let started = Instant::now();
    let mut last_move = 0;
    for i in 0..8 {
        post(addr, "/snapshot", &tiles_json(&[("human", i as f64 * 10.0, 0.0)])).await;
        last_move = started.elapsed().as_millis() as u64;
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
    let events = events_until(&mut ws, WAIT, is_response).await;
    let submissions: Vec<&WireEvent> =
        events.iter().filter(|e| matches!(e.event, EventKind::Submission { .. })).collect();
    assert_eq!(submissions.len(), 1);
    let last_change = events
        .iter()
        .filter(|e| matches!(e.event, EventKind::SettleCountdown { .. }))
        .map(|e| e.t_ms)
        .max()
        .unwrap();
    assert!(submissions[0].t_ms >= last_change + settle);
    assert!(started.elapsed().as_millis() as u64 >= last_move + settle);
}

#[tokio::test(flavor = "multi_thread")]
async fn chain_failure_is_reported_and_session_continues() {
    let backend = Arc::new(ReplayBackend::new(Transcript::examples()));
    let addr = start(services_with(150, backend, None), false).await;
    let mut ws = subscribe(addr, "/ws").await;
    post(addr, "/snapshot", &tiles_json(&[("human", 0.0, 0.0)])).await;
    let events = events_until(&mut ws, WAIT, |e| matches!(e.event, EventKind::Error { .. })).await;
    let EventKind::Error { code, message } = &events.last().unwrap().event else { panic!("{events:?}") };
    assert_eq!(code, "chain_failed");
    assert!(message.starts_with("stage 1 failed"));

    // Build the recorded collaborate poem; the replay backend knows it.
    let tiles = [
        ("hate", 0.0, 0.0),
        ("delicious", 75.0, 0.0),
        ("body", 150.0, 0.0),
        ("beautiful", 0.0, -60.0),
        ("anxious", 75.0, -60.0),
        ("heart", 150.0, -60.0),
    ];
    let (status, _) = post(addr, "/snapshot", &tiles_json(&tiles)).await;
    assert_eq!(status, 200);
    let events = events_until(&mut ws, WAIT, is_response).await;
    let EventKind::Response { text, .. } = &events.last().unwrap().event else { panic!("{events:?}") };
    assert_eq!(text, "Delicious hate, body beautiful,\nAnxious heart, artfully dutiful.");
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_are_isolated_behind_the_flag() {
    let single = start(services(3000), false).await;
    assert_eq!(get(single, "/sessions/a/state").await.0, 404);

    let multi = start(services(3000), true).await;
    post(multi, "/sessions/a/snapshot", &tiles_json(&[("human", 0.0, 0.0)])).await;
    post(multi, "/sessions/b/snapshot", &tiles_json(&[("dead", 0.0, 0.0)])).await;
    assert_eq!(get(multi, "/sessions/a/state").await.1["preview"], serde_json::json!(["human"]));
    assert_eq!(get(multi, "/sessions/b/state").await.1["preview"], serde_json::json!(["dead"]));
    assert_eq!(get(multi, "/state").await.1["preview"], serde_json::json!([]));
    assert_eq!(get(multi, "/sessions/bad%20id/state").await.0, 400);
}

#[tokio::test(flavor = "multi_thread")]
async fn vocabulary_is_served() {
    let addr = start(services(3000), false).await;
    let (status, tiles) = get(addr, "/vocabulary").await;
    assert_eq!(status, 200);
    assert_eq!(tiles.as_array().unwrap().len(), 179);
}
