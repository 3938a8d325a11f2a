//! The slate's interaction state machine.
//!
//! Snapshots arrive from the simulator or the UI. Any tile movement restarts
//! the settle timer; once the slate has been still for `settle_ms` the poem is
//! composed and handed off as a [`Submission`]. A session keeps at most one
//! chain in flight and coalesces submissions that settle meanwhile
//! (latest wins).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{left_edge_vector, order_markers, GeometryConfig, GeometryError, WordId};
use crate::mode::Mode;
use crate::vocabulary::{layout_to_text, Vocabulary, VocabularyError};
use crate::Marker;

pub const DEFAULT_SETTLE_MS: u64 = 3000;
pub const DEFAULT_EPSILON: f64 = 4.0;
/// Rotation beyond which a tile counts as moved even if its center stayed put.
pub const ORIENTATION_THRESHOLD_DEG: f64 = 5.0;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown word id `{0}`")]
    UnknownWord(WordId),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
    #[error("slate holds no word tiles")]
    EmptyPoem,
    #[error("snapshot timestamp {got} precedes {previous}")]
    NonMonotonic { previous: u64, got: u64 },
    #[error("session is closed")]
    Closed,
}

/// Detections observed at one instant (milliseconds since session start).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlateSnapshot {
    pub timestamp_ms: u64,
    pub detections: Vec<Marker>,
}

impl SlateSnapshot {
    pub fn new(timestamp_ms: u64, detections: Vec<Marker>) -> Self {
        Self { timestamp_ms, detections }
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    fn by_id(&self) -> BTreeMap<&WordId, &Marker> {
        self.detections.iter().map(|m| (&m.word_id, m)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub added: Vec<WordId>,
    pub removed: Vec<WordId>,
    pub moved: Vec<WordId>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.moved.is_empty()
    }
}

fn edge_angle(m: &Marker) -> Option<f64> {
    left_edge_vector(m).ok().map(|e| e.angle())
}

fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// Tiles added, removed, or moved between two snapshots. Sub-`epsilon`
/// center jitter is ignored; a rotation over five degrees counts as a move.
pub fn diff_snapshots(a: &SlateSnapshot, b: &SlateSnapshot, epsilon: f64) -> ChangeSet {
    let before = a.by_id();
    let after = b.by_id();
    let mut changes = ChangeSet::default();
    for (id, m) in &after {
        match before.get(id) {
            None => changes.added.push((*id).clone()),
            Some(old) => {
                let shifted = old.center.distance(m.center) > epsilon;
                let turned = match (edge_angle(old), edge_angle(m)) {
                    (Some(x), Some(y)) => angle_between(x, y) > ORIENTATION_THRESHOLD_DEG.to_radians(),
                    _ => false,
                };
                if shifted || turned {
                    changes.moved.push((*id).clone());
                }
            }
        }
    }
    changes.removed = before
        .keys()
        .filter(|id| !after.contains_key(*id))
        .map(|id| (*id).clone())
        .collect();
    changes
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubmitEvent {
    pub at_ms: u64,
    pub snapshot: SlateSnapshot,
}

/// Tracks quiescence of the slate.
#[derive(Clone, Debug)]
pub struct SettleTimer {
    settle_ms: u64,
    epsilon: f64,
    current: SlateSnapshot,
    last_change_ms: Option<u64>,
    fired: bool,
}

impl SettleTimer {
    pub fn new(settle_ms: u64, epsilon: f64) -> Self {
        assert!(settle_ms > 0, "settle_ms must be positive");
        Self {
            settle_ms,
            epsilon,
            current: SlateSnapshot::default(),
            last_change_ms: None,
            fired: false,
        }
    }

    pub fn current(&self) -> &SlateSnapshot {
        &self.current
    }

    pub fn last_change_ms(&self) -> Option<u64> {
        self.last_change_ms
    }

    /// Records a snapshot; a non-empty change restarts the quiet period.
    pub fn observe(&mut self, snapshot: SlateSnapshot) -> ChangeSet {
        let changes = diff_snapshots(&self.current, &snapshot, self.epsilon);
        if !changes.is_empty() {
            self.last_change_ms = Some(snapshot.timestamp_ms);
            self.fired = false;
            self.current = snapshot;
        } else {
            // Keep the reference poses so slow drift still accumulates past epsilon.
            self.current.timestamp_ms = snapshot.timestamp_ms;
        }
        changes
    }

    /// When the pending submission will fire, if one is pending.
    pub fn deadline(&self) -> Option<u64> {
        match self.last_change_ms {
            Some(t) if !self.fired => Some(t + self.settle_ms),
            _ => None,
        }
    }

    pub fn poll(&mut self, now_ms: u64) -> Option<SubmitEvent> {
        let deadline = self.deadline()?;
        if now_ms < deadline {
            return None;
        }
        self.fired = true;
        if self.current.is_empty() {
            return None;
        }
        Some(SubmitEvent {
            at_ms: now_ms,
            snapshot: self.current.clone(),
        })
    }
}

/// Runs a snapshot stream against a simulated clock ticking every `tick_ms`
/// from zero up to `horizon_ms`, returning every submission that fires.
pub fn settle(
    snapshots: &[SlateSnapshot],
    settle_ms: u64,
    epsilon: f64,
    tick_ms: u64,
    horizon_ms: u64,
) -> Vec<SubmitEvent> {
    assert!(tick_ms > 0, "tick_ms must be positive");
    let mut timer = SettleTimer::new(settle_ms, epsilon);
    let mut pending = snapshots.iter().peekable();
    let mut events = Vec::new();
    let mut now = 0;
    while now <= horizon_ms {
        while let Some(s) = pending.next_if(|s| s.timestamp_ms <= now) {
            timer.observe(s.clone());
        }
        events.extend(timer.poll(now));
        now += tick_ms;
    }
    events
}

/// Placement times of the mode markers currently on the slate, plus the
/// mode that stays active after its marker is lifted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModeTracker {
    placed_at: BTreeMap<Mode, u64>,
    active: Mode,
}

impl ModeTracker {
    pub fn active(&self) -> Mode {
        self.active
    }

    pub fn observe(&mut self, snapshot: &SlateSnapshot, vocabulary: &Vocabulary) -> Mode {
        let mode = resolve_mode(snapshot, self, vocabulary);
        let present = markers_on(snapshot, vocabulary);
        self.placed_at.retain(|m, _| present.contains(m));
        for m in present {
            self.placed_at.entry(m).or_insert(snapshot.timestamp_ms);
        }
        self.active = mode;
        mode
    }
}

fn markers_on(snapshot: &SlateSnapshot, vocabulary: &Vocabulary) -> BTreeSet<Mode> {
    snapshot
        .detections
        .iter()
        .filter_map(|d| vocabulary.mode_of(&d.word_id))
        .collect()
}

/// The mode in force for `snapshot`: the most recently placed marker on the
/// slate, otherwise whatever was last active (Collaborate initially).
pub fn resolve_mode(snapshot: &SlateSnapshot, history: &ModeTracker, vocabulary: &Vocabulary) -> Mode {
    markers_on(snapshot, vocabulary)
        .into_iter()
        .map(|m| (history.placed_at.get(&m).copied().unwrap_or(snapshot.timestamp_ms), m))
        .max()
        .map(|(_, m)| m)
        .unwrap_or(history.active)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub at_ms: u64,
    pub poem_text: String,
    pub mode: Mode,
    /// Word tiles in reading order.
    pub word_ids: Vec<WordId>,
}

/// Orders the word tiles of a snapshot (mode markers excluded).
pub fn word_layout(
    snapshot: &SlateSnapshot,
    vocabulary: &Vocabulary,
    config: &GeometryConfig<f64>,
) -> Result<crate::OrderedLayout, SessionError> {
    let mut words = Vec::with_capacity(snapshot.detections.len());
    for d in &snapshot.detections {
        if !vocabulary.contains(&d.word_id) {
            return Err(SessionError::UnknownWord(d.word_id.clone()));
        }
        if vocabulary.is_word(&d.word_id) {
            words.push(d.clone());
        }
    }
    Ok(order_markers(&words, config)?)
}

pub fn compose_submission(
    snapshot: &SlateSnapshot,
    vocabulary: &Vocabulary,
    config: &GeometryConfig<f64>,
    mode: Mode,
) -> Result<Submission, SessionError> {
    let layout = word_layout(snapshot, vocabulary, config)?;
    if layout.is_empty() {
        return Err(SessionError::EmptyPoem);
    }
    Ok(Submission {
        at_ms: snapshot.timestamp_ms,
        poem_text: layout_to_text(&layout, vocabulary)?,
        mode,
        word_ids: layout.flatten(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub geometry: GeometryConfig<f64>,
    pub settle_ms: u64,
    pub epsilon: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::default(),
            settle_ms: DEFAULT_SETTLE_MS,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Reading-order preview of the word tiles on the slate.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preview {
    pub lines: Vec<Vec<String>>,
}

impl Preview {
    pub fn tokens(&self) -> Vec<String> {
        self.lines.iter().flatten().cloned().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestReport {
    pub changes: ChangeSet,
    pub preview: Preview,
    pub mode: Mode,
    pub settle_deadline: Option<u64>,
}

/// A consistent read-only view of a session.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionState {
    pub mode: Mode,
    pub preview: Preview,
    pub settle_deadline: Option<u64>,
    pub in_flight: bool,
    pub last_submission: Option<Submission>,
    pub snapshot: SlateSnapshot,
}

pub struct SlateSession {
    vocabulary: Arc<Vocabulary>,
    config: SessionConfig,
    timer: SettleTimer,
    modes: ModeTracker,
    preview: Preview,
    in_flight: bool,
    pending: Option<Submission>,
    last_submission: Option<Submission>,
    closed: bool,
}

impl SlateSession {
    pub fn new(vocabulary: Arc<Vocabulary>, config: SessionConfig) -> Self {
        Self {
            vocabulary,
            timer: SettleTimer::new(config.settle_ms, config.epsilon),
            config,
            modes: ModeTracker::default(),
            preview: Preview::default(),
            in_flight: false,
            pending: None,
            last_submission: None,
            closed: false,
        }
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocabulary
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn ingest(&mut self, snapshot: SlateSnapshot) -> Result<IngestReport, SessionError> {
        if self.closed {
            return Err(SessionError::Closed);
        }
        let previous = self.timer.current().timestamp_ms;
        if snapshot.timestamp_ms < previous {
            return Err(SessionError::NonMonotonic {
                previous,
                got: snapshot.timestamp_ms,
            });
        }
        let layout = word_layout(&snapshot, &self.vocabulary, &self.config.geometry)?;
        let preview = Preview {
            lines: layout
                .lines
                .iter()
                .map(|line| {
                    line.iter()
                        .map(|id| self.vocabulary.get(id).map(|t| t.text.clone()).unwrap_or_default())
                        .collect()
                })
                .collect(),
        };
        let mode = self.modes.observe(&snapshot, &self.vocabulary);
        let changes = self.timer.observe(snapshot);
        self.preview = preview.clone();
        Ok(IngestReport {
            changes,
            preview,
            mode,
            settle_deadline: self.timer.deadline(),
        })
    }

    /// Advances the clock. Returns a submission that should start a chain now;
    /// submissions settling while a chain runs are held (latest wins).
    pub fn tick(&mut self, now_ms: u64) -> Option<Submission> {
        if self.closed {
            return None;
        }
        let event = self.timer.poll(now_ms)?;
        let mut submission =
            compose_submission(&event.snapshot, &self.vocabulary, &self.config.geometry, self.modes.active()).ok()?;
        submission.at_ms = event.at_ms;
        if self.in_flight {
            self.pending = Some(submission);
            return None;
        }
        self.in_flight = true;
        self.last_submission = Some(submission.clone());
        Some(submission)
    }

    /// Marks the running chain finished; returns a held submission to run next.
    pub fn finish_chain(&mut self) -> Option<Submission> {
        self.in_flight = false;
        let next = self.pending.take()?;
        self.in_flight = true;
        self.last_submission = Some(next.clone());
        Some(next)
    }

    pub fn in_flight(&self) -> bool {
        self.in_flight
    }

    pub fn settle_deadline(&self) -> Option<u64> {
        self.timer.deadline()
    }

    pub fn mode(&self) -> Mode {
        self.modes.active()
    }

    pub fn preview(&self) -> &Preview {
        &self.preview
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            mode: self.modes.active(),
            preview: self.preview.clone(),
            settle_deadline: self.timer.deadline(),
            in_flight: self.in_flight,
            last_submission: self.last_submission.clone(),
            snapshot: self.timer.current().clone(),
        }
    }
}
