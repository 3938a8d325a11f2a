//! Append-only interaction log and the usage statistics computed over it.
//!
//! The log is JSON Lines: one [`SessionRecord`] per line, UTF-8.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::WordId;
use crate::mode::Mode;
use crate::vocabulary::Vocabulary;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to encode record: {0}")]
    Encode(#[from] serde_json::Error),
    #[error("line {line}: unsupported record schema_version {version}")]
    UnsupportedVersion { line: usize, version: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("no records to summarise")]
    EmptyInput,
}

/// One complete interaction: the poem, its mode, and both chain stages.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub schema_version: u32,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
    pub mode: Mode,
    pub poem_text: String,
    pub word_ids: Vec<WordId>,
    pub stage1_text: String,
    pub stage2_text: String,
    pub total_latency_ms: u64,
}

impl SessionRecord {
    pub fn to_line(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string(self)
    }
}

/// Appends one record as a single line.
pub fn append_record(path: impl AsRef<Path>, record: &SessionRecord) -> Result<(), LogError> {
    let mut line = record.to_line()?;
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(line.as_bytes())?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineDiagnostic {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LogContents {
    pub records: Vec<SessionRecord>,
    pub diagnostics: Vec<LineDiagnostic>,
}

/// Parses a log, skipping (and reporting) malformed lines. A record written
/// with an unknown schema version aborts the read.
pub fn parse_log<R: Read>(reader: R) -> Result<LogContents, LogError> {
    let mut contents = LogContents::default();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                contents.diagnostics.push(LineDiagnostic { line: lineno, message: e.to_string() });
                continue;
            }
        };
        if let Some(version) = value.get("schema_version").and_then(|v| v.as_u64()) {
            if version != u64::from(RECORD_SCHEMA_VERSION) {
                return Err(LogError::UnsupportedVersion { line: lineno, version });
            }
        }
        match serde_json::from_value::<SessionRecord>(value) {
            Ok(r) => contents.records.push(r),
            Err(e) => contents.diagnostics.push(LineDiagnostic { line: lineno, message: e.to_string() }),
        }
    }
    Ok(contents)
}

pub fn read_log(path: impl AsRef<Path>) -> Result<LogContents, LogError> {
    parse_log(std::fs::File::open(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ModeShare {
    pub mode: Mode,
    pub count: usize,
    pub percent: u32,
}

/// Share of records per mode in whole percent, most used first. Rounding
/// residue goes to the most used mode so the column sums to 100.
pub fn mode_usage(records: &[SessionRecord]) -> Result<Vec<ModeShare>, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let total = records.len();
    let mut counts: BTreeMap<Mode, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.mode).or_default() += 1;
    }
    let mut shares: Vec<ModeShare> = counts
        .into_iter()
        .map(|(mode, count)| ModeShare {
            mode,
            count,
            // round half up: floor((200c + n) / 2n)
            percent: ((200 * count + total) / (2 * total)) as u32,
        })
        .collect();
    shares.sort_by(|a, b| b.count.cmp(&a.count).then(a.mode.cmp(&b.mode)));
    let sum: i64 = shares.iter().map(|s| i64::from(s.percent)).sum();
    let top = &mut shares[0];
    top.percent = (i64::from(top.percent) + 100 - sum) as u32;
    Ok(shares)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub distinct_words_used: usize,
    pub vocabulary_size: usize,
}

/// Distinct word tiles used across the log against the number of word tiles.
pub fn vocabulary_coverage(records: &[SessionRecord], vocabulary: &Vocabulary) -> Coverage {
    let used: BTreeSet<&WordId> = records
        .iter()
        .flat_map(|r| r.word_ids.iter())
        .filter(|id| vocabulary.is_word(id))
        .collect();
    Coverage {
        distinct_words_used: used.len(),
        vocabulary_size: vocabulary.word_count(),
    }
}

/// Lowercase, whitespace-split tokens with leading and trailing punctuation
/// stripped. Interior hyphens and apostrophes survive.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
}

/// Number of distinct tokens across all displayed responses.
pub fn response_lexicon(records: &[SessionRecord]) -> usize {
    records
        .iter()
        .flat_map(|r| tokenize(&r.stage2_text))
        .collect::<BTreeSet<_>>()
        .len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WordSource {
    Input,
    Response,
}

/// The `n` most frequent tokens, ties broken alphabetically.
pub fn top_words(records: &[SessionRecord], source: WordSource, n: usize) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for r in records {
        let text = match source {
            WordSource::Input => &r.poem_text,
            WordSource::Response => &r.stage2_text,
        };
        for t in tokenize(text) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(n);
    ranked
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParticipantSummary {
    pub participants: usize,
    pub poems_per_participant: f64,
}

/// Only computed when at least one record carries a participant tag.
pub fn participant_summary(records: &[SessionRecord]) -> Option<ParticipantSummary> {
    let tagged: Vec<&str> = records.iter().filter_map(|r| r.participant.as_deref()).collect();
    if tagged.is_empty() {
        return None;
    }
    let participants = tagged.iter().collect::<BTreeSet<_>>().len();
    Some(ParticipantSummary {
        participants,
        poems_per_participant: tagged.len() as f64 / participants as f64,
    })
}

pub const TOP_WORDS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsReport {
    pub poems: usize,
    pub participants: Option<ParticipantSummary>,
    pub modes: Vec<ModeShare>,
    pub coverage: Coverage,
    pub response_lexicon: usize,
    pub top_input_words: Vec<(String, usize)>,
    pub top_response_words: Vec<(String, usize)>,
}

impl StatsReport {
    pub fn compute(records: &[SessionRecord], vocabulary: &Vocabulary) -> Result<Self, AnalyticsError> {
        Ok(Self {
            poems: records.len(),
            participants: participant_summary(records),
            modes: mode_usage(records)?,
            coverage: vocabulary_coverage(records, vocabulary),
            response_lexicon: response_lexicon(records),
            top_input_words: top_words(records, WordSource::Input, TOP_WORDS),
            top_response_words: top_words(records, WordSource::Response, TOP_WORDS),
        })
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "poems: {}", self.poems)?;
        if let Some(p) = &self.participants {
            writeln!(f, "participants: {} ({:.1} poems/participant)", p.participants, p.poems_per_participant)?;
        }
        writeln!(f, "mode usage:")?;
        for s in &self.modes {
            writeln!(f, "  {:<12} {:>5} {:>4}%", s.mode.as_str(), s.count, s.percent)?;
        }
        writeln!(
            f,
            "vocabulary coverage: {}/{} words used",
            self.coverage.distinct_words_used, self.coverage.vocabulary_size
        )?;
        writeln!(f, "response lexicon: {} unique words", self.response_lexicon)?;
        let list = |words: &[(String, usize)]| words.iter().map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(", ");
        writeln!(f, "top input words: {}", list(&self.top_input_words))?;
        write!(f, "top response words: {}", list(&self.top_response_words))
    }
}
