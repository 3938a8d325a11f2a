//! The offline subcommands, as functions from inputs to printable text.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use poetslate_core::analytics::{read_log, LogContents, SessionRecord, StatsReport};
use poetslate_core::chain::Transcript;
use poetslate_core::formats::{LayoutFile, SimSpec};
use poetslate_core::{
    layout_to_text, order_markers, run_chain, ChainSpecs, CompletionBackend, ReplayBackend, StubBackend, Vocabulary,
};

use crate::config::{BackendKind, ServiceConfig};
use crate::live::LiveBackend;

pub fn load_vocabulary(path: Option<&Path>) -> Result<Vocabulary> {
    match path {
        Some(p) => Vocabulary::from_path(p).with_context(|| format!("loading vocabulary {}", p.display())),
        None => Ok(Vocabulary::builtin()),
    }
}

pub fn load_transcript(path: Option<&Path>) -> Result<Transcript> {
    match path {
        Some(p) => Transcript::from_path(p).with_context(|| format!("loading transcript {}", p.display())),
        None => Ok(Transcript::examples()),
    }
}

pub fn build_backend(config: &ServiceConfig) -> Result<Arc<dyn CompletionBackend>> {
    Ok(match config.backend {
        BackendKind::Stub => Arc::new(StubBackend),
        BackendKind::Replay => Arc::new(ReplayBackend::new(load_transcript(config.replay_fixture.as_deref())?)),
        BackendKind::Live => {
            let backend = LiveBackend::from_env(config.backend_config());
            if !backend.has_credential() {
                tracing::warn!(var = %config.api_key_env, "no credential in environment; requests go unauthenticated");
            }
            Arc::new(backend)
        }
    })
}

/// Reading-ordered text of a layout file, one line per scan line. With
/// `ids`, word ids are printed instead and need not be in the vocabulary.
pub fn order(layout_json: &str, vocabulary: &Vocabulary, ids: bool) -> Result<String> {
    let layout = LayoutFile::<f64>::from_json(layout_json)?;
    let ordered = order_markers(&layout.logical_markers(), &layout.config)?;
    if ids {
        let lines: Vec<String> = ordered
            .lines
            .iter()
            .map(|l| l.iter().map(|w| w.as_str()).collect::<Vec<_>>().join(" "))
            .collect();
        return Ok(lines.join("\n"));
    }
    Ok(layout_to_text(&ordered, vocabulary)?)
}

/// Layout file JSON for a simulation spec.
pub fn simulate(spec_json: &str) -> Result<String> {
    let spec = SimSpec::from_json(spec_json)?;
    Ok(spec.to_layout()?.to_json()?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplayOutcome {
    Match,
    Differs { recorded: String, replayed: String },
    Failed(String),
}

#[derive(Clone, Debug, Default)]
pub struct ReplayReport {
    pub outcomes: Vec<ReplayOutcome>,
}

impl ReplayReport {
    pub fn matches(&self) -> usize {
        self.outcomes.iter().filter(|o| **o == ReplayOutcome::Match).count()
    }

    pub fn all_match(&self) -> bool {
        self.matches() == self.outcomes.len()
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, o) in self.outcomes.iter().enumerate() {
            match o {
                ReplayOutcome::Match => {}
                ReplayOutcome::Differs { recorded, replayed } => {
                    writeln!(f, "record {}: response differs", i + 1)?;
                    writeln!(f, "  - {recorded:?}")?;
                    writeln!(f, "  + {replayed:?}")?;
                }
                ReplayOutcome::Failed(e) => writeln!(f, "record {}: {e}", i + 1)?,
            }
        }
        let failed = self.outcomes.iter().filter(|o| matches!(o, ReplayOutcome::Failed(_))).count();
        write!(
            f,
            "replayed {} records: {} match, {} differ, {} failed",
            self.outcomes.len(),
            self.matches(),
            self.outcomes.len() - self.matches() - failed,
            failed
        )
    }
}

/// Re-runs each record's chain and compares both stages with what was logged.
pub fn replay(records: &[SessionRecord], backend: &dyn CompletionBackend, specs: &ChainSpecs) -> ReplayReport {
    let outcomes = records
        .iter()
        .map(|r| match run_chain(r.mode, &r.poem_text, backend, specs) {
            Err(e) => ReplayOutcome::Failed(e.to_string()),
            Ok(out) if out.stage1_text == r.stage1_text && out.stage2_text == r.stage2_text => ReplayOutcome::Match,
            Ok(out) if out.stage2_text == r.stage2_text => ReplayOutcome::Differs {
                recorded: r.stage1_text.clone(),
                replayed: out.stage1_text,
            },
            Ok(out) => ReplayOutcome::Differs {
                recorded: r.stage2_text.clone(),
                replayed: out.stage2_text,
            },
        })
        .collect();
    ReplayReport { outcomes }
}

pub fn read_records(path: &Path) -> Result<LogContents> {
    let contents = read_log(path).with_context(|| format!("reading log {}", path.display()))?;
    for d in &contents.diagnostics {
        eprintln!("{}: skipped {d}", path.display());
    }
    Ok(contents)
}

pub fn stats(records: &[SessionRecord], vocabulary: &Vocabulary, json: bool) -> Result<String> {
    if records.is_empty() {
        bail!("log holds no readable records");
    }
    let report = StatsReport::compute(records, vocabulary)?;
    if json {
        return Ok(serde_json::to_string_pretty(&report)?);
    }
    Ok(report.to_string())
}
