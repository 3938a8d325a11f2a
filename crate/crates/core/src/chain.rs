//! Two-stage prompt chains and the completion backends that run them.
//!
//! Stage one asks the model to respond to the poem in the mode's style;
//! stage two condenses or reworks that response. Only the stage-two text is
//! shown to the poet.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mode::Mode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unclosed `{{` at byte {0}")]
    Unclosed(usize),
    #[error("stray `}}` at byte {0}")]
    StrayClose(usize),
    #[error("invalid placeholder name `{0}`")]
    BadName(String),
    #[error("no binding for placeholder `{{{0}}}`")]
    MissingBinding(String),
    #[error("template is missing required placeholder `{{{0}}}`")]
    MissingPlaceholder(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot(String),
}

/// Prompt text with `{name}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PromptTemplate {
    source: String,
    pieces: Vec<Piece>,
}

impl PromptTemplate {
    pub fn parse(source: impl Into<String>) -> Result<Self, TemplateError> {
        let source = source.into();
        let mut pieces = Vec::new();
        let mut text = String::new();
        let mut chars = source.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            match c {
                '{' => {
                    let mut name = String::new();
                    loop {
                        match chars.next() {
                            Some((_, '}')) => break,
                            Some((_, ch)) => name.push(ch),
                            None => return Err(TemplateError::Unclosed(i)),
                        }
                    }
                    if name.is_empty() || !name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_') {
                        return Err(TemplateError::BadName(name));
                    }
                    if !text.is_empty() {
                        pieces.push(Piece::Text(std::mem::take(&mut text)));
                    }
                    pieces.push(Piece::Slot(name));
                }
                '}' => return Err(TemplateError::StrayClose(i)),
                _ => text.push(c),
            }
        }
        if !text.is_empty() {
            pieces.push(Piece::Text(text));
        }
        Ok(Self { source, pieces })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.pieces.iter().filter_map(|p| match p {
            Piece::Slot(n) => Some(n.as_str()),
            Piece::Text(_) => None,
        })
    }

    pub fn has_placeholder(&self, name: &str) -> bool {
        self.placeholders().any(|p| p == name)
    }

    /// Single-pass substitution; bound values are inserted verbatim and never
    /// re-scanned for placeholders.
    pub fn render<V: AsRef<str>>(&self, bindings: &HashMap<&str, V>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.source.len());
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => {
                    let value = bindings
                        .get(name.as_str())
                        .ok_or_else(|| TemplateError::MissingBinding(name.clone()))?;
                    out.push_str(value.as_ref());
                }
            }
        }
        Ok(out)
    }
}

impl TryFrom<String> for PromptTemplate {
    type Error = TemplateError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(s)
    }
}

impl From<PromptTemplate> for String {
    fn from(t: PromptTemplate) -> Self {
        t.source
    }
}

pub fn render(template: &PromptTemplate, bindings: &HashMap<&str, &str>) -> Result<String, TemplateError> {
    template.render(bindings)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub mode: Mode,
    pub prompt1: PromptTemplate,
    pub prompt2: PromptTemplate,
}

impl ChainSpec {
    pub fn new(mode: Mode, prompt1: &str, prompt2: &str) -> Result<Self, TemplateError> {
        let spec = Self {
            mode,
            prompt1: PromptTemplate::parse(prompt1)?,
            prompt2: PromptTemplate::parse(prompt2)?,
        };
        if !spec.prompt1.has_placeholder("poem") {
            return Err(TemplateError::MissingPlaceholder("poem"));
        }
        if !spec.prompt2.has_placeholder("response") {
            return Err(TemplateError::MissingPlaceholder("response"));
        }
        Ok(spec)
    }
}

pub const INTERPRET_PROMPT_1: &str = "I just wrote the following text: {poem}. Speculate on what I'm feeling when writing this. Please keep the interpretation short (2-3 sentences).";
pub const INTERPRET_PROMPT_2: &str = "Summarise this: {response} in only 5-15 words.";
pub const COLLABORATE_PROMPT_1: &str = "Select words from the following text: {poem} to form a question that the text seems to be asking or addressing. Then, use other words from the text to answer it (2-3 sentences).";
pub const COLLABORATE_PROMPT_2: &str = "Summarise this: {response} in only 5-15 words.";
pub const IDEATE_PROMPT_1: &str = "The user just input the following text: {poem} Try and develop a creative idea or strategy that builds upon similarities between these words/concepts presented. Please keep your response short (2-3 sentences).";
pub const IDEATE_PROMPT_2: &str = "Reword your answer here: {response} in only 5-15 words.";
pub const ANALOGY_PROMPT_1: &str = "Reframe this the following text with reference to a different discipline: {poem}";
pub const ANALOGY_PROMPT_2: &str = "Repeat the following: {response} except obscure it further.";

/// One chain per mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSpecs(BTreeMap<Mode, ChainSpec>);

impl ChainSpecs {
    /// The shipped prompt set.
    pub fn standard() -> Self {
        let table = [
            (Mode::Interpret, INTERPRET_PROMPT_1, INTERPRET_PROMPT_2),
            (Mode::Collaborate, COLLABORATE_PROMPT_1, COLLABORATE_PROMPT_2),
            (Mode::Ideate, IDEATE_PROMPT_1, IDEATE_PROMPT_2),
            (Mode::Analogy, ANALOGY_PROMPT_1, ANALOGY_PROMPT_2),
        ];
        Self(
            table
                .into_iter()
                .map(|(m, p1, p2)| (m, ChainSpec::new(m, p1, p2).expect("built-in templates parse")))
                .collect(),
        )
    }

    pub fn from_specs(specs: Vec<ChainSpec>) -> Result<Self, ChainError> {
        let mut map = BTreeMap::new();
        for s in specs {
            if map.insert(s.mode, s.clone()).is_some() {
                return Err(ChainError::SpecSet(format!("duplicate chain for mode {}", s.mode)));
            }
        }
        if map.len() != Mode::ALL.len() {
            return Err(ChainError::SpecSet(format!("expected 4 chains, got {}", map.len())));
        }
        Ok(Self(map))
    }

    pub fn get(&self, mode: Mode) -> &ChainSpec {
        &self.0[&mode]
    }
}

impl Default for ChainSpecs {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    First,
    Second,
}

impl Stage {
    pub fn number(&self) -> u8 {
        match self {
            Stage::First => 1,
            Stage::Second => 2,
        }
    }
}

/// What a backend is asked to complete. `prompt` is the only thing a real
/// model sees; the rest lets fixture backends key their answers.
#[derive(Clone, Copy, Debug)]
pub struct CompletionRequest<'a> {
    pub mode: Mode,
    pub stage: Stage,
    pub poem: &'a str,
    pub prompt: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("backend returned HTTP {status}: {message}")]
    Http { status: u16, message: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("no recorded exchange for {mode} poem {poem:?}")]
    NoFixture { mode: Mode, poem: String },
}

impl BackendError {
    /// Transport failures and timeouts. HTTP error replies are answers, not
    /// lost requests, so they are not retried.
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transport(_) | BackendError::Timeout)
    }
}

pub trait CompletionBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Offline backend whose answers are a pure function of the prompt text.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubBackend;

impl StubBackend {
    pub fn answer(prompt: &str) -> String {
        let digest = Sha256::digest(prompt.as_bytes());
        let mut words: Vec<&str> = prompt
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            words = prompt.split_whitespace().collect();
        }
        let tag = digest[..4].iter().map(|b| format!("{b:02x}")).collect::<String>();
        if words.is_empty() {
            return format!("echo {tag}");
        }
        let picked = (0..8)
            .map(|i| words[digest[4 + i] as usize % words.len()])
            .collect::<Vec<_>>()
            .join(" ");
        format!("echo {tag} {picked}")
    }
}

impl CompletionBackend for StubBackend {
    fn id(&self) -> &str {
        "stub"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        if request.prompt.split_whitespace().next().is_none() {
            return Ok(String::new());
        }
        Ok(Self::answer(request.prompt))
    }
}

/// One recorded exchange. `stage1` may be absent when only the displayed
/// text was captured; the replay then answers stage one with the final text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub mode: Mode,
    pub poem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1: Option<String>,
    pub stage2: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(default = "transcript_version")]
    pub format_version: u32,
    #[serde(rename = "exchange", default)]
    pub exchanges: Vec<TranscriptEntry>,
}

fn transcript_version() -> u32 {
    1
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("failed to read transcript: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed transcript: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported transcript format_version {0}")]
    Version(u32),
}

impl Transcript {
    pub fn from_toml(text: &str) -> Result<Self, TranscriptError> {
        let t: Transcript = toml::from_str(text)?;
        if t.format_version != 1 {
            return Err(TranscriptError::Version(t.format_version));
        }
        Ok(t)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TranscriptError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The four example exchanges shipped with the crate.
    pub fn examples() -> Self {
        Self::from_toml(include_str!("../data/examples.toml")).expect("bundled transcript parses")
    }
}

/// Answers from recorded transcripts, keyed by exact `(mode, poem)`.
#[derive(Clone, Debug, Default)]
pub struct ReplayBackend {
    entries: HashMap<(Mode, String), TranscriptEntry>,
}

impl ReplayBackend {
    pub fn new(transcript: Transcript) -> Self {
        Self {
            entries: transcript
                .exchanges
                .into_iter()
                .map(|e| ((e.mode, e.poem.clone()), e))
                .collect(),
        }
    }
}

impl CompletionBackend for ReplayBackend {
    fn id(&self) -> &str {
        "replay"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let entry = self
            .entries
            .get(&(request.mode, request.poem.to_owned()))
            .ok_or_else(|| BackendError::NoFixture {
                mode: request.mode,
                poem: request.poem.to_owned(),
            })?;
        Ok(match request.stage {
            Stage::First => entry.stage1.clone().unwrap_or_else(|| entry.stage2.clone()),
            Stage::Second => entry.stage2.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("poem is empty")]
    EmptyPoem,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("stage {} failed: {source}", stage.number())]
    Backend {
        stage: Stage,
        #[source]
        source: BackendError,
    },
    #[error("stage {} returned an empty completion", stage.number())]
    EmptyResponse { stage: Stage },
    #[error("invalid chain set: {0}")]
    SpecSet(String),
}

impl ChainError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            ChainError::Backend { stage, .. } | ChainError::EmptyResponse { stage } => Some(*stage),
            _ => None,
        }
    }
}

pub const MIN_SUMMARY_WORDS: usize = 5;
pub const MAX_SUMMARY_WORDS: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthCheck {
    Pass,
    Warning { words: usize },
}

/// Interpret, Collaborate and Ideate ask for 5-15 words; Analogy has no limit.
/// Violations only warn.
pub fn validate_length(stage2_text: &str, mode: Mode) -> LengthCheck {
    if mode == Mode::Analogy {
        return LengthCheck::Pass;
    }
    let words = stage2_text.split_whitespace().count();
    if (MIN_SUMMARY_WORDS..=MAX_SUMMARY_WORDS).contains(&words) {
        LengthCheck::Pass
    } else {
        LengthCheck::Warning { words }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainResult {
    pub poem: String,
    pub mode: Mode,
    pub stage1_text: String,
    /// The text shown to the poet.
    pub stage2_text: String,
    pub stage1_latency_ms: u64,
    pub stage2_latency_ms: u64,
    pub backend: String,
    pub length_warning: bool,
}

impl ChainResult {
    pub fn total_latency_ms(&self) -> u64 {
        self.stage1_latency_ms + self.stage2_latency_ms
    }
}

fn run_stage<B: CompletionBackend + ?Sized>(
    backend: &B,
    mode: Mode,
    stage: Stage,
    poem: &str,
    prompt: &str,
) -> Result<(String, u64), ChainError> {
    let started = Instant::now();
    let text = backend
        .complete(&CompletionRequest { mode, stage, poem, prompt })
        .map_err(|source| ChainError::Backend { stage, source })?;
    let elapsed = started.elapsed().as_millis() as u64;
    if text.trim().is_empty() {
        return Err(ChainError::EmptyResponse { stage });
    }
    Ok((text, elapsed))
}

pub fn run_chain<B: CompletionBackend + ?Sized>(
    mode: Mode,
    poem: &str,
    backend: &B,
    specs: &ChainSpecs,
) -> Result<ChainResult, ChainError> {
    if poem.trim().is_empty() {
        return Err(ChainError::EmptyPoem);
    }
    let spec = specs.get(mode);
    let prompt1 = spec.prompt1.render(&HashMap::from([("poem", poem)]))?;
    let (stage1_text, stage1_latency_ms) = run_stage(backend, mode, Stage::First, poem, &prompt1)?;
    let prompt2 = spec
        .prompt2
        .render(&HashMap::from([("response", stage1_text.as_str())]))?;
    let (stage2_text, stage2_latency_ms) = run_stage(backend, mode, Stage::Second, poem, &prompt2)?;
    let length_warning = matches!(validate_length(&stage2_text, mode), LengthCheck::Warning { .. });
    Ok(ChainResult {
        poem: poem.to_owned(),
        mode,
        stage1_text,
        stage2_text,
        stage1_latency_ms,
        stage2_latency_ms,
        backend: backend.id().to_owned(),
        length_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const POEM: &str = "hate delicious body\nbeautiful anxious heart";

    #[test]
    fn collaborate_stage_one_rendering() {
        let specs = ChainSpecs::standard();
        let out = render(&specs.get(Mode::Collaborate).prompt1, &HashMap::from([("poem", POEM)])).unwrap();
        assert_eq!(
            out,
            "Select words from the following text: hate delicious body\nbeautiful anxious heart to form a question that the text seems to be asking or addressing. Then, use other words from the text to answer it (2-3 sentences)."
        );
    }

    #[test]
    fn interpret_stage_two_rendering() {
        let specs = ChainSpecs::standard();
        let out = render(&specs.get(Mode::Interpret).prompt2, &HashMap::from([("response", "R")])).unwrap();
        assert_eq!(out, "Summarise this: R in only 5-15 words.");
    }

    #[test]
    fn stub_handles_prompts_without_words() {
        assert!(StubBackend::answer("[ ?").starts_with("echo "));
        assert_eq!(StubBackend::answer("").split_whitespace().count(), 2);
    }

    #[test]
    fn plain_template_unchanged() {
        let t = PromptTemplate::parse("no slots here.").unwrap();
        assert_eq!(render(&t, &HashMap::new()).unwrap(), "no slots here.");
    }

    #[test]
    fn missing_binding_and_extra_binding() {
        let t = PromptTemplate::parse("a {poem} b").unwrap();
        assert_eq!(
            render(&t, &HashMap::from([("response", "x")])),
            Err(TemplateError::MissingBinding("poem".into()))
        );
        assert_eq!(render(&t, &HashMap::from([("poem", "p"), ("other", "q")])).unwrap(), "a p b");
    }

    #[test]
    fn substituted_values_are_not_rescanned() {
        let t = PromptTemplate::parse("<{poem}>").unwrap();
        assert_eq!(render(&t, &HashMap::from([("poem", "{response}")])).unwrap(), "<{response}>");
    }

    #[test]
    fn malformed_templates() {
        assert_eq!(PromptTemplate::parse("a {poem"), Err(TemplateError::Unclosed(2)));
        assert_eq!(PromptTemplate::parse("a } b"), Err(TemplateError::StrayClose(2)));
        assert!(matches!(PromptTemplate::parse("{two words}"), Err(TemplateError::BadName(_))));
        assert!(matches!(PromptTemplate::parse("{}"), Err(TemplateError::BadName(_))));
        assert_eq!(
            ChainSpec::new(Mode::Ideate, "no poem", "{response}"),
            Err(TemplateError::MissingPlaceholder("poem"))
        );
    }

    #[test]
    fn length_rule() {
        let ten = "one two three four five six seven eight nine ten";
        assert_eq!(validate_length(ten, Mode::Collaborate), LengthCheck::Pass);
        assert_eq!(validate_length("too short now", Mode::Ideate), LengthCheck::Warning { words: 3 });
        let forty = vec!["w"; 40].join(" ");
        assert_eq!(validate_length(&forty, Mode::Analogy), LengthCheck::Pass);
        assert_eq!(validate_length(&forty, Mode::Interpret), LengthCheck::Warning { words: 40 });
    }

    struct Fixed(&'static str);
    impl CompletionBackend for Fixed {
        fn id(&self) -> &str {
            "fixed"
        }
        fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, BackendError> {
            Ok(self.0.to_owned())
        }
    }

    #[test]
    fn overlong_summary_warns() {
        let twenty = "a b c d e f g h i j k l m n o p q r s t";
        let r = run_chain(Mode::Interpret, POEM, &Fixed(twenty), &ChainSpecs::standard()).unwrap();
        assert!(r.length_warning);
        assert_eq!(r.stage2_text, twenty);
    }

    #[test]
    fn empty_completion_is_an_error() {
        let err = run_chain(Mode::Ideate, POEM, &Fixed("  "), &ChainSpecs::standard()).unwrap_err();
        assert_eq!(err, ChainError::EmptyResponse { stage: Stage::First });
        assert_eq!(
            run_chain(Mode::Ideate, " ", &StubBackend, &ChainSpecs::standard()),
            Err(ChainError::EmptyPoem)
        );
    }

    #[test]
    fn stub_is_deterministic() {
        let specs = ChainSpecs::standard();
        let a = run_chain(Mode::Analogy, POEM, &StubBackend, &specs).unwrap();
        let mut b = run_chain(Mode::Analogy, POEM, &StubBackend, &specs).unwrap();
        b.stage1_latency_ms = a.stage1_latency_ms;
        b.stage2_latency_ms = a.stage2_latency_ms;
        assert_eq!(a, b);
        assert_ne!(a.stage1_text, a.stage2_text);
    }

    #[test]
    fn replay_reproduces_collaborate_example() {
        let backend = ReplayBackend::new(Transcript::examples());
        let r = run_chain(Mode::Collaborate, POEM, &backend, &ChainSpecs::standard()).unwrap();
        assert_eq!(r.stage2_text, "Delicious hate, body beautiful,\nAnxious heart, artfully dutiful.");
        let miss = run_chain(Mode::Analogy, POEM, &backend, &ChainSpecs::standard()).unwrap_err();
        assert_eq!(miss.stage(), Some(Stage::First));
    }

    #[test]
    fn spec_set_requires_all_modes() {
        let one = ChainSpecs::standard().get(Mode::Ideate).clone();
        assert!(ChainSpecs::from_specs(vec![one]).is_err());
    }
}
