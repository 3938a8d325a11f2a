//! Word tiles, mode markers, and the text rendering of an ordered layout.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{OrderedLayout, WordId};
use crate::mode::Mode;

const DEFAULT_VOCABULARY: &str = include_str!("../data/vocabulary.csv");

#[derive(Debug, Error)]
pub enum VocabularyError {
    #[error("failed to read vocabulary: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed vocabulary table: {0}")]
    Csv(#[from] csv::Error),
    #[error("word id `{0}` appears more than once")]
    DuplicateId(WordId),
    #[error("word tile `{0}` has empty text")]
    EmptyText(WordId),
    #[error("mode marker `{0}` has no mode")]
    MarkerWithoutMode(WordId),
    #[error("expected exactly one marker per mode (4 total), found {0}")]
    MarkerCount(usize),
    #[error("unknown word id `{0}`")]
    UnknownWord(WordId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TileKind {
    Word,
    #[serde(alias = "mode", alias = "marker")]
    ModeMarker,
}

/// A physical tile. Suffixes and punctuation set `attach_left` so they join
/// the preceding word without a space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordTile {
    pub word_id: WordId,
    pub text: String,
    #[serde(default)]
    pub attach_left: bool,
    pub kind: TileKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
}

#[derive(Debug, Deserialize)]
struct Row {
    word_id: String,
    text: String,
    attach_left: bool,
    kind: TileKind,
    #[serde(default)]
    mode: Option<Mode>,
}

#[derive(Clone, Debug)]
pub struct Vocabulary {
    tiles: Vec<WordTile>,
    index: HashMap<WordId, usize>,
    markers: BTreeMap<Mode, WordId>,
}

impl Vocabulary {
    pub fn new(tiles: Vec<WordTile>) -> Result<Self, VocabularyError> {
        let mut index = HashMap::with_capacity(tiles.len());
        let mut markers = BTreeMap::new();
        let mut marker_count = 0;
        for (i, tile) in tiles.iter().enumerate() {
            if index.insert(tile.word_id.clone(), i).is_some() {
                return Err(VocabularyError::DuplicateId(tile.word_id.clone()));
            }
            match tile.kind {
                TileKind::Word if tile.text.is_empty() => {
                    return Err(VocabularyError::EmptyText(tile.word_id.clone()))
                }
                TileKind::Word => {}
                TileKind::ModeMarker => {
                    let mode = tile
                        .mode
                        .ok_or_else(|| VocabularyError::MarkerWithoutMode(tile.word_id.clone()))?;
                    marker_count += 1;
                    markers.insert(mode, tile.word_id.clone());
                }
            }
        }
        if marker_count != 4 || markers.len() != 4 {
            return Err(VocabularyError::MarkerCount(marker_count));
        }
        Ok(Self { tiles, index, markers })
    }

    /// Parses a CSV table with header `word_id,text,attach_left,kind,mode`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, VocabularyError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
        let mut tiles = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            tiles.push(WordTile {
                word_id: WordId::new(row.word_id),
                text: row.text,
                attach_left: row.attach_left,
                kind: row.kind,
                mode: row.mode,
            });
        }
        Self::new(tiles)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, VocabularyError> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    /// The shipped 175-word set plus the four mode markers.
    pub fn builtin() -> Self {
        Self::from_csv_reader(DEFAULT_VOCABULARY.as_bytes()).expect("bundled vocabulary is valid")
    }

    pub fn get(&self, id: &WordId) -> Option<&WordTile> {
        self.index.get(id).map(|&i| &self.tiles[i])
    }

    pub fn contains(&self, id: &WordId) -> bool {
        self.index.contains_key(id)
    }

    pub fn tiles(&self) -> &[WordTile] {
        &self.tiles
    }

    pub fn word_tiles(&self) -> impl Iterator<Item = &WordTile> {
        self.tiles.iter().filter(|t| t.kind == TileKind::Word)
    }

    pub fn word_count(&self) -> usize {
        self.word_tiles().count()
    }

    /// The mode a tile selects, if it is a mode marker.
    pub fn mode_of(&self, id: &WordId) -> Option<Mode> {
        self.get(id).filter(|t| t.kind == TileKind::ModeMarker).and_then(|t| t.mode)
    }

    pub fn is_word(&self, id: &WordId) -> bool {
        self.get(id).is_some_and(|t| t.kind == TileKind::Word)
    }

    pub fn marker_for(&self, mode: Mode) -> &WordId {
        &self.markers[&mode]
    }

    /// Looks up a word tile by its displayed text.
    pub fn find_text(&self, text: &str) -> Option<&WordTile> {
        self.word_tiles().find(|t| t.text == text)
    }
}

/// Joins each line's words with single spaces (no space before `attach_left`
/// tiles) and the lines with newlines.
pub fn layout_to_text(layout: &OrderedLayout, vocabulary: &Vocabulary) -> Result<String, VocabularyError> {
    let mut lines = Vec::with_capacity(layout.lines.len());
    for line in &layout.lines {
        let mut text = String::new();
        for id in line {
            let tile = vocabulary
                .get(id)
                .ok_or_else(|| VocabularyError::UnknownWord(id.clone()))?;
            if !text.is_empty() && !tile.attach_left {
                text.push(' ');
            }
            text.push_str(&tile.text);
        }
        let text = text.trim();
        if !text.is_empty() {
            lines.push(text.to_owned());
        }
    }
    Ok(lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(lines: &[&[&str]]) -> OrderedLayout {
        OrderedLayout {
            lines: lines
                .iter()
                .map(|l| l.iter().map(|s| WordId::from(*s)).collect())
                .collect(),
        }
    }

    #[test]
    fn builtin_has_175_words_and_four_markers() {
        let v = Vocabulary::builtin();
        assert_eq!(v.word_count(), 175);
        assert_eq!(v.tiles().len(), 179);
        for m in Mode::ALL {
            assert_eq!(v.mode_of(v.marker_for(m)), Some(m));
        }
        assert!(v.is_word(&"human".into()));
        assert!(!v.is_word(&"mode_ideate".into()));
    }

    #[test]
    fn text_of_two_line_poem() {
        let v = Vocabulary::builtin();
        let text = layout_to_text(
            &layout(&[&["hate", "delicious", "body"], &["beautiful", "anxious", "heart"]]),
            &v,
        )
        .unwrap();
        assert_eq!(text, "hate delicious body\nbeautiful anxious heart");
    }

    #[test]
    fn empty_layout_is_empty_text() {
        assert_eq!(layout_to_text(&OrderedLayout::default(), &Vocabulary::builtin()).unwrap(), "");
    }

    #[test]
    fn attach_left_joins_without_space() {
        let v = Vocabulary::builtin();
        assert_eq!(layout_to_text(&layout(&[&["machine", "s"]]), &v).unwrap(), "machines");
        assert_eq!(layout_to_text(&layout(&[&["why", "dream", "question"]]), &v).unwrap(), "why dream?");
        // A suffix that opens a line has nothing to attach to.
        assert_eq!(layout_to_text(&layout(&[&["s", "eat"]]), &v).unwrap(), "s eat");
    }

    #[test]
    fn unknown_word_rejected() {
        let err = layout_to_text(&layout(&[&["zzz"]]), &Vocabulary::builtin()).unwrap_err();
        assert!(matches!(err, VocabularyError::UnknownWord(id) if id.as_str() == "zzz"));
    }

    #[test]
    fn marker_count_enforced() {
        let csv = "word_id,text,attach_left,kind,mode\nsun,sun,false,word,\nm1,I,false,mode,interpret\n";
        assert!(matches!(
            Vocabulary::from_csv_reader(csv.as_bytes()),
            Err(VocabularyError::MarkerCount(1))
        ));
        let dup = "word_id,text,attach_left,kind,mode\nsun,sun,false,word,\nsun,sun,false,word,\n";
        assert!(matches!(
            Vocabulary::from_csv_reader(dup.as_bytes()),
            Err(VocabularyError::DuplicateId(_))
        ));
    }
}
