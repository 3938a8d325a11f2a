//! Writes a deterministic 413-record session log: 244 collaborate, 78 ideate,
//! 58 interpret and 33 analogy poems over 111 distinct tiles of the built-in
//! vocabulary, "human" the most used input word. Responses come from the stub
//! backend, so `poetslate replay --check` reproduces them.
//!
//! cargo run -p poetslate --example synthetic_log -- fixtures/synthetic413.log

use std::path::PathBuf;

use poetslate_core::analytics::{append_record, SessionRecord, RECORD_SCHEMA_VERSION};
use poetslate_core::geometry::OrderedLayout;
use poetslate_core::{layout_to_text, run_chain, ChainSpecs, Mode, StubBackend, Vocabulary, WordId};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COUNTS: [(Mode, usize); 4] = [
    (Mode::Collaborate, 244),
    (Mode::Ideate, 78),
    (Mode::Interpret, 58),
    (Mode::Analogy, 33),
];
const DISTINCT_TILES: usize = 111;
const PARTICIPANTS: usize = 14;
const FAVOURITES: [&str; 10] = [
    "human", "dead", "deception", "memory", "machine", "bad", "filth", "heaven", "delicious", "eat",
];

fn main() -> anyhow::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic413.log".into()));
    if out.exists() {
        std::fs::remove_file(&out)?;
    }
    let vocab = Vocabulary::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(413);

    let mut others: Vec<WordId> = vocab
        .word_tiles()
        .filter(|t| !t.attach_left && !FAVOURITES.contains(&t.word_id.as_str()))
        .map(|t| t.word_id.clone())
        .collect();
    others.shuffle(&mut rng);
    others.truncate(DISTINCT_TILES - FAVOURITES.len());
    let favourites: Vec<WordId> = FAVOURITES.iter().map(|w| WordId::from(*w)).collect();

    let mut modes: Vec<Mode> = COUNTS.iter().flat_map(|(m, n)| std::iter::repeat_n(*m, *n)).collect();
    modes.shuffle(&mut rng);

    // Every chosen tile appears at least once: the unused ones are dealt out first.
    let mut unused = others.clone();
    let specs = ChainSpecs::standard();
    let start_ms = 1_700_000_000_000u64;
    for (i, mode) in modes.iter().enumerate() {
        let len = rng.random_range(3..=7);
        let mut words = vec![favourites[0].clone()];
        while words.len() < len {
            let w = if let Some(w) = unused.pop() {
                w
            } else if rng.random_bool(0.45) {
                // Earlier favourites are drawn more often.
                let k = rng.random_range(0..favourites.len());
                favourites[rng.random_range(0..=k)].clone()
            } else {
                others.choose(&mut rng).expect("tiles").clone()
            };
            words.push(w);
        }
        words[1..].shuffle(&mut rng);
        let cut = rng.random_range(1..words.len());
        let layout = OrderedLayout {
            lines: vec![words[..cut].to_vec(), words[cut..].to_vec()],
        };
        let poem = layout_to_text(&layout, &vocab)?;
        let result = run_chain(*mode, &poem, &StubBackend, &specs)?;
        let record = SessionRecord {
            schema_version: RECORD_SCHEMA_VERSION,
            timestamp_ms: start_ms + i as u64 * 2_917_000,
            participant: Some(format!("p{:02}", i % PARTICIPANTS + 1)),
            mode: *mode,
            poem_text: poem,
            word_ids: layout.flatten(),
            stage1_text: result.stage1_text,
            stage2_text: result.stage2_text,
            total_latency_ms: 1_800 + rng.random_range(0..2_400),
        };
        append_record(&out, &record)?;
    }
    println!("wrote {} records to {}", modes.len(), out.display());
    Ok(())
}
