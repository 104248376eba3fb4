//! Seeded generator for the small bundled review corpus used in tests and
//! demos. Each class draws from its own phrase pool, so the corpus is
//! lexically separable.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{SentimentLabel, LABEL_COLUMN, TEXT_COLUMN};
use crate::error::{Error, Result};
use crate::seed;

/// Class counts of the bundled `mini_corpus.csv`.
pub const MINI_CORPUS_COUNTS: [(SentimentLabel, usize); 3] = [
    (SentimentLabel::Negative, 150),
    (SentimentLabel::Neutral, 60),
    (SentimentLabel::Positive, 90),
];
pub const MINI_CORPUS_SEED: u64 = 20_240_417;

const PHRASES_PER_REVIEW: usize = 4;
const OPENERS: &[&str] = &["I took", "Been on", "My doctor prescribed", "Started", "Tried"];
const DRUGS: &[&str] = &[
    "lisinopril",
    "metformin",
    "sertraline",
    "ibuprofen",
    "gabapentin",
    "omeprazole",
    "amlodipine",
    "prednisone",
];
const DURATIONS: &[&str] = &[
    "for two weeks",
    "for three months",
    "since last year",
    "for a few days",
    "after surgery",
];

fn phrases(label: SentimentLabel) -> &'static [&'static str] {
    match label {
        SentimentLabel::Negative => &[
            "made me feel terrible",
            "awful nausea every morning",
            "worst medication I have taken",
            "my pain got much worse",
            "horrible dizziness and vomiting",
            "would never recommend it",
            "caused insomnia and a rash",
            "total waste of money",
            "I had to stop taking it",
        ],
        SentimentLabel::Neutral => &[
            "not sure it does anything",
            "some days okay, some days not",
            "mild effects either way",
            "no real change so far",
            "it is average I suppose",
            "too early to tell",
            "neither helped nor hurt",
            "hard to say honestly",
        ],
        SentimentLabel::Positive => &[
            "works wonderfully well",
            "finally pain free",
            "highly recommend this",
            "life changing relief",
            "feeling great and energetic",
            "best medicine so far",
            "helped me sleep soundly",
            "my blood pressure is perfect now",
        ],
    }
}

/// Generates `(text, label)` rows with the given per-class counts, in a
/// seeded shuffled order.
pub fn synthetic_reviews(counts: &[(SentimentLabel, usize)], seed: u64) -> Vec<(String, SentimentLabel)> {
    let mut rng = seed::rng(seed);
    let mut rows = Vec::new();
    for &(label, count) in counts {
        let pool = phrases(label);
        for i in 0..count {
            let picked: Vec<&str> = pool.choose_multiple(&mut rng, PHRASES_PER_REVIEW).copied().collect();
            let opener = OPENERS.choose(&mut rng).unwrap();
            let drug = DRUGS.choose(&mut rng).unwrap();
            let duration = DURATIONS.choose(&mut rng).unwrap();
            let mut text = format!("{opener} {drug} {duration}. {}.", picked.join(", "));
            // Sprinkle the CSV edge cases the loader must survive.
            match rng.gen_range(0..20) {
                0 => text.push_str(" The pharmacist said \"give it time\"."),
                1 => text.push_str("\nUpdate: same as before."),
                2 => text = format!("  {}  ", text.to_uppercase()),
                _ => {}
            }
            if i % 37 == 5 {
                text.push_str(" Side note &amp; more.");
            }
            rows.push((text, label));
        }
    }
    rows.shuffle(&mut rng);
    rows
}

/// Writes rows as a `Reviews,Classification` CSV.
pub fn write_csv(rows: &[(String, SentimentLabel)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path.display().to_string(), 0, e.to_string()))?;
    let io = |e: csv::Error| Error::format(path.display().to_string(), 0, e.to_string());
    w.write_record([TEXT_COLUMN, LABEL_COLUMN]).map_err(io)?;
    for (text, label) in rows {
        w.write_record([text.as_str(), label.as_str()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn mini_corpus_rows() -> Vec<(String, SentimentLabel)> {
    synthetic_reviews(&MINI_CORPUS_COUNTS, MINI_CORPUS_SEED)
}
