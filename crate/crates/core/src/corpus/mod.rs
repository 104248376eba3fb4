//! Review corpora: ingest, normalization, label encoding and train/test
//! partitioning.

mod clean;
mod extract;
mod split;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clean::clean_text;
pub use extract::{extract_reviews, extract_reviews_bytes, Selectors};
pub use split::{split_indices, stratified_split, SplitSpec};

/// CSV column holding the review body.
pub const TEXT_COLUMN: &str = "Reviews";
/// CSV column holding the sentiment label.
pub const LABEL_COLUMN: &str = "Classification";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SentimentLabel {
    Negative,
    Neutral,
    Positive,
}

impl SentimentLabel {
    /// All labels in code order. Codes follow the lexicographic order of the
    /// label strings.
    pub const ALL: [SentimentLabel; 3] = [
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
        SentimentLabel::Positive,
    ];

    pub fn code(self) -> u8 {
        match self {
            SentimentLabel::Negative => 0,
            SentimentLabel::Neutral => 1,
            SentimentLabel::Positive => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Negative => "Negative",
            SentimentLabel::Neutral => "Neutral",
            SentimentLabel::Positive => "Positive",
        }
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|l| l.as_str().to_string()).collect()
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawReview {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<SentimentLabel>,
}

/// Reviews that all carry a label, plus per-class counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledCorpus {
    reviews: Vec<RawReview>,
    class_counts: BTreeMap<SentimentLabel, usize>,
    dropped_empty: usize,
}

impl LabeledCorpus {
    pub fn new(reviews: Vec<RawReview>) -> Result<Self> {
        if reviews.is_empty() {
            return Err(Error::EmptyInput("corpus has no reviews".into()));
        }
        let mut class_counts: BTreeMap<SentimentLabel, usize> =
            SentimentLabel::ALL.iter().map(|&l| (l, 0)).collect();
        let mut seen = std::collections::HashSet::new();
        for (i, r) in reviews.iter().enumerate() {
            if r.id.is_empty() {
                return Err(Error::Input(format!("review {i} has an empty id")));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Input(format!("duplicate review id `{}`", r.id)));
            }
            if r.text.is_empty() {
                return Err(Error::Input(format!("review `{}` has empty text", r.id)));
            }
            let label = r
                .label
                .ok_or_else(|| Error::Input(format!("review `{}` has no label", r.id)))?;
            *class_counts.entry(label).or_default() += 1;
        }
        Ok(Self {
            reviews,
            class_counts,
            dropped_empty: 0,
        })
    }

    pub fn reviews(&self) -> &[RawReview] {
        &self.reviews
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn class_counts(&self) -> &BTreeMap<SentimentLabel, usize> {
        &self.class_counts
    }

    pub fn count(&self, label: SentimentLabel) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }

    /// Rows dropped at load time because their text was empty after cleaning.
    pub fn dropped_empty(&self) -> usize {
        self.dropped_empty
    }

    pub fn labels(&self) -> impl Iterator<Item = SentimentLabel> + '_ {
        self.reviews.iter().map(|r| r.label.expect("validated"))
    }

    pub fn texts(&self) -> Vec<&str> {
        self.reviews.iter().map(|r| r.text.as_str()).collect()
    }

    /// Writes the corpus as JSONL with `id`, `text`, `label` keys.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for r in &self.reviews {
            let line = serde_json::json!({
                "id": r.id,
                "text": r.text,
                "label": r.label.map(|l| l.as_str()),
            });
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(CorpusFormat::Csv),
            "jsonl" | "ndjson" => Some(CorpusFormat::Jsonl),
            _ => None,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CorpusFormat::Csv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("row")
        .to_string()
}

/// Loads a labeled corpus. Texts are cleaned; rows whose text is empty
/// after cleaning are dropped and counted.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LabeledCorpus> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.len() == 0 {
        return Err(Error::EmptyInput(format!("{} is empty", path.display())));
    }
    let stem = file_stem(path);
    let (reviews, dropped) = match format {
        CorpusFormat::Csv => read_csv(path, &stem)?,
        CorpusFormat::Jsonl => read_jsonl(path, &stem)?,
    };
    if dropped > 0 {
        log::warn!(
            "{}: dropped {dropped} row(s) with empty text after cleaning",
            path.display()
        );
    }
    if reviews.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} contains no usable rows",
            path.display()
        )));
    }
    let mut corpus = LabeledCorpus::new(reviews)?;
    corpus.dropped_empty = dropped;
    Ok(corpus)
}

fn read_csv(path: &Path, stem: &str) -> Result<(Vec<RawReview>, usize)> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(&display, e))?;
    let headers = reader.headers().map_err(|e| csv_error(&display, e))?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };
    let text_col = column(TEXT_COLUMN)?;
    let label_col = column(LABEL_COLUMN)?;
    if headers.len() != 2 {
        return Err(Error::format(
            display,
            1,
            format!(
                "expected exactly the columns `{TEXT_COLUMN},{LABEL_COLUMN}`, found {}",
                headers.len()
            ),
        ));
    }

    let mut reviews = Vec::new();
    let mut dropped = 0;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(&display, e))?;
        let raw_label = record.get(label_col).unwrap_or_default();
        let label = raw_label
            .parse::<SentimentLabel>()
            .map_err(|label| Error::UnknownLabel { row, label })?;
        let text = clean_text(record.get(text_col).unwrap_or_default());
        if text.is_empty() {
            dropped += 1;
            continue;
        }
        reviews.push(RawReview {
            id: format!("{stem}-{row}"),
            text,
            label: Some(label),
        });
    }
    Ok((reviews, dropped))
}

fn csv_error(path: &str, e: csv::Error) -> Error {
    let offset = e.position().map(|p| p.byte()).unwrap_or(0);
    Error::format(path, offset, e.to_string())
}

#[derive(Deserialize)]
struct JsonlRow {
    #[serde(default)]
    id: Option<String>,
    text: Option<String>,
    label: Option<String>,
}

fn read_jsonl(path: &Path, stem: &str) -> Result<(Vec<RawReview>, usize)> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reviews = Vec::new();
    let mut dropped = 0;
    let mut row = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let parsed: JsonlRow = serde_json::from_str(&line)
            .map_err(|e| Error::format(display.clone(), line_no, e.to_string()))?;
        let text = parsed.text.ok_or_else(|| Error::MissingColumn {
            column: "text".into(),
        })?;
        let raw_label = parsed.label.ok_or_else(|| Error::MissingColumn {
            column: "label".into(),
        })?;
        let label = raw_label
            .parse::<SentimentLabel>()
            .map_err(|label| Error::UnknownLabel { row, label })?;
        let text = clean_text(&text);
        if text.is_empty() {
            dropped += 1;
            continue;
        }
        reviews.push(RawReview {
            id: parsed.id.unwrap_or_else(|| format!("{stem}-{row}")),
            text,
            label: Some(label),
        });
    }
    Ok((reviews, dropped))
}

/// Bidirectional mapping between label strings and integer codes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoder {
    classes: Vec<String>,
}

impl Default for LabelEncoder {
    fn default() -> Self {
        Self {
            classes: SentimentLabel::names(),
        }
    }
}

impl LabelEncoder {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn encode(&self, label: &str) -> Option<u8> {
        self.classes
            .iter()
            .position(|c| c == label)
            .map(|i| i as u8)
    }

    pub fn decode(&self, code: u8) -> Option<&str> {
        self.classes.get(code as usize).map(String::as_str)
    }
}

pub fn encode_labels(corpus: &LabeledCorpus) -> (Vec<u8>, LabelEncoder) {
    let codes = corpus.labels().map(SentimentLabel::code).collect();
    (codes, LabelEncoder::default())
}
