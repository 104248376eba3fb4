//! Bundled fixtures agree with the code that defines them. Set
//! `SENTIPIPE_BLESS=1` to regenerate.

use std::path::PathBuf;

use sentipipe::corpus::synthetic::{mini_corpus_rows, write_csv};
use sentipipe::corpus::{extract_reviews_bytes, load_corpus, CorpusFormat, Selectors, SentimentLabel};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn bless() -> bool {
    std::env::var_os("SENTIPIPE_BLESS").is_some()
}

#[test]
fn mini_corpus_matches_generator() {
    let path = fixture("mini_corpus.csv");
    if bless() {
        write_csv(&mini_corpus_rows(), &path).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let fresh = dir.path().join("mini_corpus.csv");
    write_csv(&mini_corpus_rows(), &fresh).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&fresh).unwrap());

    let corpus = load_corpus(&path, CorpusFormat::Csv).unwrap();
    assert_eq!(corpus.len(), 300);
    assert_eq!(corpus.count(SentimentLabel::Negative), 150);
    assert_eq!(corpus.count(SentimentLabel::Neutral), 60);
    assert_eq!(corpus.count(SentimentLabel::Positive), 90);
}

#[test]
fn webmd_fixture_matches_golden() {
    let page = std::fs::read(fixture("webmd_fixture_01.html")).unwrap();
    let got = extract_reviews_bytes(&page, "webmd_fixture_01", &Selectors::default()).unwrap();
    let golden = std::fs::read_to_string(fixture("webmd_fixture_01.golden.jsonl")).unwrap();
    let want: Vec<sentipipe::corpus::RawReview> =
        golden.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(got.len(), 3);
    assert_eq!(got, want);
}

#[test]
fn unmatched_selector_and_empty_page_give_no_reviews() {
    let page = std::fs::read(fixture("webmd_fixture_01.html")).unwrap();
    let none = Selectors {
        container: "article.comment".into(),
        ..Selectors::default()
    };
    assert!(extract_reviews_bytes(&page, "p", &none).unwrap().is_empty());
    assert!(extract_reviews_bytes(b"", "p", &Selectors::default()).unwrap().is_empty());
}
