use unicode_normalization::UnicodeNormalization;

/// Passes are repeated until the text stops changing; double-escaped
/// entities and case mappings that produce new decomposable characters
/// settle within a few rounds.
const MAX_PASSES: usize = 8;

/// Normalizes review text: HTML entities decoded, NFC, control characters
/// removed, whitespace collapsed and trimmed, lowercased. Punctuation and
/// stopwords are kept.
pub fn clean_text(text: &str) -> String {
    let mut current = clean_once(text);
    for _ in 1..MAX_PASSES {
        let next = clean_once(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn clean_once(text: &str) -> String {
    let decoded = html_escape::decode_html_entities(text);
    let lowered = decoded.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    let mut pending_space = false;
    for c in lowered.nfc() {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_control() {
            continue;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(clean_text("  Good   DRUG  "), "good drug");
        assert_eq!(clean_text("works &amp; helps"), "works & helps");
        assert_eq!(clean_text("\u{0000}ok\u{0000}"), "ok");
    }

    #[test]
    fn composes_and_keeps_punctuation() {
        assert_eq!(clean_text("Cafe\u{0301}!"), "caf\u{e9}!");
        assert_eq!(clean_text("I was not\tdizzy, at all."), "i was not dizzy, at all.");
        assert_eq!(clean_text("a\r\n\r\nb"), "a b");
        assert_eq!(clean_text(" \u{7}\u{1b} "), "");
    }

    #[test]
    fn nested_entities_settle() {
        assert_eq!(clean_text("&amp;amp; &lt;b&gt;"), "& <b>");
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,40}|[ a-zA-Z&;#0-9\\t\\n\\u{0}]{0,40}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once);
        }

        #[test]
        fn no_edge_or_double_spaces(s in "\\PC{0,40}") {
            let out = clean_text(&s);
            prop_assert!(!out.starts_with(' ') && !out.ends_with(' '));
            prop_assert!(!out.contains("  "));
            prop_assert!(!out.chars().any(|c| c.is_control()));
        }
    }
}
