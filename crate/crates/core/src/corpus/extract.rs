//! Offline review extraction from saved HTML pages.

use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};

use super::{clean_text, RawReview};
use crate::error::{Error, Result};

/// CSS selectors locating reviews on a page: `container` matches one element
/// per review; `text` is evaluated inside each container to find the body.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selectors {
    pub container: String,
    pub text: String,
}

impl Default for Selectors {
    fn default() -> Self {
        Self {
            container: "div.review".into(),
            text: ".review-text".into(),
        }
    }
}

impl Selectors {
    fn compile(&self) -> Result<(Selector, Selector)> {
        let parse = |s: &str| {
            Selector::parse(s).map_err(|e| Error::Config(format!("bad selector `{s}`: {e}")))
        };
        Ok((parse(&self.container)?, parse(&self.text)?))
    }
}

/// Extracts reviews from raw page bytes. Non-UTF-8 input is rejected with
/// the offset of the first invalid byte.
pub fn extract_reviews_bytes(
    page: &[u8],
    page_stem: &str,
    selectors: &Selectors,
) -> Result<Vec<RawReview>> {
    let html = std::str::from_utf8(page).map_err(|e| Error::HtmlParse {
        offset: e.valid_up_to(),
        message: "invalid UTF-8".into(),
    })?;
    extract_reviews(html, page_stem, selectors)
}

/// One review per matched container, in document order, with ids
/// `<page_stem>-<ordinal>` (1-based container ordinal). Containers whose
/// text cleans to nothing are skipped; their ordinal is not reused.
pub fn extract_reviews(html: &str, page_stem: &str, selectors: &Selectors) -> Result<Vec<RawReview>> {
    let (container_sel, text_sel) = selectors.compile()?;
    if html.trim().is_empty() {
        return Ok(Vec::new());
    }
    let doc = Html::parse_document(html);
    let mut out = Vec::new();
    for (i, container) in doc.select(&container_sel).enumerate() {
        let raw: Vec<&str> = match container.select(&text_sel).next() {
            Some(node) => node.text().collect(),
            None => container.text().collect(),
        };
        let text = clean_text(&raw.join(" "));
        if text.is_empty() {
            log::warn!("{page_stem}: review container {} has no text", i + 1);
            continue;
        }
        out.push(RawReview {
            id: format!("{page_stem}-{}", i + 1),
            text,
            label: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document() {
        assert!(extract_reviews("", "p", &Selectors::default()).unwrap().is_empty());
    }

    #[test]
    fn no_matching_container() {
        let html = "<html><body><div class='other'>hello</div></body></html>";
        assert!(extract_reviews(html, "p", &Selectors::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn invalid_utf8_reports_offset() {
        let page = b"<p>ok</p>\xff\xfe";
        match extract_reviews_bytes(page, "p", &Selectors::default()) {
            Err(Error::HtmlParse { offset, .. }) => assert_eq!(offset, 9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_selector_is_config_error() {
        let sel = Selectors {
            container: "div[".into(),
            text: "p".into(),
        };
        assert!(matches!(
            extract_reviews("<p></p>", "p", &sel),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn falls_back_to_container_text() {
        let html = "<div class='review'>Plain <b>body</b></div>";
        let got = extract_reviews(html, "pg", &Selectors::default()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id, "pg-1");
        assert_eq!(got[0].text, "plain body");
    }
}
