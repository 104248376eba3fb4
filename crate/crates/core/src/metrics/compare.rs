use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::report::{round_half_up, ClassificationReport};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

impl ComparisonRow {
    fn metric(&self, name: &str) -> f64 {
        match name {
            "accuracy" => self.accuracy,
            "macro_f1" => self.macro_f1,
            "weighted_precision" => self.weighted_precision,
            "weighted_recall" => self.weighted_recall,
            "weighted_f1" => self.weighted_f1,
            _ => unreachable!("unknown metric {name}"),
        }
    }
}

pub const RANKED_METRICS: [&str; 5] = [
    "weighted_f1",
    "accuracy",
    "macro_f1",
    "weighted_precision",
    "weighted_recall",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Sorted by weighted F1, best first.
    pub rows: Vec<ComparisonRow>,
    /// Metric name → best model name.
    pub best: BTreeMap<String, String>,
}

/// Orders by the metric as displayed (half-up to 2 decimals), descending,
/// then by name ascending. Differences below display precision are ties.
fn by_displayed(metric: &str) -> impl Fn(&ComparisonRow, &ComparisonRow) -> Ordering + '_ {
    move |a, b| {
        round_half_up(b.metric(metric))
            .total_cmp(&round_half_up(a.metric(metric)))
            .then_with(|| a.name.cmp(&b.name))
    }
}

pub fn compare_models(reports: &[(String, ClassificationReport)]) -> Result<Comparison> {
    if reports.is_empty() {
        return Err(Error::Input("no reports to compare".into()));
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|(name, r)| ComparisonRow {
            name: name.clone(),
            accuracy: r.accuracy,
            macro_f1: r.macro_avg.f1,
            weighted_precision: r.weighted_avg.precision,
            weighted_recall: r.weighted_avg.recall,
            weighted_f1: r.weighted_avg.f1,
        })
        .collect();
    let best = RANKED_METRICS
        .iter()
        .map(|&m| {
            let top = rows.iter().min_by(|a, b| by_displayed(m)(a, b)).expect("non-empty");
            (m.to_owned(), top.name.clone())
        })
        .collect();
    rows.sort_by(by_displayed("weighted_f1"));
    Ok(Comparison { rows, best })
}

pub fn format_comparison(cmp: &Comparison) -> String {
    let width = cmp.rows.iter().map(|r| r.name.chars().count()).chain([5]).max().unwrap_or(5);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "Model");
    for m in RANKED_METRICS {
        let _ = write!(out, "{m:>20}");
    }
    out.push('\n');
    for row in &cmp.rows {
        let _ = write!(out, "{:<width$}", row.name);
        for m in RANKED_METRICS {
            let _ = write!(out, "{:>20.2}", round_half_up(row.metric(m)));
        }
        out.push('\n');
    }
    out.push('\n');
    for (metric, name) in &cmp.best {
        let _ = writeln!(out, "best {metric}: {name}");
    }
    out
}
