use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when precision or recall had a zero denominator and was defined
    /// as 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub zero_division: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub(crate) fn f1_score(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class precision/recall/F1 from `cm`; `names[c]` labels class code `c`.
pub fn classification_report(cm: &ConfusionMatrix, names: &[&str]) -> Result<ClassificationReport> {
    if names.len() != cm.n_classes() {
        return Err(Error::Input(format!(
            "{} label names for a {}-class confusion matrix",
            names.len(),
            cm.n_classes()
        )));
    }
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput("confusion matrix has no samples".into()));
    }
    let classes: Vec<ClassMetrics> = names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let tp = cm.get(c, c);
            let (precision, p_zero) = ratio(tp, cm.predicted(c));
            let (recall, r_zero) = ratio(tp, cm.support(c));
            ClassMetrics {
                name: (*name).to_owned(),
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: cm.support(c),
                zero_division: p_zero || r_zero,
            }
        })
        .collect();
    let mut report = ClassificationReport::aggregate(classes);
    // support_c · recall_c = TP_c, so the weighted recall is trace / total.
    let accuracy = cm.trace() as f64 / total as f64;
    report.accuracy = accuracy;
    report.weighted_avg.recall = accuracy;
    Ok(report)
}

impl ClassificationReport {
    /// Builds the aggregate rows from per-class rows. With no confusion
    /// matrix available, accuracy is taken as the weighted recall.
    pub fn from_class_rows(classes: Vec<ClassMetrics>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::EmptyInput("report needs at least one class".into()));
        }
        if classes.iter().map(|c| c.support).sum::<u64>() == 0 {
            return Err(Error::EmptyInput("report classes have zero total support".into()));
        }
        Ok(Self::aggregate(classes))
    }

    fn aggregate(classes: Vec<ClassMetrics>) -> Self {
        let n = classes.len() as f64;
        let total: u64 = classes.iter().map(|c| c.support).sum();
        let mean = |f: fn(&ClassMetrics) -> f64| classes.iter().map(f).sum::<f64>() / n;
        let weighted = |f: fn(&ClassMetrics) -> f64| {
            classes.iter().map(|c| c.support as f64 * f(c)).sum::<f64>() / total as f64
        };
        let macro_avg = Averages {
            precision: mean(|c| c.precision),
            recall: mean(|c| c.recall),
            f1: mean(|c| c.f1),
            support: total,
        };
        let weighted_avg = Averages {
            precision: weighted(|c| c.precision),
            recall: weighted(|c| c.recall),
            f1: weighted(|c| c.f1),
            support: total,
        };
        Self {
            accuracy: weighted_avg.recall,
            classes,
            macro_avg,
            weighted_avg,
        }
    }

    pub fn total_support(&self) -> u64 {
        self.weighted_avg.support
    }

    /// Structural checks for reports read back from JSON.
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::Input("report has no classes".into()));
        }
        let values = self
            .classes
            .iter()
            .flat_map(|c| [c.precision, c.recall, c.f1])
            .chain([self.accuracy])
            .chain([&self.macro_avg, &self.weighted_avg].into_iter().flat_map(|a| [a.precision, a.recall, a.f1]));
        for v in values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Input(format!("report metric {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)
            .map_err(|e| Error::format(path, e.line() as u64, e.to_string()))?;
        report.validate()?;
        Ok(report)
    }
}

/// Rounds a non-negative metric half-up to 2 decimals. Values within 1e-9
/// of a half step round up, so that 0.125 and 0.515 print as written.
pub fn round_half_up(x: f64) -> f64 {
    ((x * 100.0) + 0.5 + 1e-9).floor() / 100.0
}

fn cell(x: f64) -> String {
    format!("{:.2}", round_half_up(x))
}

const HEADERS: [&str; 4] = ["Precision", "Recall", "F1-Score", "Support"];
const COL: usize = 10;

/// Fixed-width table. The accuracy row fills only the F1 and support columns.
pub fn format_report(report: &ClassificationReport) -> String {
    let label_width = report
        .classes
        .iter()
        .map(|c| c.name.chars().count())
        .chain([12])
        .max()
        .unwrap_or(12);
    let mut out = String::new();
    let row = |out: &mut String, label: &str, cells: [String; 4]| {
        let _ = write!(out, "{label:<label_width$}");
        for c in cells {
            let _ = write!(out, "{c:>COL$}");
        }
        out.push('\n');
    };
    row(&mut out, "", HEADERS.map(String::from));
    for c in &report.classes {
        row(&mut out, &c.name, [cell(c.precision), cell(c.recall), cell(c.f1), c.support.to_string()]);
    }
    row(
        &mut out,
        "Accuracy",
        [String::new(), String::new(), cell(report.accuracy), report.total_support().to_string()],
    );
    for (label, a) in [("Macro Avg", &report.macro_avg), ("Weighted Avg", &report.weighted_avg)] {
        row(&mut out, label, [cell(a.precision), cell(a.recall), cell(a.f1), a.support.to_string()]);
    }
    out
}
