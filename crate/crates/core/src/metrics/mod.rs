//! Confusion matrices, classification reports, model comparison and
//! training-curve emission.

mod compare;
mod report;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use compare::{compare_models, format_comparison, Comparison, ComparisonRow, RANKED_METRICS};
pub use report::{
    classification_report, format_report, round_half_up, Averages, ClassMetrics, ClassificationReport,
};

/// `counts[t][p]`: rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if c == 0 || counts.iter().any(|r| r.len() != c) {
            return Err(Error::Input("confusion matrix must be square and non-empty".into()));
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Row sum: number of samples whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// Column sum: number of samples predicted as `c`.
    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }
}

pub fn confusion_matrix(y_true: &[u8], y_pred: &[u8], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Input(format!(
            "y_true has {} labels but y_pred has {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if n_classes == 0 {
        return Err(Error::Input("confusion matrix needs at least one class".into()));
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        if t as usize >= n_classes || p as usize >= n_classes {
            return Err(Error::Input(format!(
                "label code out of range at index {i}: true {t}, predicted {p}, classes {n_classes}"
            )));
        }
        counts[t as usize][p as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// One row of a training curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

pub const CURVE_HEADER: &str = "epoch,loss,train_accuracy,test_accuracy";

pub fn curves_csv(traces: &[EpochTrace]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for t in traces {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6}",
            t.epoch, t.loss, t.train_accuracy, t.test_accuracy
        );
    }
    out
}

/// Parses the CSV produced by [`curves_csv`]. `path` only labels errors.
pub fn parse_curves_csv(text: &str, path: &str) -> Result<Vec<EpochTrace>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(Error::format(path, 1, format!("expected header `{CURVE_HEADER}`")));
    }
    let mut traces = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = (fields.len() == 4)
            .then(|| {
                Some(EpochTrace {
                    epoch: fields[0].parse().ok()?,
                    loss: fields[1].parse().ok()?,
                    train_accuracy: fields[2].parse().ok()?,
                    test_accuracy: fields[3].parse().ok()?,
                })
            })
            .flatten();
        match parsed {
            Some(t) => traces.push(t),
            None => return Err(Error::format(path, i as u64 + 2, format!("malformed curve row `{line}`"))),
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_and_off_diagonal_examples() {
        let cm = confusion_matrix(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.trace(), 3);
        assert_eq!(cm.counts(), &[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);

        let cm = confusion_matrix(&[0, 0], &[1, 1], 3).unwrap();
        assert_eq!(cm.get(0, 1), 2);
        assert_eq!(cm.total(), 2);
        assert_eq!(cm.trace(), 0);
    }

    #[test]
    fn errors_name_the_index() {
        assert!(confusion_matrix(&[0, 1], &[0], 3).is_err());
        let msg = confusion_matrix(&[0, 1, 5], &[0, 1, 1], 3).unwrap_err().to_string();
        assert!(msg.contains("index 2"), "{msg}");
    }

    #[test]
    fn random_instance_matches_pair_tally() {
        let mut rng = crate::seed::rng(50);
        use rand::Rng;
        let t: Vec<u8> = (0..50).map(|_| rng.gen_range(0..3)).collect();
        let p: Vec<u8> = (0..50).map(|_| rng.gen_range(0..3)).collect();
        let cm = confusion_matrix(&t, &p, 3).unwrap();
        for i in 0..3u8 {
            for j in 0..3u8 {
                let tally = t.iter().zip(&p).filter(|&(&a, &b)| a == i && b == j).count() as u64;
                assert_eq!(cm.get(i as usize, j as usize), tally);
            }
        }
    }

    #[test]
    fn curve_csv_layout() {
        let traces = vec![
            EpochTrace { epoch: 1, loss: 1.0986122886681098, train_accuracy: 0.5, test_accuracy: 0.25 },
            EpochTrace { epoch: 2, loss: 0.75, train_accuracy: 2.0 / 3.0, test_accuracy: 1.0 },
        ];
        let csv = curves_csv(&traces);
        assert_eq!(
            csv,
            "epoch,loss,train_accuracy,test_accuracy\n\
             1,1.098612,0.500000,0.250000\n\
             2,0.750000,0.666667,1.000000\n"
        );
        let back = parse_curves_csv(&csv, "c.csv").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].test_accuracy, 1.0);
        assert!(parse_curves_csv("epoch,loss\n", "c.csv").is_err());
        let err = parse_curves_csv(&format!("{CURVE_HEADER}\n1,x,0,0\n"), "c.csv").unwrap_err();
        assert!(matches!(err, Error::Format { offset, .. } if offset == 2));
    }

    proptest! {
        #[test]
        fn relabeling_permutes_the_matrix(
            pairs in proptest::collection::vec((0u8..3, 0u8..3), 1..60),
            perm_idx in 0usize..6,
        ) {
            const PERMS: [[u8; 3]; 6] = [[0,1,2],[0,2,1],[1,0,2],[1,2,0],[2,0,1],[2,1,0]];
            let perm = PERMS[perm_idx];
            let (t, p): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
            let mut shuffled: Vec<(u8, u8)> = pairs.iter().map(|&(a, b)| (perm[a as usize], perm[b as usize])).collect();
            shuffled.reverse();
            let (t2, p2): (Vec<u8>, Vec<u8>) = shuffled.into_iter().unzip();
            let a = confusion_matrix(&t, &p, 3).unwrap();
            let b = confusion_matrix(&t2, &p2, 3).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(a.get(i, j), b.get(perm[i] as usize, perm[j] as usize));
                }
            }
        }
    }
}
