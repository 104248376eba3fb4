//! SMOTE oversampling in embedding space.

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::SentimentLabel;
use crate::embedding::{EmbeddedDataset, SYNTHETIC_PREFIX};
use crate::error::{Error, Result};
use crate::seed::keyed_rng;

/// Where oversampling happens relative to the train/test split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteStage {
    PreSplit,
    #[default]
    TrainOnly,
}

impl std::str::FromStr for SmoteStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "pre_split" => Ok(SmoteStage::PreSplit),
            "train_only" => Ok(SmoteStage::TrainOnly),
            other => Err(format!("unknown SMOTE stage `{other}` (pre_split|train_only)")),
        }
    }
}

/// Target per-class counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteStrategy {
    /// Raise every class to the majority count.
    #[default]
    Equalize,
    /// Raise each listed class to at least the given count.
    Targets(BTreeMap<u8, usize>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteParams {
    pub k: usize,
    #[serde(default)]
    pub strategy: SmoteStrategy,
    pub seed: u64,
    #[serde(default)]
    pub stage: SmoteStage,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self {
            k: 5,
            strategy: SmoteStrategy::Equalize,
            seed: 0,
            stage: SmoteStage::TrainOnly,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SmoteOutcome {
    pub dataset: EmbeddedDataset,
    /// Synthetic rows added per class code.
    pub synthesized: BTreeMap<u8, usize>,
    pub warnings: Vec<String>,
}

fn class_name(code: u8) -> String {
    SentimentLabel::from_code(code)
        .map(|l| l.as_str().to_ascii_lowercase())
        .unwrap_or_else(|| code.to_string())
}

/// Indices of the `k` nearest members to `members[who]` (excluding itself)
/// by Euclidean distance, ties to the lower row index.
fn nearest(features: &Array2<f64>, members: &[usize], who: usize, k: usize) -> Vec<usize> {
    let x = features.row(members[who]);
    let mut dists: Vec<(f64, usize)> = members
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != who)
        .map(|(_, &row)| (squared_distance(x, features.row(row)), row))
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dists.truncate(k);
    dists.into_iter().map(|(_, row)| row).collect()
}

fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Appends synthetic minority rows `x + u·(x_nn − x)` until every class meets
/// its target. Original rows are kept verbatim and first.
pub fn smote(dataset: &EmbeddedDataset, params: &SmoteParams) -> Result<SmoteOutcome> {
    if params.k == 0 {
        return Err(Error::Config("SMOTE k must be at least 1".into()));
    }
    let labels = dataset.require_labels()?;
    let counts = dataset.class_counts();
    let targets: BTreeMap<u8, usize> = match &params.strategy {
        SmoteStrategy::Equalize => {
            let top = counts.values().copied().max().unwrap_or(0);
            counts.keys().map(|&c| (c, top)).collect()
        }
        SmoteStrategy::Targets(t) => t.clone(),
    };

    let features = dataset.features();
    let mut warnings = Vec::new();
    let mut synthesized = BTreeMap::new();
    let mut new_ids = Vec::new();
    let mut new_labels = Vec::new();
    let mut new_rows: Vec<Vec<f64>> = Vec::new();

    for (&class, &target) in &targets {
        let have = counts.get(&class).copied().unwrap_or(0);
        if target <= have {
            continue;
        }
        let deficit = target - have;
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::Input(format!(
                "class `{}` needs {deficit} synthetic row(s) but has only {} sample(s); SMOTE needs at least 2",
                class_name(class),
                members.len()
            )));
        }
        let k = if params.k >= members.len() {
            let clamped = members.len() - 1;
            let msg = format!(
                "SMOTE k={} clamped to {clamped} for class `{}` ({} samples)",
                params.k,
                class_name(class),
                members.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
            clamped
        } else {
            params.k
        };

        // (base member, neighbour slot, u) per synthetic row, each from its own stream.
        let draws: Vec<(usize, usize, f64)> = (0..deficit)
            .map(|j| {
                let mut rng = keyed_rng(params.seed, class as u64, j as u64);
                let base = rng.gen_range(0..members.len());
                let slot = rng.gen_range(0..k);
                let u: f64 = rng.gen();
                (base, slot, u)
            })
            .collect();

        let mut bases: Vec<usize> = draws.iter().map(|d| d.0).collect();
        bases.sort_unstable();
        bases.dedup();
        let neighbours: HashMap<usize, Vec<usize>> = bases
            .par_iter()
            .map(|&b| (b, nearest(features, &members, b, k)))
            .collect();

        for (j, &(base, slot, u)) in draws.iter().enumerate() {
            let x = features.row(members[base]);
            let nn = features.row(neighbours[&base][slot]);
            new_rows.push(x.iter().zip(nn.iter()).map(|(a, b)| a + u * (b - a)).collect());
            new_ids.push(format!("{SYNTHETIC_PREFIX}{}-{}", class_name(class), j + 1));
            new_labels.push(class);
        }
        synthesized.insert(class, deficit);
    }

    if new_rows.is_empty() {
        return Ok(SmoteOutcome {
            dataset: dataset.clone(),
            synthesized,
            warnings,
        });
    }
    let flat: Vec<f64> = new_rows.into_iter().flatten().collect();
    let extra = Array2::from_shape_vec((new_ids.len(), dataset.dim()), flat).expect("row widths match");
    let extra = EmbeddedDataset::new(new_ids, extra, Some(new_labels), dataset.provider_id())?;
    Ok(SmoteOutcome {
        dataset: dataset.concat(&extra)?,
        synthesized,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(x: Array2<f64>, y: Vec<u8>) -> EmbeddedDataset {
        let ids = (0..y.len()).map(|i| format!("r{i}")).collect();
        EmbeddedDataset::new(ids, x, Some(y), "t").unwrap()
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let d = ds(
            array![[0., 0.], [1., 0.], [0., 1.], [1., 1.], [5., 5.], [6., 5.], [5., 6.], [6., 6.]],
            vec![0, 0, 0, 0, 1, 1, 1, 1],
        );
        let out = smote(&d, &SmoteParams::default()).unwrap();
        assert_eq!(out.dataset, d);
        assert!(out.synthesized.is_empty());
    }

    #[test]
    fn fills_deficit() {
        let d = ds(
            array![[0., 0.], [1., 0.], [0., 1.], [1., 1.], [5., 5.], [6., 6.]],
            vec![0, 0, 0, 0, 1, 1],
        );
        let out = smote(&d, &SmoteParams::default()).unwrap();
        assert_eq!(out.dataset.class_counts(), BTreeMap::from([(0, 4), (1, 4)]));
        assert_eq!(out.synthesized, BTreeMap::from([(1, 2)]));
        // k=5 clamped to 1 for the two-member class
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(&out.dataset.ids()[6..], &["synth-neutral-1", "synth-neutral-2"]);
        for i in 6..8 {
            let r = out.dataset.row(i);
            assert!((r[0] - r[1]).abs() < 1e-12 && (5.0..=6.0).contains(&r[0]));
        }
    }

    #[test]
    fn singleton_class_is_an_error() {
        let d = ds(array![[0.], [1.], [2.], [9.]], vec![0, 0, 0, 2]);
        let err = smote(&d, &SmoteParams::default()).unwrap_err();
        assert!(err.to_string().contains("positive"), "{err}");
    }

    #[test]
    fn targets_never_reduce() {
        let d = ds(array![[0.], [1.], [2.], [8.], [9.]], vec![0, 0, 0, 1, 1]);
        let params = SmoteParams {
            strategy: SmoteStrategy::Targets(BTreeMap::from([(0, 1), (1, 5)])),
            ..SmoteParams::default()
        };
        let out = smote(&d, &params).unwrap();
        assert_eq!(out.dataset.class_counts(), BTreeMap::from([(0, 3), (1, 5)]));
    }

    #[test]
    fn neighbour_ties_prefer_lower_index() {
        let x = array![[0.0], [1.0], [-1.0], [3.0]];
        assert_eq!(nearest(&x, &[0, 1, 2, 3], 0, 1), vec![1]);
        assert_eq!(nearest(&x, &[0, 1, 2, 3], 0, 2), vec![1, 2]);
    }

    #[test]
    fn stage_parses() {
        assert_eq!("pre-split".parse::<SmoteStage>().unwrap(), SmoteStage::PreSplit);
        assert_eq!("train_only".parse::<SmoteStage>().unwrap(), SmoteStage::TrainOnly);
    }
}
