use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Config(format!(
                "test_fraction must lie in [0, 1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Per-class test quotas: floor of each class's share, with the leftover
/// seats going to the largest fractional remainders (ties to the lower
/// class code) so the quotas sum to `round(n * fraction)`.
fn test_quotas(class_counts: &BTreeMap<u8, usize>, fraction: f64) -> BTreeMap<u8, usize> {
    let n: usize = class_counts.values().sum();
    let total = (n as f64 * fraction).round() as usize;
    let mut quotas = BTreeMap::new();
    let mut remainders = Vec::new();
    for (&class, &count) in class_counts {
        let share = count as f64 * fraction;
        let base = share.floor() as usize;
        quotas.insert(class, base);
        remainders.push((share - base as f64, class));
    }
    let assigned: usize = quotas.values().sum();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, class) in remainders.iter().take(total.saturating_sub(assigned)) {
        *quotas.get_mut(&class).expect("class present") += 1;
    }
    quotas
}

/// Splits row indices `0..n` into `(train, test)`, each sorted ascending.
/// The permutation depends only on `spec.seed`.
pub fn split_indices(
    labels: Option<&[u8]>,
    n: usize,
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let mut test = Vec::new();
    let mut train = Vec::new();

    if spec.stratified {
        let labels = labels.ok_or_else(|| {
            Error::Config("stratified split requires labelled data".into())
        })?;
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
        let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
        for (i, &y) in labels.iter().enumerate() {
            by_class.entry(y).or_default().push(i);
        }
        let counts = by_class.iter().map(|(&c, v)| (c, v.len())).collect();
        let quotas = test_quotas(&counts, spec.test_fraction);
        for (class, mut rows) in by_class {
            let quota = quotas[&class];
            if quota > 0 && quota == rows.len() {
                return Err(Error::Input(format!(
                    "class {class} has {} row(s); test fraction {} would leave none for training",
                    rows.len(),
                    spec.test_fraction
                )));
            }
            rows.shuffle(&mut rng);
            test.extend_from_slice(&rows[..quota]);
            train.extend_from_slice(&rows[quota..]);
        }
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let quota = (n as f64 * spec.test_fraction).round() as usize;
        test.extend_from_slice(&rows[..quota]);
        train.extend_from_slice(&rows[quota..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Partitions a dataset into `(train, test)`.
pub fn stratified_split(
    dataset: &EmbeddedDataset,
    spec: &SplitSpec,
) -> Result<(EmbeddedDataset, EmbeddedDataset)> {
    let (train, test) = split_indices(dataset.labels(), dataset.len(), spec)?;
    Ok((dataset.select(&train), dataset.select(&test)))
}
