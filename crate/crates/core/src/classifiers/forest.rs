//! Bagged random forest over [`DecisionTree`]s.

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, DecisionTree, TreeParams};
use super::{argmax, Model, ModelMetadata, TrainedModel};
use crate::embedding::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::seed::keyed_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features sampled per split; `None` means `⌊√d⌋`.
    #[serde(default)]
    pub max_features: Option<usize>,
    /// Train each tree on a bootstrap sample of size n. Turning this off is
    /// only useful for testing.
    pub bootstrap: bool,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_impurity_decrease: f64,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        let tree = TreeParams::default();
        Self {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
            max_depth: tree.max_depth,
            min_samples_leaf: tree.min_samples_leaf,
            min_impurity_decrease: tree.min_impurity_decrease,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn features_per_split(&self, dim: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| ((dim as f64).sqrt().floor() as usize).max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    /// Out-of-bag accuracy, present when every training row was left out of
    /// at least one bootstrap sample.
    pub oob_accuracy: Option<f64>,
}

impl RandomForest {
    /// Fraction of trees voting for each class.
    pub fn scores(&self, x: ArrayView1<'_, f64>, n_classes: usize) -> Array1<f64> {
        let mut votes = Array1::zeros(n_classes);
        for t in &self.trees {
            votes[t.predict_one(x) as usize] += 1.0;
        }
        votes / self.trees.len() as f64
    }
}

pub fn fit_forest(train: &EmbeddedDataset, params: &ForestParams) -> Result<TrainedModel> {
    let y = train.require_labels()?;
    let n = train.len();
    if n == 0 {
        return Err(Error::EmptyInput("random forest: training set is empty".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        min_impurity_decrease: params.min_impurity_decrease,
        max_features: Some(params.features_per_split(train.dim())),
        seed: params.seed,
    };
    tree_params.validate(train.dim())?;
    let metadata = ModelMetadata::for_dataset(train, params);
    let n_classes = metadata.n_classes();
    let x = train.features().view();

    // Tree t owns the streams keyed by seed ^ t, so the result does not
    // depend on how rayon schedules the trees.
    let grown: Vec<(DecisionTree, Vec<bool>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = params.seed ^ t as u64;
            let mut in_bag = vec![!params.bootstrap; n];
            let rows: Vec<usize> = if params.bootstrap {
                let mut rng = keyed_rng(tree_seed, 0, 0);
                (0..n)
                    .map(|_| {
                        let r = rng.gen_range(0..n);
                        in_bag[r] = true;
                        r
                    })
                    .collect()
            } else {
                (0..n).collect()
            };
            let mut rng = keyed_rng(tree_seed, 1, 0);
            (grow(x, y, rows, n_classes, &tree_params, &mut rng), in_bag)
        })
        .collect();

    let mut oob_votes = vec![vec![0usize; n_classes]; n];
    for (tree, in_bag) in &grown {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            oob_votes[i][tree.predict_one(x.row(i)) as usize] += 1;
        }
    }
    let oob_accuracy = oob_votes.iter().all(|v| v.iter().sum::<usize>() > 0).then(|| {
        let hits = oob_votes
            .iter()
            .zip(y)
            .filter(|(votes, &truth)| {
                let v: Vec<f64> = votes.iter().map(|&c| c as f64).collect();
                argmax(ArrayView1::from(&v)) == truth as usize
            })
            .count();
        hits as f64 / n as f64
    });

    Ok(TrainedModel {
        metadata,
        model: Model::Forest(RandomForest {
            trees: grown.into_iter().map(|(t, _)| t).collect(),
            oob_accuracy,
        }),
    })
}
