//! From-scratch classifiers and the unified inference surface.
//!
//! Every fitted model is a [`TrainedModel`]: a family-specific parameter
//! block plus metadata (provider, input dimension, label names, training
//! hyperparameters). Models are immutable once fitted and serialize to a
//! versioned JSON envelope `{format_version, kind, metadata, parameters}`.

mod forest;
mod logreg;
mod svc;
mod tree;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::corpus::SentimentLabel;
use crate::embedding::EmbeddedDataset;
use crate::error::{Error, Result};
use crate::rnn::RnnModel;

pub use forest::{fit_forest, ForestParams, RandomForest};
pub use logreg::{fit_logreg, fit_logreg_traced, logreg_loss_and_gradient, LogRegParams, LogisticRegression};
pub use svc::{fit_linear_svc, fit_linear_svc_traced, svc_objective, LinearSvc, LinearSvcParams};
pub use tree::{best_split, fit_tree, gini, DecisionTree, Split, TreeNode, TreeParams};

pub const FORMAT_VERSION: u32 = 1;

/// Classifier family tag, as used on the command line and in model files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tree,
    Forest,
    Svc,
    Logreg,
    Rnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Tree,
        ModelKind::Forest,
        ModelKind::Svc,
        ModelKind::Logreg,
        ModelKind::Rnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Svc => "svc",
            ModelKind::Logreg => "logreg",
            ModelKind::Rnn => "rnn",
        }
    }

    /// Models trained epoch by epoch, which therefore have training curves.
    pub fn is_iterative(self) -> bool {
        matches!(self, ModelKind::Svc | ModelKind::Logreg | ModelKind::Rnn)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown model `{s}` (tree|forest|svc|logreg|rnn)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub provider_id: String,
    pub dim: usize,
    pub labels: Vec<String>,
    pub params: serde_json::Value,
}

impl ModelMetadata {
    pub(crate) fn for_dataset(ds: &EmbeddedDataset, params: &impl Serialize) -> Self {
        Self {
            provider_id: ds.provider_id().to_string(),
            dim: ds.dim(),
            labels: SentimentLabel::names(),
            params: serde_json::to_value(params).expect("params serialize"),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Tree(DecisionTree),
    Forest(RandomForest),
    LinearSvc(LinearSvc),
    LogReg(LogisticRegression),
    Rnn(RnnModel),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub metadata: ModelMetadata,
    pub model: Model,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    kind: ModelKind,
    metadata: ModelMetadata,
    parameters: serde_json::Value,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match &self.model {
            Model::Tree(_) => ModelKind::Tree,
            Model::Forest(_) => ModelKind::Forest,
            Model::LinearSvc(_) => ModelKind::Svc,
            Model::LogReg(_) => ModelKind::Logreg,
            Model::Rnn(_) => ModelKind::Rnn,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.metadata.n_classes()
    }

    /// Per-class scores: leaf fractions (tree), vote fractions (forest),
    /// margins (SVC), probabilities (logreg, RNN).
    pub fn predict_scores(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.metadata.dim {
            return Err(Error::DimensionMismatch {
                expected: self.metadata.dim,
                actual: x.ncols(),
            });
        }
        let c = self.n_classes();
        let mut out = Array2::zeros((x.nrows(), c));
        for (row, mut dst) in x.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            let scores = match &self.model {
                Model::Tree(t) => t.scores(row),
                Model::Forest(f) => f.scores(row, c),
                Model::LinearSvc(s) => s.scores(row),
                Model::LogReg(l) => l.probabilities(row),
                Model::Rnn(r) => r.probabilities(row)?,
            };
            dst.assign(&scores);
        }
        Ok(out)
    }

    /// Class codes: argmax of [`predict_scores`](Self::predict_scores), ties
    /// to the lowest code.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
        let scores = self.predict_scores(x)?;
        Ok(scores.axis_iter(Axis(0)).map(|r| argmax(r) as u8).collect())
    }

    pub fn to_json(&self) -> String {
        let parameters = match &self.model {
            Model::Tree(m) => serde_json::to_value(m),
            Model::Forest(m) => serde_json::to_value(m),
            Model::LinearSvc(m) => serde_json::to_value(m),
            Model::LogReg(m) => serde_json::to_value(m),
            Model::Rnn(m) => serde_json::to_value(m),
        }
        .expect("model serializes");
        let env = Envelope {
            format_version: FORMAT_VERSION,
            kind: self.kind(),
            metadata: self.metadata.clone(),
            parameters,
        };
        serde_json::to_string_pretty(&env).expect("model serializes")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let bad = |e: serde_json::Error| Error::format(origin, e.line() as u64, e.to_string());
        let env: Envelope = serde_json::from_str(text).map_err(bad)?;
        if env.format_version != FORMAT_VERSION {
            return Err(Error::format(
                origin,
                0,
                format!("unsupported model format version {}", env.format_version),
            ));
        }
        let p = env.parameters;
        let model = match env.kind {
            ModelKind::Tree => Model::Tree(serde_json::from_value(p).map_err(bad)?),
            ModelKind::Forest => Model::Forest(serde_json::from_value(p).map_err(bad)?),
            ModelKind::Svc => Model::LinearSvc(serde_json::from_value(p).map_err(bad)?),
            ModelKind::Logreg => Model::LogReg(serde_json::from_value(p).map_err(bad)?),
            ModelKind::Rnn => Model::Rnn(serde_json::from_value(p).map_err(bad)?),
        };
        Ok(Self {
            metadata: env.metadata,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}

/// Fraction of matching codes; NaN when there is nothing to score.
pub fn accuracy(predicted: &[u8], truth: &[u8]) -> f64 {
    if truth.is_empty() {
        return f64::NAN;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

pub(crate) fn require_classes(labels: &[u8], what: &str) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptyInput(format!("{what}: training set is empty")));
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(Error::Input(format!(
            "{what}: training set has a single class; at least 2 are required"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(array![0.2, 0.4, 0.4].view()), 1);
        assert_eq!(argmax(array![1.0, 1.0, 1.0].view()), 0);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(array![1000.0, 1000.0, -1000.0].view());
        assert!((p[0] - 0.5).abs() < 1e-12 && p[2] == 0.0);
        let u = softmax(array![0.0, 0.0, 0.0].view());
        assert!(u.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn kind_parses() {
        assert_eq!("Forest".parse::<ModelKind>().unwrap(), ModelKind::Forest);
        assert!("knn".parse::<ModelKind>().is_err());
    }
}
