//! Dense review embeddings: the dataset type, provider specs and the
//! providers themselves (deterministic pseudo-embedder, precomputed files,
//! and the HTTP sidecar client).

mod pseudo;
mod sidecar;
mod store;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledCorpus, RawReview, SentimentLabel};
use crate::error::{Error, Result};

pub use pseudo::pseudo_embed;
pub use sidecar::{Health, SidecarClient, SidecarOptions, ENDPOINT_ENV};
pub use store::{encode_for_path, load_embeddings, save_embeddings, MAGIC};

/// Prefix of row ids created by oversampling.
pub const SYNTHETIC_PREFIX: &str = "synth-";

pub const DEFAULT_MODEL_DIM: usize = 768;
pub const DEFAULT_PSEUDO_DIM: usize = 64;

/// Feature matrix with row ids, optional integer labels and the provider
/// that produced it. Rows are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedDataset {
    ids: Vec<String>,
    features: Array2<f64>,
    labels: Option<Vec<u8>>,
    provider_id: String,
}

impl EmbeddedDataset {
    pub fn new(
        ids: Vec<String>,
        features: Array2<f64>,
        labels: Option<Vec<u8>>,
        provider_id: impl Into<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if d == 0 {
            return Err(Error::Input("embedding dimension must be positive".into()));
        }
        if ids.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: ids.len(),
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: labels.len(),
                });
            }
        }
        for (row, id) in features.axis_iter(Axis(0)).zip(&ids) {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("row `{id}` has a non-finite value")));
            }
        }
        Ok(Self {
            ids,
            features,
            labels,
            provider_id: provider_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Labels, or an input error if the dataset is unlabelled.
    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels()
            .ok_or_else(|| Error::Input("dataset has no labels".into()))
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            features: self.features.select(Axis(0), rows),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&i| l[i]).collect()),
            provider_id: self.provider_id.clone(),
        }
    }

    /// Appends rows of `other` after the rows of `self`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            (None, None) => None,
            _ => return Err(Error::Input("cannot concatenate labelled and unlabelled rows".into())),
        };
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), other.features.view()])
            .expect("column counts checked");
        Ok(Self {
            ids: self.ids.iter().chain(&other.ids).cloned().collect(),
            features,
            labels,
            provider_id: self.provider_id.clone(),
        })
    }

    /// Rounds every value to the nearest 32-bit float, the precision of the
    /// on-disk format.
    pub fn quantized(&self) -> Self {
        Self {
            features: self.features.mapv(|v| v as f32 as f64),
            ..self.clone()
        }
    }

    pub fn is_synthetic(&self, row: usize) -> bool {
        self.ids[row].starts_with(SYNTHETIC_PREFIX)
    }

    /// The dataset restricted to rows that did not come from oversampling.
    pub fn originals_only(&self) -> Self {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| !self.is_synthetic(i)).collect();
        self.select(&rows)
    }

    /// Rows per class code; classes absent from the data are omitted.
    pub fn class_counts(&self) -> std::collections::BTreeMap<u8, usize> {
        let mut counts = std::collections::BTreeMap::new();
        for &y in self.labels().unwrap_or_default() {
            *counts.entry(y).or_default() += 1;
        }
        counts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Bert,
    Sbert,
    Scibert,
    Biobert,
    Pseudo,
    File,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::Bert => "bert",
            ProviderKind::Sbert => "sbert",
            ProviderKind::Scibert => "scibert",
            ProviderKind::Biobert => "biobert",
            ProviderKind::Pseudo => "pseudo",
            ProviderKind::File => "file",
        }
    }

    /// True for the pretrained encoders served by the sidecar.
    pub fn is_remote(self) -> bool {
        matches!(
            self,
            ProviderKind::Bert | ProviderKind::Sbert | ProviderKind::Scibert | ProviderKind::Biobert
        )
    }

    pub fn default_dim(self) -> usize {
        if self.is_remote() {
            DEFAULT_MODEL_DIM
        } else {
            DEFAULT_PSEUDO_DIM
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "bert" => ProviderKind::Bert,
            "sbert" => ProviderKind::Sbert,
            "scibert" => ProviderKind::Scibert,
            "biobert" => ProviderKind::Biobert,
            "pseudo" => ProviderKind::Pseudo,
            "file" => ProviderKind::File,
            other => return Err(format!("unknown provider `{other}`")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingProviderSpec {
    pub provider_id: ProviderKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl EmbeddingProviderSpec {
    pub fn pseudo(dim: usize, seed: u64) -> Self {
        Self {
            provider_id: ProviderKind::Pseudo,
            dim,
            endpoint: None,
            path: None,
            seed: Some(seed),
        }
    }

    pub fn file(dim: usize, path: impl Into<PathBuf>) -> Self {
        Self {
            provider_id: ProviderKind::File,
            dim,
            endpoint: None,
            path: Some(path.into()),
            seed: None,
        }
    }

    pub fn remote(kind: ProviderKind, dim: usize, endpoint: impl Into<String>) -> Self {
        Self {
            provider_id: kind,
            dim,
            endpoint: Some(endpoint.into()),
            path: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        let populated = [self.endpoint.is_some(), self.path.is_some(), self.seed.is_some()];
        let want = match self.provider_id {
            k if k.is_remote() => [true, false, false],
            ProviderKind::File => [false, true, false],
            _ => [false, false, true],
        };
        if populated != want {
            let field = match self.provider_id {
                k if k.is_remote() => "endpoint",
                ProviderKind::File => "path",
                _ => "seed",
            };
            return Err(Error::Config(format!(
                "provider `{}` takes exactly one of endpoint/path/seed: `{field}`",
                self.provider_id
            )));
        }
        Ok(())
    }
}

/// A row to embed. `id` is used by the file provider to look up
/// precomputed vectors; the other providers read `text`.
#[derive(Clone, Copy, Debug)]
pub struct EmbedInput<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

impl<'a> From<&'a RawReview> for EmbedInput<'a> {
    fn from(r: &'a RawReview) -> Self {
        Self {
            id: &r.id,
            text: &r.text,
        }
    }
}

/// A ready-to-use embedding source.
pub enum Provider {
    Pseudo { dim: usize, seed: u64 },
    File { rows: HashMap<String, usize>, data: EmbeddedDataset },
    Remote(SidecarClient),
}

impl Provider {
    pub fn from_spec(spec: &EmbeddingProviderSpec) -> Result<Self> {
        spec.validate()?;
        match spec.provider_id {
            ProviderKind::Pseudo => Ok(Provider::Pseudo {
                dim: spec.dim,
                seed: spec.seed.expect("validated"),
            }),
            ProviderKind::File => {
                let data = load_embeddings(spec.path.as_ref().expect("validated"))?;
                if data.dim() != spec.dim {
                    return Err(Error::Config(format!(
                        "embedding file has dim {} but {} was configured",
                        data.dim(),
                        spec.dim
                    )));
                }
                let rows = data
                    .ids()
                    .iter()
                    .enumerate()
                    .map(|(i, id)| (id.clone(), i))
                    .collect();
                Ok(Provider::File { rows, data })
            }
            kind => Ok(Provider::Remote(SidecarClient::new(
                spec.endpoint.clone().expect("validated"),
                kind,
                spec.dim,
                SidecarOptions::default(),
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Provider::Pseudo { dim, .. } => *dim,
            Provider::File { data, .. } => data.dim(),
            Provider::Remote(c) => c.dim(),
        }
    }

    /// Embeds `inputs` in order. The result is rounded to 32-bit precision
    /// and checked for shape and finiteness.
    pub fn embed(&self, inputs: &[EmbedInput<'_>]) -> Result<Array2<f64>> {
        if inputs.is_empty() {
            return Err(Error::Input("nothing to embed".into()));
        }
        if let Some(i) = inputs.iter().position(|x| x.text.trim().is_empty()) {
            return Err(Error::Input(format!("text at index {i} is empty")));
        }
        let dim = self.dim();
        let mut out = match self {
            Provider::Pseudo { dim, seed } => {
                let mut m = Array2::zeros((inputs.len(), *dim));
                for (mut row, input) in m.axis_iter_mut(Axis(0)).zip(inputs) {
                    row.assign(&ArrayView1::from(&pseudo_embed(input.text, *dim, *seed)));
                }
                m
            }
            Provider::File { rows, data } => {
                let mut picked = Vec::with_capacity(inputs.len());
                for input in inputs {
                    let row = rows.get(input.id).ok_or_else(|| {
                        Error::Input(format!("no precomputed embedding for id `{}`", input.id))
                    })?;
                    picked.push(*row);
                }
                data.features().select(Axis(0), &picked)
            }
            Provider::Remote(client) => {
                let texts: Vec<&str> = inputs.iter().map(|x| x.text).collect();
                client.embed(&texts)?
            }
        };
        if out.ncols() != dim {
            return Err(Error::Config(format!(
                "provider returned dim {} but {dim} was configured",
                out.ncols()
            )));
        }
        for (i, row) in out.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "embedding of `{}` has a non-finite value",
                    inputs[i].id
                )));
            }
        }
        out.mapv_inplace(|v| v as f32 as f64);
        Ok(out)
    }
}

/// Embeds a batch with a provider built from `spec`.
pub fn embed_batch(spec: &EmbeddingProviderSpec, inputs: &[EmbedInput<'_>]) -> Result<Array2<f64>> {
    Provider::from_spec(spec)?.embed(inputs)
}

/// Embeds every review of a labelled corpus.
pub fn embed_corpus(provider: &Provider, spec: &EmbeddingProviderSpec, corpus: &LabeledCorpus) -> Result<EmbeddedDataset> {
    let inputs: Vec<EmbedInput<'_>> = corpus.reviews().iter().map(EmbedInput::from).collect();
    let features = provider.embed(&inputs)?;
    let ids = corpus.reviews().iter().map(|r| r.id.clone()).collect();
    let labels = corpus.labels().map(SentimentLabel::code).collect();
    EmbeddedDataset::new(ids, features, Some(labels), spec.provider_id.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn inputs<'a>(texts: &'a [&'a str]) -> Vec<EmbedInput<'a>> {
        texts.iter().map(|t| EmbedInput { id: t, text: t }).collect()
    }

    #[test]
    fn pseudo_batch_shape_and_bounds() {
        let spec = EmbeddingProviderSpec::pseudo(64, 1);
        let texts = ["a", "bb", "good drug", "bad drug", "ok"];
        let m = embed_batch(&spec, &inputs(&texts)).unwrap();
        assert_eq!(m.dim(), (5, 64));
        assert!(m.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn duplicate_texts_get_identical_rows() {
        let spec = EmbeddingProviderSpec::pseudo(16, 3);
        let m = embed_batch(&spec, &inputs(&["same", "same"])).unwrap();
        assert_eq!(m.row(0), m.row(1));
    }

    #[test]
    fn batching_invariance() {
        let spec = EmbeddingProviderSpec::pseudo(8, 9);
        let texts = ["one", "two", "three", "four"];
        let whole = embed_batch(&spec, &inputs(&texts)).unwrap();
        let a = embed_batch(&spec, &inputs(&texts[..1])).unwrap();
        let b = embed_batch(&spec, &inputs(&texts[1..])).unwrap();
        let joined = ndarray::concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
        assert_eq!(whole, joined);
    }

    #[test]
    fn empty_text_names_index() {
        let spec = EmbeddingProviderSpec::pseudo(8, 9);
        let err = embed_batch(&spec, &inputs(&["x", "  "])).unwrap_err();
        assert!(err.to_string().contains("index 1"), "{err}");
    }

    #[test]
    fn spec_validation() {
        assert!(EmbeddingProviderSpec::pseudo(0, 1).validate().is_err());
        let mut s = EmbeddingProviderSpec::pseudo(4, 1);
        s.endpoint = Some("http://x".into());
        assert!(s.validate().is_err());
        assert!(EmbeddingProviderSpec::remote(ProviderKind::Bert, 768, "http://x")
            .validate()
            .is_ok());
        let mut r = EmbeddingProviderSpec::remote(ProviderKind::Sbert, 768, "http://x");
        r.endpoint = None;
        assert!(r.validate().is_err());
    }

    #[test]
    fn dataset_rejects_non_finite_rows() {
        let err = EmbeddedDataset::new(
            vec!["a".into(), "b".into()],
            array![[0.0, 1.0], [f64::NAN, 0.0]],
            None,
            "t",
        )
        .unwrap_err();
        assert!(err.to_string().contains("`b`"));
    }

    #[test]
    fn file_provider_looks_up_by_id() {
        let ds = EmbeddedDataset::new(
            vec!["r1".into(), "r2".into()],
            array![[0.5, -0.25], [1.0, 2.0]],
            None,
            "bert",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.emb");
        save_embeddings(&ds, &path).unwrap();
        let spec = EmbeddingProviderSpec::file(2, &path);
        let got = embed_batch(
            &spec,
            &[EmbedInput { id: "r2", text: "x" }, EmbedInput { id: "r1", text: "y" }],
        )
        .unwrap();
        assert_eq!(got, array![[1.0, 2.0], [0.5, -0.25]]);
        assert!(embed_batch(&spec, &[EmbedInput { id: "zz", text: "x" }]).is_err());
        assert!(matches!(
            Provider::from_spec(&EmbeddingProviderSpec::file(3, &path)),
            Err(Error::Config(_))
        ));
    }
}
