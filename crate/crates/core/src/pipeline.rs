//! End-to-end run: load → embed → SMOTE → split → train → evaluate → report.
//!
//! Every stochastic stage draws from `stage_seed(seed, tag)` so the
//! stage-wise subcommands reproduce a monolithic run when given the same
//! global seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    accuracy, fit_forest, fit_linear_svc_traced, fit_logreg_traced, fit_tree, ForestParams,
    LinearSvcParams, LogRegParams, ModelKind, TrainedModel, TreeParams,
};
use crate::corpus::{load_corpus, stratified_split, CorpusFormat, LabeledCorpus, SplitSpec};
use crate::embedding::{
    embed_corpus, encode_for_path, load_embeddings, EmbeddedDataset, EmbeddingProviderSpec, Provider,
    ProviderKind, DEFAULT_PSEUDO_DIM, ENDPOINT_ENV,
};
use crate::error::{Error, Result};
use crate::metrics::{
    classification_report, compare_models, confusion_matrix, curves_csv, format_comparison,
    format_report, ClassificationReport, EpochTrace,
};
use crate::resample::{smote, SmoteParams, SmoteStage, SmoteStrategy};
use crate::rnn::{fit_rnn, RnnParams};
use crate::seed::stage_seed;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Defaults to 64 for `pseudo`, 768 for the remote encoders and the
    /// stored width for `file`.
    pub dim: Option<usize>,
    /// Sidecar base URL; falls back to `SENTIPIPE_ENDPOINT`.
    pub endpoint: Option<String>,
    /// Precomputed embeddings for the `file` provider.
    pub path: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Pseudo,
            dim: None,
            endpoint: None,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub enabled: bool,
    pub k: usize,
    pub stage: SmoteStage,
    pub strategy: SmoteStrategy,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        let p = SmoteParams::default();
        Self {
            enabled: true,
            k: p.k,
            stage: p.stage,
            strategy: p.strategy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            test_fraction: s.test_fraction,
            stratified: s.stratified,
        }
    }
}

/// Hyperparameters per family. Their `seed` fields are overwritten with
/// the stage seed derived from the global seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub svc: LinearSvcParams,
    pub logreg: LogRegParams,
    pub rnn: RnnParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    /// Inferred from the extension when absent.
    pub format: Option<CorpusFormat>,
    pub provider: ProviderConfig,
    pub smote: SmoteConfig,
    pub split: SplitConfig,
    pub models: Vec<ModelKind>,
    pub params: ModelParams,
    pub output: PathBuf,
    pub seed: u64,
    /// Models trained concurrently.
    pub parallel_models: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            format: None,
            provider: ProviderConfig::default(),
            smote: SmoteConfig::default(),
            split: SplitConfig::default(),
            models: ModelKind::ALL.to_vec(),
            params: ModelParams::default(),
            output: PathBuf::from("out"),
            seed: 0,
            parallel_models: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub seeds: BTreeMap<String, u64>,
    /// Artifact name → path relative to the output directory.
    pub artifacts: BTreeMap<String, PathBuf>,
    pub class_counts: BTreeMap<String, usize>,
    pub timings_ms: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl PipelineConfig {
    pub fn corpus_format(&self) -> Result<CorpusFormat> {
        self.format
            .or_else(|| CorpusFormat::from_path(&self.input))
            .ok_or_else(|| {
                Error::Config(format!(
                    "cannot infer corpus format of {}; set `format` to csv or jsonl",
                    self.input.display()
                ))
            })
    }

    /// Reads a config file, or the config snapshot of a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let value = match value.get("format_version").and(value.get("config")) {
            Some(snapshot) => snapshot.clone(),
            None => value,
        };
        serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Checks everything that can be checked without doing any work.
    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::Config("no input corpus configured".into()));
        }
        if !self.input.is_file() {
            return Err(Error::Config(format!(
                "corpus file {} does not exist",
                self.input.display()
            )));
        }
        self.corpus_format()?;
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(Error::Config("a model is listed more than once".into()));
        }
        if self.parallel_models == 0 {
            return Err(Error::Config("parallel_models must be at least 1".into()));
        }
        if self.smote.enabled && self.smote.k == 0 {
            return Err(Error::Config("SMOTE k must be at least 1".into()));
        }
        self.split_spec().validate()?;
        let spec = self.provider_spec()?;
        if self.models.contains(&ModelKind::Rnn) {
            self.params.rnn.validate(spec.dim)?;
        }
        self.params.tree.validate(spec.dim)?;
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            test_fraction: self.split.test_fraction,
            seed: stage_seed(self.seed, "split"),
            stratified: self.split.stratified,
        }
    }

    pub fn smote_params(&self) -> SmoteParams {
        SmoteParams {
            k: self.smote.k,
            strategy: self.smote.strategy.clone(),
            seed: stage_seed(self.seed, "smote"),
            stage: self.smote.stage,
        }
    }

    pub fn provider_spec(&self) -> Result<EmbeddingProviderSpec> {
        resolve_provider(&self.provider, self.seed)
    }
}

/// Builds a provider spec, deriving the pseudo seed from `global_seed`.
pub fn resolve_provider(cfg: &ProviderConfig, global_seed: u64) -> Result<EmbeddingProviderSpec> {
    let kind = cfg.kind;
    let stray = |field: &str| Error::Config(format!("provider `{kind}` does not take `{field}`"));
    match kind {
        ProviderKind::Pseudo => {
            if cfg.endpoint.is_some() {
                return Err(stray("endpoint"));
            }
            if cfg.path.is_some() {
                return Err(stray("path"));
            }
            let dim = cfg.dim.unwrap_or(DEFAULT_PSEUDO_DIM);
            Ok(EmbeddingProviderSpec::pseudo(dim, stage_seed(global_seed, "embed")))
        }
        ProviderKind::File => {
            if cfg.endpoint.is_some() {
                return Err(stray("endpoint"));
            }
            let path = cfg
                .path
                .clone()
                .ok_or_else(|| Error::Config("provider `file` needs a path".into()))?;
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "embedding file {} does not exist",
                    path.display()
                )));
            }
            let dim = match cfg.dim {
                Some(d) => d,
                None => load_embeddings(&path)?.dim(),
            };
            Ok(EmbeddingProviderSpec::file(dim, path))
        }
        remote => {
            if cfg.path.is_some() {
                return Err(stray("path"));
            }
            let endpoint = cfg
                .endpoint
                .clone()
                .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()))
                .ok_or_else(|| {
                    Error::Config(format!(
                        "provider `{remote}` needs an endpoint (flag, config or {ENDPOINT_ENV})"
                    ))
                })?;
            Ok(EmbeddingProviderSpec::remote(
                remote,
                cfg.dim.unwrap_or(remote.default_dim()),
                endpoint,
            ))
        }
    }
}

/// Fits one family with its stage seed. Non-iterative families return an
/// empty trace.
pub fn train_model(
    kind: ModelKind,
    train: &EmbeddedDataset,
    test: Option<&EmbeddedDataset>,
    params: &ModelParams,
    global_seed: u64,
) -> Result<(TrainedModel, Vec<EpochTrace>)> {
    let seed = stage_seed(global_seed, kind.as_str());
    match kind {
        ModelKind::Tree => Ok((fit_tree(train, &TreeParams { seed, ..params.tree.clone() })?, Vec::new())),
        ModelKind::Forest => Ok((fit_forest(train, &ForestParams { seed, ..params.forest.clone() })?, Vec::new())),
        ModelKind::Svc => fit_linear_svc_traced(train, test, &LinearSvcParams { seed, ..params.svc.clone() }),
        ModelKind::Logreg => fit_logreg_traced(train, test, &params.logreg),
        ModelKind::Rnn => fit_rnn(train, test, &RnnParams { seed, ..params.rnn.clone() }),
    }
}

/// Report over the original (non-synthetic) rows of `test`.
pub fn evaluate_model(model: &TrainedModel, test: &EmbeddedDataset) -> Result<ClassificationReport> {
    let test = test.originals_only();
    let truth = test.require_labels()?;
    if test.is_empty() {
        return Err(Error::EmptyInput("test set has no original rows".into()));
    }
    let predicted = model.predict(test.features().view())?;
    let cm = confusion_matrix(truth, &predicted, model.n_classes())?;
    let names: Vec<&str> = model.metadata.labels.iter().map(String::as_str).collect();
    classification_report(&cm, &names)
}

/// Fraction of correct predictions on `ds`.
pub fn dataset_accuracy(model: &TrainedModel, ds: &EmbeddedDataset) -> Result<f64> {
    Ok(accuracy(&model.predict(ds.features().view())?, ds.require_labels()?))
}

/// Train/test split with optional SMOTE before or after it. The test side
/// may contain synthetic rows only in pre-split mode.
pub fn resample_and_split(
    dataset: &EmbeddedDataset,
    config: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<(EmbeddedDataset, EmbeddedDataset)> {
    let params = config.smote_params();
    let mut oversample = |ds: &EmbeddedDataset| -> Result<EmbeddedDataset> {
        let out = smote(ds, &params).map_err(|e| e.in_stage("smote"))?;
        warnings.extend(out.warnings);
        Ok(out.dataset.quantized())
    };
    let split = |ds: &EmbeddedDataset| stratified_split(ds, &config.split_spec()).map_err(|e| e.in_stage("split"));
    match (config.smote.enabled, config.smote.stage) {
        (false, _) => split(dataset),
        (true, SmoteStage::PreSplit) => split(&oversample(dataset)?),
        (true, SmoteStage::TrainOnly) => {
            let (train, test) = split(dataset)?;
            Ok((oversample(&train)?, test))
        }
    }
}

/// Writes through `<path>.partial` and renames on success, so a failed
/// write leaves only the `.partial` file behind.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    write(&partial)?;
    std::fs::rename(&partial, path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |tmp| std::fs::write(tmp, bytes).map_err(|e| Error::io(tmp, e)))
}

/// Atomic [`save_embeddings`](crate::embedding::save_embeddings); the
/// format follows the final path's extension.
pub fn write_embeddings(dataset: &EmbeddedDataset, path: &Path) -> Result<()> {
    write_bytes(path, &encode_for_path(dataset, path)?)
}

struct Artifacts<'a> {
    root: &'a Path,
    index: BTreeMap<String, PathBuf>,
}

impl Artifacts<'_> {
    fn text(&mut self, name: &str, rel: &str, text: &str) -> Result<()> {
        write_text(&self.root.join(rel), text)?;
        self.index.insert(name.to_owned(), PathBuf::from(rel));
        Ok(())
    }

    fn embeddings(&mut self, name: &str, rel: &str, ds: &EmbeddedDataset) -> Result<()> {
        write_embeddings(ds, &self.root.join(rel))?;
        self.index.insert(name.to_owned(), PathBuf::from(rel));
        Ok(())
    }
}

struct Timings(BTreeMap<String, f64>);

impl Timings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        log::info!("stage {stage}");
        let out = f().map_err(|e| e.in_stage(stage));
        self.0.insert(stage.to_owned(), start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

pub struct ModelOutcome {
    pub kind: ModelKind,
    pub model: TrainedModel,
    pub traces: Vec<EpochTrace>,
    pub report: ClassificationReport,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    config.validate()?;
    let spec = config.provider_spec()?;
    let out_dir = config.output.as_path();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut artifacts = Artifacts {
        root: out_dir,
        index: BTreeMap::new(),
    };
    let mut timings = Timings(BTreeMap::new());
    let mut warnings = Vec::new();

    let corpus: LabeledCorpus = timings.time("load", || load_corpus(&config.input, config.corpus_format()?))?;
    if corpus.dropped_empty() > 0 {
        warnings.push(format!("dropped {} row(s) with empty text", corpus.dropped_empty()));
    }
    let dataset = timings.time("embed", || {
        let provider = Provider::from_spec(&spec)?;
        embed_corpus(&provider, &spec, &corpus)
    })?;
    timings.time("write_embeddings", || artifacts.embeddings("embeddings", "embeddings.emb", &dataset))?;

    let (train, test) = timings.time("resample", || resample_and_split(&dataset, config, &mut warnings))?;
    timings.time("write_splits", || {
        artifacts.embeddings("train", "train.emb", &train)?;
        artifacts.embeddings("test", "test.emb", &test)
    })?;
    let test_eval = test.originals_only();

    let outcomes: Vec<ModelOutcome> = timings.time("train", || {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallel_models)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            config
                .models
                .par_iter()
                .with_max_len(1)
                .map(|&kind| {
                    let (model, traces) = train_model(kind, &train, Some(&test_eval), &config.params, config.seed)
                        .map_err(|e| Error::Stage { stage: "train", source: Box::new(e) })?;
                    Ok(ModelOutcome {
                        kind,
                        report: evaluate_model(&model, &test_eval)?,
                        train_accuracy: dataset_accuracy(&model, &train)?,
                        test_accuracy: dataset_accuracy(&model, &test_eval)?,
                        model,
                        traces,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
    })?;

    timings.time("report", || {
        let mut accuracies = String::from("model,train_accuracy,test_accuracy\n");
        for o in &outcomes {
            let k = o.kind.as_str();
            artifacts.text(&format!("model.{k}"), &format!("models/{k}.json"), &o.model.to_json())?;
            artifacts.text(&format!("report.{k}"), &format!("reports/{k}.txt"), &format_report(&o.report))?;
            artifacts.text(&format!("report_json.{k}"), &format!("reports/{k}.json"), &o.report.to_json())?;
            if o.kind.is_iterative() {
                artifacts.text(&format!("curve.{k}"), &format!("curves/{k}.csv"), &curves_csv(&o.traces))?;
            }
            accuracies.push_str(&format!("{k},{:.6},{:.6}\n", o.train_accuracy, o.test_accuracy));
        }
        artifacts.text("accuracies", "curves/accuracies.csv", &accuracies)?;
        let named: Vec<(String, ClassificationReport)> =
            outcomes.iter().map(|o| (o.kind.as_str().to_owned(), o.report.clone())).collect();
        let cmp = compare_models(&named)?;
        artifacts.text("comparison", "comparison.txt", &format_comparison(&cmp))?;
        let mut json = serde_json::to_string_pretty(&cmp).expect("comparison serializes");
        json.push('\n');
        artifacts.text("comparison_json", "comparison.json", &json)
    })?;

    let mut seeds = BTreeMap::new();
    for tag in ["embed", "smote", "split"] {
        seeds.insert(tag.to_owned(), stage_seed(config.seed, tag));
    }
    for k in &config.models {
        seeds.insert(k.as_str().to_owned(), stage_seed(config.seed, k.as_str()));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let manifest = RunManifest {
        format_version: MANIFEST_VERSION,
        config: config.clone(),
        seeds,
        artifacts: artifacts.index,
        class_counts: corpus
            .class_counts()
            .iter()
            .map(|(l, &n)| (l.as_str().to_owned(), n))
            .collect(),
        timings_ms: timings.0,
        warnings,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_text(&out_dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_corpus_is_a_config_error() {
        let cfg = PipelineConfig {
            input: PathBuf::from("/nonexistent/corpus.csv"),
            ..Default::default()
        };
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"input": "x.csv", "params": {"rnn": {"epochs": 3}}}"#).unwrap();
        assert_eq!(cfg.params.rnn.epochs, 3);
        assert_eq!(cfg.params.rnn.hidden_dim, RnnParams::default().hidden_dim);
        assert_eq!(cfg.models.len(), 5);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"inptu": "x"}"#).is_err());
    }

    #[test]
    fn provider_resolution() {
        let pseudo = resolve_provider(&ProviderConfig::default(), 7).unwrap();
        assert_eq!(pseudo.dim, 64);
        assert_eq!(pseudo.seed, Some(stage_seed(7, "embed")));
        let bad = ProviderConfig {
            endpoint: Some("http://x".into()),
            ..Default::default()
        };
        assert!(resolve_provider(&bad, 0).is_err());
        let remote = ProviderConfig {
            kind: ProviderKind::Sbert,
            endpoint: Some("http://localhost:1".into()),
            ..Default::default()
        };
        let spec = resolve_provider(&remote, 0).unwrap();
        assert_eq!(spec.dim, 768);
    }

    #[test]
    fn atomic_write_leaves_partial_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("a.txt");
        let r = write_atomic(&target, |tmp| {
            std::fs::write(tmp, "half").unwrap();
            Err(Error::Numerical("boom".into()))
        });
        assert!(r.is_err());
        assert!(!target.exists());
        assert!(dir.path().join("a.txt.partial").exists());
        write_text(&target, "done").unwrap();
        assert_eq!(std::fs::read_to_string(&target).unwrap(), "done");
        assert!(!dir.path().join("a.txt.partial").exists());
    }
}
