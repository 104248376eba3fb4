use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sentipipe::classifiers::{ModelKind, TrainedModel};
use sentipipe::corpus::{extract_reviews_bytes, load_corpus, CorpusFormat, Selectors, SplitSpec};
use sentipipe::embedding::{embed_corpus, load_embeddings, Provider, ProviderKind};
use sentipipe::metrics::{compare_models, curves_csv, format_comparison, format_report, ClassificationReport};
use sentipipe::pipeline::{
    evaluate_model, resolve_provider, run_pipeline, train_model, write_atomic, write_embeddings, write_text,
    ModelParams,
    PipelineConfig, ProviderConfig,
};
use sentipipe::resample::{smote, SmoteParams, SmoteStage};
use sentipipe::seed::stage_seed;
use sentipipe::{Error, Result};

#[derive(Parser)]
#[command(name = "sentipipe", version, about = "Review sentiment pipeline")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage from a corpus file to reports.
    Run(RunArgs),
    /// Extract reviews from saved HTML pages into unlabeled JSONL.
    Extract(ExtractArgs),
    /// Load, clean and validate a labeled corpus; write it as JSONL.
    Prepare(PrepareArgs),
    /// Embed a labeled corpus.
    Embed(EmbedArgs),
    /// Oversample minority classes with SMOTE.
    Resample(ResampleArgs),
    /// Split an embedded dataset into train and test files.
    Split(SplitArgs),
    /// Fit one model.
    Train(TrainArgs),
    /// Score a model on the original rows of a test set.
    Evaluate(EvaluateArgs),
    /// Print report JSON files as tables; several files are also compared.
    Report(ReportArgs),
    /// Write the per-epoch training curve of an iterative model.
    Curves(CurvesArgs),
}

#[derive(Args, Default)]
struct HyperArgs {
    #[arg(long)]
    tree_max_depth: Option<usize>,
    #[arg(long)]
    tree_min_samples_leaf: Option<usize>,
    #[arg(long)]
    forest_trees: Option<usize>,
    #[arg(long)]
    forest_max_features: Option<usize>,
    #[arg(long)]
    svc_lambda: Option<f64>,
    #[arg(long)]
    svc_epochs: Option<usize>,
    #[arg(long)]
    logreg_lr: Option<f64>,
    #[arg(long)]
    logreg_epochs: Option<usize>,
    #[arg(long)]
    logreg_l2: Option<f64>,
    #[arg(long)]
    rnn_seq_len: Option<usize>,
    #[arg(long)]
    rnn_hidden: Option<usize>,
    #[arg(long)]
    rnn_lr: Option<f64>,
    #[arg(long)]
    rnn_epochs: Option<usize>,
    #[arg(long)]
    rnn_batch_size: Option<usize>,
    #[arg(long)]
    rnn_grad_clip: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl HyperArgs {
    fn apply(&self, p: &mut ModelParams) {
        set(&mut p.tree.max_depth, self.tree_max_depth);
        set(&mut p.tree.min_samples_leaf, self.tree_min_samples_leaf);
        set(&mut p.forest.n_trees, self.forest_trees);
        if self.forest_max_features.is_some() {
            p.forest.max_features = self.forest_max_features;
        }
        set(&mut p.svc.lambda, self.svc_lambda);
        set(&mut p.svc.epochs, self.svc_epochs);
        set(&mut p.logreg.learning_rate, self.logreg_lr);
        set(&mut p.logreg.epochs, self.logreg_epochs);
        set(&mut p.logreg.l2, self.logreg_l2);
        set(&mut p.rnn.seq_len, self.rnn_seq_len);
        set(&mut p.rnn.hidden_dim, self.rnn_hidden);
        set(&mut p.rnn.learning_rate, self.rnn_lr);
        set(&mut p.rnn.epochs, self.rnn_epochs);
        set(&mut p.rnn.batch_size, self.rnn_batch_size);
        set(&mut p.rnn.grad_clip, self.rnn_grad_clip);
    }
}

#[derive(Args)]
struct ProviderArgs {
    /// bert | sbert | scibert | biobert | pseudo | file
    #[arg(long)]
    provider: Option<ProviderKind>,
    /// Sidecar URL for the remote providers [env: SENTIPIPE_ENDPOINT]
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Precomputed embeddings for `--provider file`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

impl ProviderArgs {
    fn apply(&self, cfg: &mut ProviderConfig) {
        if let Some(kind) = self.provider {
            if kind != cfg.kind {
                *cfg = ProviderConfig { kind, ..Default::default() };
            }
        }
        if self.endpoint.is_some() {
            cfg.endpoint = self.endpoint.clone();
        }
        if self.dim.is_some() {
            cfg.dim = self.dim;
        }
        if self.embeddings.is_some() {
            cfg.path = self.embeddings.clone();
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON config, or a run manifest to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus file (.csv or .jsonl).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    format: Option<CorpusFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    smote_k: Option<usize>,
    /// pre_split | train_only
    #[arg(long)]
    smote_stage: Option<SmoteStage>,
    #[arg(long)]
    no_smote: bool,
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long)]
    parallel_models: Option<usize>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args)]
struct ExtractArgs {
    /// Saved HTML pages.
    #[arg(required = true)]
    pages: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "div.review")]
    container: String,
    #[arg(long, default_value = ".review-text")]
    text: String,
}

#[derive(Args)]
struct PrepareArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: Option<CorpusFormat>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: Option<CorpusFormat>,
    /// EMB1 output; a `.jsonl` extension selects the JSON twin.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Args)]
struct ResampleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    smote_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    unstratified: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    train: PathBuf,
    /// Test set used for the per-epoch test accuracy.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write the training curve here (iterative models only).
    #[arg(long)]
    curves: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Report JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report table output.
    #[arg(long)]
    text: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, required = true, num_args = 1..)]
    json: Vec<PathBuf>,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    hyper: HyperArgs,
}

fn corpus_format(path: &Path, explicit: Option<CorpusFormat>) -> Result<CorpusFormat> {
    explicit.or_else(|| CorpusFormat::from_path(path)).ok_or_else(|| {
        Error::Config(format!("cannot infer format of {}; pass --format", path.display()))
    })
}

fn stdout_text(text: &str) -> Result<()> {
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    set(&mut cfg.input, args.input);
    if args.format.is_some() {
        cfg.format = args.format;
    }
    set(&mut cfg.output, args.out);
    set(&mut cfg.seed, args.seed);
    args.provider.apply(&mut cfg.provider);
    set(&mut cfg.split.test_fraction, args.test_fraction);
    set(&mut cfg.smote.k, args.smote_k);
    set(&mut cfg.smote.stage, args.smote_stage);
    if args.no_smote {
        cfg.smote.enabled = false;
    }
    set(&mut cfg.models, args.models);
    set(&mut cfg.parallel_models, args.parallel_models);
    args.hyper.apply(&mut cfg.params);

    let manifest = run_pipeline(&cfg)?;
    let comparison = cfg.output.join("comparison.txt");
    let text = std::fs::read_to_string(&comparison).map_err(|e| Error::io(&comparison, e))?;
    stdout_text(&text)?;
    eprintln!(
        "wrote {} artifacts under {}",
        manifest.artifacts.len() + 1,
        cfg.output.display()
    );
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let selectors = Selectors {
        container: args.container,
        text: args.text,
    };
    let mut lines = String::new();
    for page in &args.pages {
        let bytes = std::fs::read(page).map_err(|e| Error::io(page, e))?;
        let stem = page.file_stem().and_then(|s| s.to_str()).unwrap_or("page");
        for review in extract_reviews_bytes(&bytes, stem, &selectors)? {
            lines.push_str(&serde_json::to_string(&review).expect("review serializes"));
            lines.push('\n');
        }
    }
    write_text(&args.out, &lines)
}

fn prepare(args: PrepareArgs) -> Result<()> {
    let corpus = load_corpus(&args.input, corpus_format(&args.input, args.format)?)?;
    write_atomic(&args.out, |tmp| corpus.write_jsonl(tmp))?;
    eprintln!("{} reviews, {} dropped", corpus.len(), corpus.dropped_empty());
    Ok(())
}

fn embed(args: EmbedArgs) -> Result<()> {
    let corpus = load_corpus(&args.input, corpus_format(&args.input, args.format)?)?;
    let mut cfg = ProviderConfig::default();
    args.provider.apply(&mut cfg);
    let spec = resolve_provider(&cfg, args.seed)?;
    let dataset = embed_corpus(&Provider::from_spec(&spec)?, &spec, &corpus)?;
    write_embeddings(&dataset, &args.out)
}

fn resample(args: ResampleArgs) -> Result<()> {
    let dataset = load_embeddings(&args.input)?;
    let params = SmoteParams {
        k: args.smote_k,
        seed: stage_seed(args.seed, "smote"),
        ..SmoteParams::default()
    };
    let outcome = smote(&dataset, &params)?;
    for w in &outcome.warnings {
        log::warn!("{w}");
    }
    let out = outcome.dataset.quantized();
    write_embeddings(&out, &args.out)
}

fn split(args: SplitArgs) -> Result<()> {
    let dataset = load_embeddings(&args.input)?;
    let spec = SplitSpec {
        test_fraction: args.test_fraction,
        seed: stage_seed(args.seed, "split"),
        stratified: !args.unstratified,
    };
    let (train, test) = sentipipe::corpus::stratified_split(&dataset, &spec)?;
    write_embeddings(&train, &args.train)?;
    write_embeddings(&test, &args.test)
}

fn train(args: TrainArgs) -> Result<()> {
    let train = load_embeddings(&args.train)?;
    let test = args.test.as_deref().map(load_embeddings).transpose()?.map(|t| t.originals_only());
    let mut params = ModelParams::default();
    args.hyper.apply(&mut params);
    let (model, traces) = train_model(args.model, &train, test.as_ref(), &params, args.seed)?;
    write_text(&args.out, &model.to_json())?;
    if let Some(path) = &args.curves {
        if !args.model.is_iterative() {
            return Err(Error::Config(format!("`{}` has no per-epoch curve", args.model)));
        }
        write_text(path, &curves_csv(&traces))?;
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let model = TrainedModel::load(&args.model)?;
    let report = evaluate_model(&model, &load_embeddings(&args.test)?)?;
    let text = format_report(&report);
    if let Some(path) = &args.out {
        write_text(path, &report.to_json())?;
    }
    if let Some(path) = &args.text {
        write_text(path, &text)?;
    }
    stdout_text(&text)
}

fn report(args: ReportArgs) -> Result<()> {
    let mut named = Vec::new();
    for path in &args.json {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report = ClassificationReport::from_json(&text, &path.display().to_string())?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_owned();
        if args.json.len() > 1 {
            stdout_text(&format!("{name}\n"))?;
        }
        stdout_text(&format_report(&report))?;
        named.push((name, report));
    }
    if named.len() > 1 {
        stdout_text("\n")?;
        stdout_text(&format_comparison(&compare_models(&named)?))?;
    }
    Ok(())
}

fn curves(args: CurvesArgs) -> Result<()> {
    if !args.model.is_iterative() {
        return Err(Error::Config(format!(
            "`{}` is not trained per epoch; use `evaluate` for its accuracy",
            args.model
        )));
    }
    let train = load_embeddings(&args.train)?;
    let test = load_embeddings(&args.test)?.originals_only();
    let mut params = ModelParams::default();
    args.hyper.apply(&mut params);
    let (_, traces) = train_model(args.model, &train, Some(&test), &params, args.seed)?;
    write_text(&args.out, &curves_csv(&traces))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Extract(a) => extract(a),
        Command::Prepare(a) => prepare(a),
        Command::Embed(a) => embed(a),
        Command::Resample(a) => resample(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
        Command::Curves(a) => curves(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
