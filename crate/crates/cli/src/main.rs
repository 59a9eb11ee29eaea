//! `impact`: batch experiment runner for the citation-impact toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation failure (bad input
//! data or mismatched fingerprints), 3 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use impact_core::corpus::{self, CorpusManifest};
use impact_core::experiment::{
    self, run_experiment, top_features, FeatureCache, GammaChoice, KChoice, PipelineConfig,
};
use impact_core::{model_io, parallel, report, synthetic, text};

#[derive(Parser)]
#[command(name = "impact", version, about = "Citation-impact prediction from paper text and page images")]
struct Cli {
    /// Worker threads for per-document stages (0 = logical cores).
    /// Any value produces byte-identical outputs to --jobs 1.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, validate, label, and split a corpus manifest.
    Ingest(IngestArgs),
    /// Compute and cache per-document features.
    Featurize(FeaturizeArgs),
    /// Train classifiers on one domain's training split.
    Train(TrainArgs),
    /// Train on one domain, evaluate on another; writes report files.
    Eval(EvalArgs),
    /// Most informative vocabulary terms of a linear text model.
    TopFeatures(TopFeaturesArgs),
    /// Generate the synthetic corpus and run the full experiment matrix.
    DemoSynthetic(DemoArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Line-delimited JSON manifest (id, domain, year, citations, text, pages).
    #[arg(long)]
    manifest: PathBuf,
    /// Directory the manifest's relative paths resolve against.
    #[arg(long, env = "IMPACT_ROOT")]
    root: PathBuf,
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
    /// Split seed.
    #[arg(long, default_value_t = 17)]
    seed: u64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Modality {
    Text,
    Visual,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(value_enum)]
    modality: Modality,
    /// Corpus directory produced by `ingest`.
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Features {
    Text,
    Visual,
    Meta,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    features: Features,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    train_domain: String,
    /// Output directory for model files.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    train_domain: String,
    #[arg(long)]
    test_domain: String,
    #[arg(long)]
    out: PathBuf,
    /// Report the nonlinear selector's γ explicitly (it is always
    /// evaluated; this flag only gates the γ options below).
    #[arg(long)]
    nonlinear: bool,
    /// Fixed selector bias γ.
    #[arg(long, conflicts_with = "sweep_gamma")]
    gamma: Option<f64>,
    /// Choose γ from the 0..=0.30 grid on the dev split.
    #[arg(long)]
    sweep_gamma: bool,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct TopFeaturesArgs {
    /// Text model file from `train --features text`.
    #[arg(long)]
    model: PathBuf,
    /// Vocabulary file written alongside the model.
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = 20)]
    n: usize,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Pipeline knobs shared by featurize/train/eval.
#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value_t = text::DEFAULT_MAX_TERMS)]
    max_terms: usize,
    /// Visual vocabulary size.
    #[arg(long, conflicts_with = "select_k")]
    k: Option<usize>,
    /// Search k geometrically (k0, 3k0, …) on dev AUC, starting here.
    #[arg(long)]
    select_k: Option<usize>,
    /// SVM regularization λ (0 = automatic).
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Gaussian kernel width (default: median pairwise distance).
    #[arg(long)]
    sigma: Option<f64>,
    /// Stacking folds.
    #[arg(long, default_value_t = 5)]
    folds: usize,
}

impl PipelineArgs {
    fn to_config(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            max_terms: self.max_terms,
            k: match (self.k, self.select_k) {
                (Some(k), _) => KChoice::Fixed(k),
                (None, Some(k0)) => KChoice::Select { k0 },
                (None, None) => KChoice::Fixed(100),
            },
            lambda: self.lambda,
            sigma: self.sigma,
            folds: self.folds,
            seed,
            ..PipelineConfig::default()
        }
    }
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let jobs = cli.jobs;
    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(&args),
        Command::Featurize(args) => cmd_featurize(&args, jobs),
        Command::Train(args) => cmd_train(&args, jobs),
        Command::Eval(args) => cmd_eval(&args, jobs),
        Command::TopFeatures(args) => cmd_top_features(&args),
        Command::DemoSynthetic(args) => cmd_demo(&args, jobs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// What `ingest` writes: the labeled, split corpus plus run provenance.
#[derive(serde::Serialize, serde::Deserialize)]
struct CorpusIndex {
    manifest: CorpusManifest,
    seed: u64,
    ratios: [f64; 3],
    toolkit_version: String,
}

fn load_corpus(dir: &Path) -> Result<CorpusIndex, CliError> {
    let path = dir.join("corpus.json");
    let contents = std::fs::read_to_string(&path)
        .map_err(|e| validation(format!("cannot read corpus index {}: {e}", path.display())))?;
    serde_json::from_str(&contents)
        .map_err(|e| validation(format!("malformed corpus index {}: {e}", path.display())))
}

fn cmd_ingest(args: &IngestArgs) -> Result<(), CliError> {
    let parsed = corpus::parse_manifest(&args.manifest, &args.root)
        .map_err(|e| validation(e.to_string()))?;
    let mut manifest = parsed.manifest;
    for r in &parsed.rejected {
        eprintln!(
            "note: excluded {} (line {}): {} citations fall in the 1..=10 band",
            r.id, r.line, r.citations
        );
    }
    let report = corpus::validate_corpus(&manifest);
    for issue in &report.issues {
        let tag = match issue.severity {
            corpus::Severity::Warning => "warning",
            corpus::Severity::Error => "error",
        };
        eprintln!("{tag}: {}: {}", issue.record_id, issue.message);
    }
    if report.has_errors() {
        return Err(validation("corpus validation failed; see messages above"));
    }
    let ratios = [0.7, 0.15, 0.15];
    let split = corpus::split_corpus(&manifest, ratios, args.seed)
        .map_err(|e| validation(e.to_string()))?;
    corpus::apply_split(&mut manifest, &split);

    std::fs::create_dir_all(&args.out).map_err(runtime)?;
    let index = CorpusIndex {
        manifest,
        seed: args.seed,
        ratios,
        toolkit_version: impact_core::TOOLKIT_VERSION.to_string(),
    };
    let out = args.out.join("corpus.json");
    std::fs::write(&out, serde_json::to_string_pretty(&index).map_err(runtime)?)
        .map_err(runtime)?;
    for (domain, label, n) in index.manifest.label_balance() {
        println!("{domain}\t{label}\t{n}");
    }
    println!(
        "ingested {} documents ({} excluded) -> {}",
        index.manifest.records.len(),
        parsed.rejected.len(),
        out.display()
    );
    Ok(())
}

/// Hash naming the feature cache; covers everything tokenization and
/// SIFT depend on, so the cache is reused until those parameters change.
fn feature_hash(config: &PipelineConfig, index: &CorpusIndex) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(format!(
        "sigma={:.17e}\ncontrast={:.17e}\nedge={:.17e}\nsplit_seed={}\n",
        config.sigma_dog, config.contrast_threshold, config.edge_threshold, index.seed
    ));
    for r in &index.manifest.records {
        h.update(r.id.as_bytes());
        h.update([0]);
    }
    let d = h.finalize();
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(serde::Serialize, serde::Deserialize)]
struct TextRow {
    id: String,
    tokens: Vec<String>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct VisualRow {
    id: String,
    descriptors: Vec<Vec<f64>>,
}

/// Loads the cached feature file for one modality, computing and writing
/// it first if absent. Population is parallel per document but the file
/// is written in manifest order, so its bytes are jobs-independent.
fn ensure_features(
    corpus_dir: &Path,
    index: &CorpusIndex,
    config: &PipelineConfig,
    modality: Modality,
    jobs: usize,
    cache: &mut FeatureCache,
) -> Result<PathBuf, CliError> {
    let dir = corpus_dir.join(format!("features-{}", feature_hash(config, index)));
    std::fs::create_dir_all(&dir).map_err(runtime)?;
    let path = dir.join(match modality {
        Modality::Text => "text.jsonl",
        Modality::Visual => "visual.jsonl",
    });
    if path.is_file() {
        let contents = std::fs::read_to_string(&path).map_err(runtime)?;
        for (lineno, line) in contents.lines().enumerate() {
            match modality {
                Modality::Text => {
                    let row: TextRow = serde_json::from_str(line).map_err(|e| {
                        validation(format!("corrupt cache {} line {}: {e}", path.display(), lineno + 1))
                    })?;
                    cache.tokens.insert(row.id, row.tokens);
                }
                Modality::Visual => {
                    let row: VisualRow = serde_json::from_str(line).map_err(|e| {
                        validation(format!("corrupt cache {} line {}: {e}", path.display(), lineno + 1))
                    })?;
                    cache.descriptors.insert(row.id, row.descriptors);
                }
            }
        }
        return Ok(path);
    }

    let full = parallel::with_jobs(jobs, || {
        experiment::build_feature_cache(&index.manifest, &config.sift_params())
    })
    .map_err(|e| runtime(format!("featurization failed: {e}")))?;

    let mut out = String::new();
    for r in &index.manifest.records {
        let line = match modality {
            Modality::Text => serde_json::to_string(&TextRow {
                id: r.id.clone(),
                tokens: full.tokens[&r.id].clone(),
            }),
            Modality::Visual => serde_json::to_string(&VisualRow {
                id: r.id.clone(),
                descriptors: full.descriptors[&r.id].clone(),
            }),
        }
        .map_err(runtime)?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(&path, out).map_err(runtime)?;
    match modality {
        Modality::Text => cache.tokens = full.tokens,
        Modality::Visual => cache.descriptors = full.descriptors,
    }
    Ok(path)
}

fn cmd_featurize(args: &FeaturizeArgs, jobs: usize) -> Result<(), CliError> {
    let index = load_corpus(&args.corpus)?;
    let config = args.pipeline.to_config(index.seed);
    let mut cache = FeatureCache::default();
    let path = ensure_features(&args.corpus, &index, &config, args.modality, jobs, &mut cache)?;
    println!("features cached at {}", path.display());
    Ok(())
}

fn build_cache(
    corpus_dir: &Path,
    index: &CorpusIndex,
    config: &PipelineConfig,
    jobs: usize,
) -> Result<FeatureCache, CliError> {
    let mut cache = FeatureCache::default();
    ensure_features(corpus_dir, index, config, Modality::Text, jobs, &mut cache)?;
    ensure_features(corpus_dir, index, config, Modality::Visual, jobs, &mut cache)?;
    Ok(cache)
}

fn run_pair(
    index: &CorpusIndex,
    cache: &FeatureCache,
    train_domain: &str,
    test_domain: &str,
    config: &PipelineConfig,
) -> Result<experiment::ExperimentOutput, CliError> {
    run_experiment(&index.manifest, cache, train_domain, test_domain, config).map_err(|e| {
        match &e {
            experiment::ExperimentError::MissingDomain(_)
            | experiment::ExperimentError::EmptySplit { .. } => validation(e.to_string()),
            _ => runtime(e),
        }
    })
}

fn cmd_train(args: &TrainArgs, jobs: usize) -> Result<(), CliError> {
    let index = load_corpus(&args.corpus)?;
    let config = args.pipeline.to_config(index.seed);
    let cache = build_cache(&args.corpus, &index, &config, jobs)?;
    // training always evaluates intra-domain to fill AUC estimates
    let output = run_pair(&index, &cache, &args.train_domain, &args.train_domain, &config)?;

    std::fs::create_dir_all(&args.out).map_err(runtime)?;
    let mut written = Vec::new();
    if matches!(args.features, Features::Text | Features::Meta) {
        let p = args.out.join("text-model.txt");
        model_io::save_model(&output.meta.text_model, &p).map_err(runtime)?;
        let v = args.out.join("vocabulary.json");
        std::fs::write(&v, serde_json::to_string(&output.vocabulary).map_err(runtime)?)
            .map_err(runtime)?;
        written.push(p);
        written.push(v);
    }
    if matches!(args.features, Features::Visual | Features::Meta) {
        let p = args.out.join("visual-model.txt");
        model_io::save_model(&output.meta.vis_model, &p).map_err(runtime)?;
        let v = args.out.join("visual-vocabulary.json");
        std::fs::write(
            &v,
            serde_json::to_string(&output.visual_vocabulary).map_err(runtime)?,
        )
        .map_err(runtime)?;
        written.push(p);
        written.push(v);
    }
    if matches!(args.features, Features::Meta) {
        let p = args.out.join("fusion-model.txt");
        model_io::save_fusion(&output.meta, output.report.selector_gamma, &p)
            .map_err(runtime)?;
        written.push(p);
    }
    let run = args.out.join("run.json");
    std::fs::write(
        &run,
        serde_json::to_string_pretty(&serde_json::json!({
            "config_hash": config.hash(),
            "seed": config.seed,
            "toolkit_version": impact_core::TOOLKIT_VERSION,
            "train_domain": args.train_domain,
        }))
        .map_err(runtime)?,
    )
    .map_err(runtime)?;
    written.push(run);
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs, jobs: usize) -> Result<(), CliError> {
    let index = load_corpus(&args.corpus)?;
    let mut config = args.pipeline.to_config(index.seed);
    config.gamma = match (args.gamma, args.sweep_gamma) {
        (Some(g), _) => GammaChoice::Fixed(g),
        (None, true) => GammaChoice::Sweep,
        (None, false) => config.gamma,
    };
    let cache = build_cache(&args.corpus, &index, &config, jobs)?;
    let output = run_pair(&index, &cache, &args.train_domain, &args.test_domain, &config)?;
    let files = report::emit_report(&output.report, &args.out).map_err(runtime)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    for (name, eval) in &output.report.classifiers {
        println!(
            "{} -> {}: {name} AUC {:.4}",
            args.train_domain, args.test_domain, eval.auc
        );
    }
    if args.nonlinear {
        println!(
            "nonlinear selector: gamma {:.2}, accuracy {:.4}",
            output.report.selector_gamma, output.report.nonlinear_accuracy
        );
    }
    Ok(())
}

fn cmd_top_features(args: &TopFeaturesArgs) -> Result<(), CliError> {
    let model = model_io::load_model(&args.model).map_err(|e| validation(e.to_string()))?;
    let vocab_text = std::fs::read_to_string(&args.vocab)
        .map_err(|e| validation(format!("cannot read vocabulary {}: {e}", args.vocab.display())))?;
    let vocab: text::Vocabulary = serde_json::from_str(&vocab_text)
        .map_err(|e| validation(format!("malformed vocabulary {}: {e}", args.vocab.display())))?;
    if model.feature_fingerprint != vocab.fingerprint() {
        return Err(validation(format!(
            "fingerprint mismatch: model {} was not trained on vocabulary {} ({})",
            model.feature_fingerprint,
            args.vocab.display(),
            vocab.fingerprint()
        )));
    }
    let report = top_features(&model, &vocab, args.n).map_err(|e| validation(e.to_string()))?;
    println!("most negative (low-impact indicators):");
    for (w, t) in &report.negative {
        println!("  {w:+.6}\t{t}");
    }
    println!("most positive (high-impact indicators):");
    for (w, t) in &report.positive {
        println!("  {w:+.6}\t{t}");
    }
    if !report.venue_flags.is_empty() {
        println!("venue terms present: {}", report.venue_flags.join(", "));
    }
    Ok(())
}

fn cmd_demo(args: &DemoArgs, jobs: usize) -> Result<(), CliError> {
    let corpus_dir = args.out.join("corpus");
    let manifest = synthetic::generate(
        &corpus_dir,
        &synthetic::SyntheticSpec {
            docs_per_cell: 100,
            seed: args.seed,
        },
    )
    .map_err(runtime)?;

    let ingest = IngestArgs {
        manifest,
        root: corpus_dir.clone(),
        out: corpus_dir.clone(),
        seed: args.seed,
    };
    cmd_ingest(&ingest)?;

    let index = load_corpus(&corpus_dir)?;
    let config = synthetic::demo_config(args.seed);
    let cache = build_cache(&corpus_dir, &index, &config, jobs)?;

    let domains = synthetic::SYNTH_DOMAINS;
    for train in domains {
        for test in domains {
            let output = run_pair(&index, &cache, train, test, &config)?;
            let out_dir = args.out.join("reports").join(format!("{train}-{test}"));
            report::emit_report(&output.report, &out_dir).map_err(runtime)?;
            for (name, eval) in &output.report.classifiers {
                println!("{train} -> {test}: {name} AUC {:.4}", eval.auc);
            }
            if train == test {
                // keep one model set per training domain
                let model_dir = args.out.join("models").join(train);
                std::fs::create_dir_all(&model_dir).map_err(runtime)?;
                model_io::save_fusion(
                    &output.meta,
                    output.report.selector_gamma,
                    &model_dir.join("fusion-model.txt"),
                )
                .map_err(runtime)?;
                model_io::save_model(
                    &output.meta.text_model,
                    &model_dir.join("text-model.txt"),
                )
                .map_err(runtime)?;
                std::fs::write(
                    model_dir.join("vocabulary.json"),
                    serde_json::to_string(&output.vocabulary).map_err(runtime)?,
                )
                .map_err(runtime)?;
            }
        }
    }
    println!("demo artifacts under {}", args.out.display());
    Ok(())
}
