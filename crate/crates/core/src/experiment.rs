//! End-to-end experiments: fit everything on a training domain's train
//! split, evaluate all four classifiers on a test domain's test split,
//! and report ROC curves, AUCs, and the most informative text features.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{CorpusManifest, DocumentRecord, Label, Split};
use crate::fusion::{self, DevOutput, FusionConfig, MetaModel, Winner};
use crate::imageprep;
use crate::parallel;
use crate::roc::{self, RocCurve};
use crate::sift::{self, SiftParams};
use crate::sparse::SparseVector;
use crate::svm::{self, KernelSpec, SvmModel, TrainParams};
use crate::text;
use crate::visual::{self, VisualVocabulary};

pub const COMBINED_DOMAIN: &str = "combined";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("domain {0:?} has no documents in the corpus")]
    MissingDomain(String),
    #[error("empty {split} split for domain {domain:?}")]
    EmptySplit { domain: String, split: String },
    #[error("cannot read text file for {id}: {message}")]
    TextRead { id: String, message: String },
    #[error("image preparation failed for {id}: {source}")]
    Image {
        id: String,
        source: imageprep::ImageError,
    },
    #[error(transparent)]
    Text(#[from] text::TextError),
    #[error(transparent)]
    Visual(#[from] visual::VisualError),
    #[error(transparent)]
    Svm(#[from] svm::SvmError),
    #[error(transparent)]
    Fusion(#[from] fusion::FusionError),
    #[error(transparent)]
    Roc(#[from] roc::RocError),
    #[error("top_features requires a linear model over the text vocabulary")]
    NotLinear,
    #[error("model dimension {model} does not match vocabulary size {vocab}")]
    VocabMismatch { model: usize, vocab: usize },
}

/// How the visual vocabulary size is chosen.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum KChoice {
    Fixed(usize),
    /// Geometric search k0, 3k0, 9k0, … on dev AUC.
    Select { k0: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum GammaChoice {
    Fixed(f64),
    /// Sweep the 0..=0.30 grid on the dev split.
    Sweep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_terms: usize,
    pub sigma_dog: f64,
    pub contrast_threshold: f64,
    pub edge_threshold: f64,
    pub k: KChoice,
    /// 0 → auto (C = 1).
    pub lambda: f64,
    /// None → median pairwise distance heuristic.
    pub sigma: Option<f64>,
    pub folds: usize,
    pub gamma: GammaChoice,
    pub seed: u64,
    pub svm_tol: f64,
    pub svm_max_iters: usize,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            max_terms: text::DEFAULT_MAX_TERMS,
            sigma_dog: 1.6,
            contrast_threshold: 0.03,
            edge_threshold: 10.0,
            k: KChoice::Fixed(100),
            lambda: 0.0,
            sigma: None,
            folds: 5,
            gamma: GammaChoice::Fixed(0.25),
            seed: 1,
            svm_tol: 1e-4,
            svm_max_iters: 200_000,
            kmeans_max_iters: 50,
            kmeans_tol: 1e-4,
        }
    }
}

impl PipelineConfig {
    pub fn sift_params(&self) -> SiftParams {
        SiftParams {
            sigma: self.sigma_dog,
            contrast_threshold: self.contrast_threshold,
            edge_threshold: self.edge_threshold,
            ..SiftParams::default()
        }
    }

    /// Canonical text form; its hash is stamped on every artifact.
    pub fn canonical_string(&self) -> String {
        let k = match self.k {
            KChoice::Fixed(k) => format!("fixed:{k}"),
            KChoice::Select { k0 } => format!("select:{k0}"),
        };
        let gamma = match self.gamma {
            GammaChoice::Fixed(g) => format!("fixed:{g:.17e}"),
            GammaChoice::Sweep => "sweep".to_string(),
        };
        let sigma = match self.sigma {
            Some(s) => format!("{s:.17e}"),
            None => "median".to_string(),
        };
        format!(
            "max_terms={}\nsigma_dog={:.17e}\ncontrast={:.17e}\nedge={:.17e}\nk={}\nlambda={:.17e}\nsigma={}\nfolds={}\ngamma={}\nseed={}\nsvm_tol={:.17e}\nsvm_max_iters={}\nkmeans_max_iters={}\nkmeans_tol={:.17e}\n",
            self.max_terms,
            self.sigma_dog,
            self.contrast_threshold,
            self.edge_threshold,
            k,
            self.lambda,
            sigma,
            self.folds,
            gamma,
            self.seed,
            self.svm_tol,
            self.svm_max_iters,
            self.kmeans_max_iters,
            self.kmeans_tol,
        )
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_string().as_bytes());
        let d = h.finalize();
        d.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-document raw features shared across the experiment matrix: tokens
/// and SIFT descriptors do not depend on the training domain.
#[derive(Debug, Default)]
pub struct FeatureCache {
    pub tokens: HashMap<String, Vec<String>>,
    pub descriptors: HashMap<String, Vec<Vec<f64>>>,
}

/// Tokenizes every document and extracts SIFT descriptors from its page
/// strip. Parallel per document; results merge in record order.
pub fn build_feature_cache(
    manifest: &CorpusManifest,
    sift_params: &SiftParams,
) -> Result<FeatureCache, ExperimentError> {
    let results = parallel::map_ordered(&manifest.records, |r| {
        let text_raw = std::fs::read_to_string(manifest.root.join(&r.text_path)).map_err(|e| {
            ExperimentError::TextRead {
                id: r.id.clone(),
                message: e.to_string(),
            }
        })?;
        let tokens = text::tokenize(&text_raw);
        let strip = imageprep::prepare_document_image(&r.page_paths, &manifest.root).map_err(
            |source| ExperimentError::Image {
                id: r.id.clone(),
                source,
            },
        )?;
        let descs: Vec<Vec<f64>> = sift::detect_and_describe(&strip, sift_params)
            .into_iter()
            .map(|(_, d)| d.into_iter().map(f64::from).collect())
            .collect();
        Ok::<_, ExperimentError>((r.id.clone(), tokens, descs))
    });
    let mut cache = FeatureCache::default();
    for res in results {
        let (id, tokens, descs) = res?;
        cache.tokens.insert(id.clone(), tokens);
        cache.descriptors.insert(id, descs);
    }
    Ok(cache)
}

fn in_domain(record: &DocumentRecord, domain: &str) -> bool {
    domain == COMBINED_DOMAIN || record.domain == domain
}

fn select_docs<'a>(
    manifest: &'a CorpusManifest,
    domain: &str,
    split: Split,
) -> Vec<&'a DocumentRecord> {
    let mut docs: Vec<&DocumentRecord> = manifest
        .records
        .iter()
        .filter(|r| in_domain(r, domain) && r.split == Some(split))
        .collect();
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    docs
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierEval {
    pub auc: f64,
    pub curve: RocCurve,
}

/// One cell of the experiment matrix, mirroring a row of the
/// intra-/inter-domain result tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub train_domain: String,
    pub test_domain: String,
    /// Keys: text, visual, meta, nonlinear. The nonlinear selector is
    /// reported for completeness but excluded from headline comparisons.
    pub classifiers: BTreeMap<String, ClassifierEval>,
    pub nonlinear_accuracy: f64,
    pub selector_gamma: f64,
    pub k: usize,
    pub auc_text_train: f64,
    pub auc_vis_train: f64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub seed: u64,
    pub config_hash: String,
    pub toolkit_version: String,
}

/// Everything `run_experiment` fits, for callers that also need the
/// models (model export, top-features).
pub struct ExperimentOutput {
    pub report: EvalReport,
    pub vocabulary: text::Vocabulary,
    pub visual_vocabulary: VisualVocabulary,
    pub meta: MetaModel,
}

struct PreparedFeatures {
    text: HashMap<String, SparseVector>,
    visual: HashMap<String, SparseVector>,
}

fn train_params(config: &PipelineConfig) -> TrainParams {
    TrainParams {
        lambda: config.lambda,
        tol: config.svm_tol,
        max_iters: config.svm_max_iters,
        seed: config.seed,
    }
}

fn fit_visual_vocabulary(
    train_docs: &[&DocumentRecord],
    cache: &FeatureCache,
    k: usize,
    config: &PipelineConfig,
) -> Result<VisualVocabulary, ExperimentError> {
    // canonical descriptor order: document id, then descriptor index
    let mut pool: Vec<Vec<f64>> = Vec::new();
    for d in train_docs {
        pool.extend(cache.descriptors[&d.id].iter().cloned());
    }
    let centroids = visual::fit_centroids(
        &pool,
        k,
        config.seed,
        config.kmeans_max_iters,
        config.kmeans_tol,
    )?;
    let train_bovw: Vec<SparseVector> = train_docs
        .iter()
        .map(|d| visual::bovw_vector(&cache.descriptors[&d.id], &centroids))
        .collect();
    let (mean, stdev) = visual::fit_standardizer(&train_bovw)?;
    Ok(VisualVocabulary {
        centroids,
        k,
        feature_mean: mean,
        feature_stdev: stdev,
    })
}

fn vectorize(
    docs: &[&DocumentRecord],
    cache: &FeatureCache,
    vocab: &text::Vocabulary,
    vvocab: &VisualVocabulary,
) -> Result<PreparedFeatures, ExperimentError> {
    let mut out = PreparedFeatures {
        text: HashMap::new(),
        visual: HashMap::new(),
    };
    for d in docs {
        let tf = text::tfidf_vector(&cache.tokens[&d.id], vocab);
        out.text.insert(d.id.clone(), tf.vector);
        let bovw = vvocab.standardized_bovw(&cache.descriptors[&d.id])?;
        out.visual.insert(d.id.clone(), bovw);
    }
    Ok(out)
}

fn labels_of(docs: &[&DocumentRecord]) -> Vec<bool> {
    docs.iter().map(|d| d.label == Some(Label::High)).collect()
}

fn check_nonempty(
    docs: &[&DocumentRecord],
    domain: &str,
    split: &str,
) -> Result<(), ExperimentError> {
    if docs.is_empty() {
        return Err(ExperimentError::EmptySplit {
            domain: domain.to_string(),
            split: split.to_string(),
        });
    }
    Ok(())
}

/// Trains the full stack on `train_domain`'s train split and evaluates
/// text, visual, meta, and nonlinear classifiers on `test_domain`'s test
/// split. γ and (optionally) k are chosen on the train domain's dev split.
pub fn run_experiment(
    manifest: &CorpusManifest,
    cache: &FeatureCache,
    train_domain: &str,
    test_domain: &str,
    config: &PipelineConfig,
) -> Result<ExperimentOutput, ExperimentError> {
    for domain in [train_domain, test_domain] {
        if domain != COMBINED_DOMAIN && !manifest.records.iter().any(|r| r.domain == domain) {
            return Err(ExperimentError::MissingDomain(domain.to_string()));
        }
    }
    let train_docs = select_docs(manifest, train_domain, Split::Train);
    let dev_docs = select_docs(manifest, train_domain, Split::Dev);
    let test_docs = select_docs(manifest, test_domain, Split::Test);
    check_nonempty(&train_docs, train_domain, "train")?;
    check_nonempty(&dev_docs, train_domain, "dev")?;
    check_nonempty(&test_docs, test_domain, "test")?;

    // text vocabulary from the training split only
    let vocab = text::build_vocabulary(
        train_docs.iter().map(|d| cache.tokens[&d.id].iter()),
        config.max_terms,
    )?;

    let params = train_params(config);
    let train_labels = labels_of(&train_docs);
    let dev_labels = labels_of(&dev_docs);
    let test_labels = labels_of(&test_docs);

    // visual vocabulary size: fixed or dev-AUC geometric search
    let k = match config.k {
        KChoice::Fixed(k) => k,
        KChoice::Select { k0 } => {
            let n_train_desc: usize = train_docs
                .iter()
                .map(|d| cache.descriptors[&d.id].len())
                .sum();
            visual::select_k(k0, n_train_desc.max(k0), |k| {
                let vv = fit_visual_vocabulary(&train_docs, cache, k, config)
                    .map_err(|e| e.to_string())?;
                let train_x: Vec<SparseVector> = train_docs
                    .iter()
                    .map(|d| vv.standardized_bovw(&cache.descriptors[&d.id]))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?;
                let sigma = config
                    .sigma
                    .unwrap_or_else(|| svm::median_pairwise_distance(&train_x, config.seed));
                let model =
                    svm::train_rbf_svm(&train_x, &train_labels, sigma, &params, "select-k")
                        .map_err(|e| e.to_string())?;
                let dev_scores: Vec<f64> = dev_docs
                    .iter()
                    .map(|d| {
                        vv.standardized_bovw(&cache.descriptors[&d.id])
                            .map_err(|e| e.to_string())
                            .and_then(|x| model.decision_value(&x).map_err(|e| e.to_string()))
                    })
                    .collect::<Result<_, _>>()?;
                roc::roc_auc(&dev_scores, &dev_labels)
                    .map(|c| c.auc)
                    .map_err(|e| e.to_string())
            })?
        }
    };

    let vvocab = fit_visual_vocabulary(&train_docs, cache, k, config)?;

    let mut all_docs = train_docs.clone();
    all_docs.extend(dev_docs.iter().copied());
    all_docs.extend(test_docs.iter().copied());
    let features = vectorize(&all_docs, cache, &vocab, &vvocab)?;

    let gather = |docs: &[&DocumentRecord]| -> (Vec<SparseVector>, Vec<SparseVector>) {
        (
            docs.iter().map(|d| features.text[&d.id].clone()).collect(),
            docs.iter().map(|d| features.visual[&d.id].clone()).collect(),
        )
    };
    let (train_text, train_vis) = gather(&train_docs);
    let (dev_text, dev_vis) = gather(&dev_docs);
    let (test_text, test_vis) = gather(&test_docs);

    let sigma = config
        .sigma
        .unwrap_or_else(|| svm::median_pairwise_distance(&train_vis, config.seed));

    let meta = fusion::train_meta(
        &train_text,
        &train_vis,
        &train_labels,
        KernelSpec::Linear,
        KernelSpec::Gaussian { sigma },
        &params,
        config.folds,
        &vocab.fingerprint(),
        &vvocab.fingerprint(),
    )?;

    // γ on the dev split
    let dev_outputs: Vec<DevOutput> = dev_text
        .iter()
        .zip(&dev_vis)
        .zip(&dev_labels)
        .map(|((t, v), &l)| {
            let (tp, vp) = meta.base_probs(t, v)?;
            Ok(DevOutput {
                text: tp,
                vis: vp,
                label: if l { Label::High } else { Label::Low },
            })
        })
        .collect::<Result<_, ExperimentError>>()?;
    let gamma = match config.gamma {
        GammaChoice::Fixed(g) => g,
        GammaChoice::Sweep => fusion::sweep_gamma(
            &dev_outputs,
            meta.auc_text,
            meta.auc_vis,
            &fusion::default_gamma_grid(),
        )?,
    };
    let fusion_cfg = FusionConfig {
        gamma,
        auc_text: meta.auc_text,
        auc_vis: meta.auc_vis,
    };

    // test-split evaluation
    let mut text_scores = Vec::with_capacity(test_docs.len());
    let mut vis_scores = Vec::with_capacity(test_docs.len());
    let mut meta_scores = Vec::with_capacity(test_docs.len());
    let mut nl_scores = Vec::with_capacity(test_docs.len());
    let mut nl_correct = 0usize;
    for ((t, v), &l) in test_text.iter().zip(&test_vis).zip(&test_labels) {
        let (tp, vp) = meta.base_probs(t, v)?;
        text_scores.push(tp.p_high);
        vis_scores.push(vp.p_high);
        meta_scores.push(meta.predict_proba(t, v)?.p_high);
        let (label, winner) = fusion::nonlinear_select(&tp, &vp, &fusion_cfg);
        nl_scores.push(match winner {
            Winner::Text => tp.p_high,
            Winner::Visual => vp.p_high,
        });
        if label == if l { Label::High } else { Label::Low } {
            nl_correct += 1;
        }
    }

    let mut classifiers = BTreeMap::new();
    for (name, scores) in [
        ("text", &text_scores),
        ("visual", &vis_scores),
        ("meta", &meta_scores),
        ("nonlinear", &nl_scores),
    ] {
        let curve = roc::roc_auc(scores, &test_labels)?;
        classifiers.insert(
            name.to_string(),
            ClassifierEval {
                auc: curve.auc,
                curve,
            },
        );
    }

    let report = EvalReport {
        train_domain: train_domain.to_string(),
        test_domain: test_domain.to_string(),
        classifiers,
        nonlinear_accuracy: nl_correct as f64 / test_docs.len() as f64,
        selector_gamma: gamma,
        k,
        auc_text_train: meta.auc_text,
        auc_vis_train: meta.auc_vis,
        n_train: train_docs.len(),
        n_dev: dev_docs.len(),
        n_test: test_docs.len(),
        seed: config.seed,
        config_hash: config.hash(),
        toolkit_version: crate::TOOLKIT_VERSION.to_string(),
    };
    Ok(ExperimentOutput {
        report,
        vocabulary: vocab,
        visual_vocabulary: vvocab,
        meta,
    })
}

/// Default venue-term watchlist surfaced in the feature report.
pub const VENUE_WATCHLIST: [&str; 3] = ["acm", "arxiv", "ieee"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureReport {
    /// Most negative coefficients (low-citation-indicative), ascending.
    pub negative: Vec<(f64, String)>,
    /// Most positive coefficients (high-citation-indicative), descending.
    pub positive: Vec<(f64, String)>,
    /// Venue terms found among the listed features (publication-venue
    /// bias is surfaced, not removed).
    pub venue_flags: Vec<String>,
}

/// The n most-negative and n most-positive linear-SVM weights mapped
/// through the vocabulary.
pub fn top_features(
    model: &SvmModel,
    vocabulary: &text::Vocabulary,
    n: usize,
) -> Result<FeatureReport, ExperimentError> {
    let (weights, _) = model.linear_weights().ok_or(ExperimentError::NotLinear)?;
    if weights.len() != vocabulary.len() {
        return Err(ExperimentError::VocabMismatch {
            model: weights.len(),
            vocab: vocabulary.len(),
        });
    }
    let mut ranked: Vec<(f64, String)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| (w, vocabulary.term(i).to_string()))
        .collect();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    let negative: Vec<(f64, String)> = ranked.iter().take(n).cloned().collect();
    let mut positive: Vec<(f64, String)> = ranked.iter().rev().take(n).cloned().collect();
    // descending by coefficient, lexicographic among equals
    positive.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    let venue_flags: Vec<String> = VENUE_WATCHLIST
        .iter()
        .filter(|v| {
            negative.iter().chain(&positive).any(|(_, t)| t == *v)
        })
        .map(|v| v.to_string())
        .collect();
    Ok(FeatureReport {
        negative,
        positive,
        venue_flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::ModelParams;

    fn linear_model(weights: Vec<f64>) -> SvmModel {
        let dim = weights.len();
        SvmModel {
            kernel: KernelSpec::Linear,
            params: ModelParams::Linear { weights, bias: 0.0 },
            lambda: 0.1,
            dim,
            seed: 0,
            platt: None,
            auc_estimate: None,
            feature_fingerprint: "t".into(),
        }
    }

    fn vocab_of(terms: &[&str]) -> text::Vocabulary {
        // one synthetic doc per term, repeated so ordering is by frequency
        let docs: Vec<Vec<String>> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| vec![t.to_string(); terms.len() + 10 - i])
            .collect();
        text::build_vocabulary(docs.iter().map(|d| d.iter()), terms.len()).unwrap()
    }

    #[test]
    fn top_features_orders_by_coefficient() {
        let vocab = vocab_of(&["alpha", "beta", "gamma", "delta"]);
        let mut weights = vec![0.0; 4];
        weights[vocab.column("alpha").unwrap()] = 1.5;
        weights[vocab.column("beta").unwrap()] = -2.0;
        weights[vocab.column("gamma").unwrap()] = 0.5;
        weights[vocab.column("delta").unwrap()] = -0.1;
        let report = top_features(&linear_model(weights), &vocab, 2).unwrap();
        assert_eq!(report.negative[0].1, "beta");
        assert_eq!(report.negative[1].1, "delta");
        assert_eq!(report.positive[0].1, "alpha");
        assert_eq!(report.positive[1].1, "gamma");
    }

    #[test]
    fn top_features_all_zero_weights_is_lexicographic() {
        let vocab = vocab_of(&["b", "a", "c"]);
        let report = top_features(&linear_model(vec![0.0; 3]), &vocab, 3).unwrap();
        let neg_terms: Vec<&str> = report.negative.iter().map(|(_, t)| t.as_str()).collect();
        assert_eq!(neg_terms, vec!["a", "b", "c"]);
        let pos_terms: Vec<&str> = report.positive.iter().map(|(_, t)| t.as_str()).collect();
        assert_eq!(pos_terms, vec!["a", "b", "c"]);
        assert!(report.negative.iter().all(|(c, _)| *c == 0.0));
    }

    #[test]
    fn top_features_rejects_gaussian_model() {
        let vocab = vocab_of(&["a"]);
        let model = SvmModel {
            kernel: KernelSpec::Gaussian { sigma: 1.0 },
            params: ModelParams::Gaussian {
                support: vec![],
                coeffs: vec![],
                bias: 0.0,
            },
            lambda: 0.1,
            dim: 1,
            seed: 0,
            platt: None,
            auc_estimate: None,
            feature_fingerprint: "t".into(),
        };
        assert!(matches!(
            top_features(&model, &vocab, 5),
            Err(ExperimentError::NotLinear)
        ));
    }

    #[test]
    fn top_features_flags_venue_terms() {
        let vocab = vocab_of(&["acm", "zzz"]);
        let mut weights = vec![0.0; 2];
        weights[vocab.column("acm").unwrap()] = 3.0;
        let report = top_features(&linear_model(weights), &vocab, 1).unwrap();
        assert_eq!(report.venue_flags, vec!["acm".to_string()]);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = PipelineConfig::default();
        let mut b = PipelineConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
