//! Predicts whether an academic paper will be high-impact (>10 citations)
//! or low-impact (0 citations) from its full text and the visual appearance
//! of its rendered pages.
//!
//! The pipeline: ingest a corpus manifest, build TF-IDF text vectors and
//! bag-of-visual-words vectors (SIFT descriptors quantized against a k-means
//! vocabulary), train calibrated SVMs on each feature space, and fuse them
//! with a stacked meta-classifier or a confidence-based selector. Evaluation
//! runs an intra-/inter-domain matrix and reports ROC curves and AUC.

pub mod corpus;
pub mod fusion;
pub mod imageprep;
pub mod kmeans;
pub mod model_io;
pub mod parallel;
pub mod report;
pub mod roc;
pub mod sift;
pub mod sparse;
pub mod svm;
pub mod synthetic;
pub mod text;
pub mod visual;

pub mod experiment;

pub use corpus::{CorpusManifest, DocumentRecord, Label, Split, SplitAssignment};
pub use roc::RocCurve;
pub use sparse::SparseVector;
pub use svm::{KernelSpec, ProbOutput, SvmModel};
pub use text::Vocabulary;
pub use visual::VisualVocabulary;

/// Toolkit version embedded in every output artifact.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
