//! Bag-of-visual-words features: k-means vocabulary over SIFT
//! descriptors, nearest-centroid quantization, and per-dimension
//! standardization of the count vectors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kmeans;
use crate::sparse::SparseVector;

/// Clustering never sees more than this many descriptors; larger pools
/// are subsampled uniformly with the run seed.
pub const MAX_CLUSTER_DESCRIPTORS: usize = 500_000;

/// Fitted visual vocabulary: k centroids plus the standardizer computed
/// over training BoVW vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VisualVocabulary {
    pub centroids: Vec<Vec<f64>>,
    pub k: usize,
    pub feature_mean: Vec<f64>,
    pub feature_stdev: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum VisualError {
    #[error(transparent)]
    Kmeans(#[from] kmeans::KmeansError),
    #[error("standardizer needs at least 2 training vectors, got {0}")]
    TooFewVectors(usize),
    #[error("standardizer dimension mismatch: stats {stats}, vector {vector}")]
    DimMismatch { stats: usize, vector: usize },
    #[error("k selection needs a positive starting k")]
    BadStartK,
    #[error("k selection evaluator failed: {0}")]
    Evaluator(String),
}

/// Uniform random subsample of at most `max` descriptors, seeded.
/// Order is canonicalized by the caller (document id, then descriptor
/// index); the subsample preserves that order.
pub fn subsample_descriptors(
    descriptors: &[Vec<f64>],
    max: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    if descriptors.len() <= max {
        return descriptors.to_vec();
    }
    let mut idx: Vec<usize> = (0..descriptors.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx.truncate(max);
    idx.sort_unstable();
    idx.into_iter().map(|i| descriptors[i].clone()).collect()
}

/// Fits the k-means centroids on (a subsample of) the training
/// descriptors. Standardizer statistics are filled in separately once
/// training BoVW vectors exist.
pub fn fit_centroids(
    descriptors: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<Vec<Vec<f64>>, VisualError> {
    let pool = subsample_descriptors(descriptors, MAX_CLUSTER_DESCRIPTORS, seed);
    let (centroids, _) = kmeans::fit_kmeans(&pool, k, seed, max_iters, tol)?;
    Ok(centroids)
}

/// Quantizes descriptors against the centroids and counts occurrences.
/// Ties break to the lowest centroid index. No descriptors → zero vector.
pub fn bovw_vector(descriptors: &[Vec<f64>], centroids: &[Vec<f64>]) -> SparseVector {
    let k = centroids.len();
    let mut counts = vec![0u64; k];
    for d in descriptors {
        counts[kmeans::nearest_centroid(d, centroids)] += 1;
    }
    SparseVector::from_pairs(
        counts
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(i, c)| (i, c as f64)),
        k,
    )
}

/// Per-dimension mean and population standard deviation over training
/// vectors.
pub fn fit_standardizer(train_vectors: &[SparseVector]) -> Result<(Vec<f64>, Vec<f64>), VisualError> {
    if train_vectors.len() < 2 {
        return Err(VisualError::TooFewVectors(train_vectors.len()));
    }
    let dim = train_vectors[0].dim();
    let n = train_vectors.len() as f64;
    let mut mean = vec![0.0f64; dim];
    for v in train_vectors {
        for &(c, w) in v.entries() {
            mean[c] += w;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0f64; dim];
    for v in train_vectors {
        let dense = v.to_dense();
        for (c, &x) in dense.iter().enumerate() {
            var[c] += (x - mean[c]) * (x - mean[c]);
        }
    }
    let stdev: Vec<f64> = var.iter().map(|&s| (s / n).sqrt()).collect();
    Ok((mean, stdev))
}

/// (x − mean)/stdev per dimension; zero-variance dimensions pass through
/// with the mean removed only.
pub fn apply_standardizer(
    vector: &SparseVector,
    mean: &[f64],
    stdev: &[f64],
) -> Result<SparseVector, VisualError> {
    if vector.dim() != mean.len() || mean.len() != stdev.len() {
        return Err(VisualError::DimMismatch {
            stats: mean.len(),
            vector: vector.dim(),
        });
    }
    let dense = vector.to_dense();
    let out: Vec<f64> = dense
        .iter()
        .enumerate()
        .map(|(c, &x)| {
            let centered = x - mean[c];
            if stdev[c] > 0.0 {
                centered / stdev[c]
            } else {
                centered
            }
        })
        .collect();
    Ok(SparseVector::from_dense(&out))
}

impl VisualVocabulary {
    pub fn standardized_bovw(&self, descriptors: &[Vec<f64>]) -> Result<SparseVector, VisualError> {
        let counts = bovw_vector(descriptors, &self.centroids);
        apply_standardizer(&counts, &self.feature_mean, &self.feature_stdev)
    }

    /// Stable content hash used as the feature-space fingerprint.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.k as u64).to_le_bytes());
        for c in &self.centroids {
            for &v in c {
                h.update(v.to_le_bytes());
            }
        }
        for &v in self.feature_mean.iter().chain(&self.feature_stdev) {
            h.update(v.to_le_bytes());
        }
        let d = h.finalize();
        d.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Maximum number of geometric steps `select_k` will try.
pub const SELECT_K_MAX_STEPS: usize = 6;

/// Grows k geometrically (k0, 3k0, 9k0, …), evaluating dev AUC at each
/// step, and stops at the first k whose AUC drops below its
/// predecessor's, returning the predecessor. A monotone sequence returns
/// the largest k tried (capped at [`SELECT_K_MAX_STEPS`] steps or when k
/// would exceed `max_k`).
pub fn select_k<F>(k0: usize, max_k: usize, mut dev_evaluator: F) -> Result<usize, VisualError>
where
    F: FnMut(usize) -> Result<f64, String>,
{
    if k0 == 0 {
        return Err(VisualError::BadStartK);
    }
    let mut prev_k = k0;
    let mut prev_auc = dev_evaluator(k0).map_err(VisualError::Evaluator)?;
    for _ in 1..SELECT_K_MAX_STEPS {
        let k = prev_k * 3;
        if k > max_k {
            break;
        }
        let auc = dev_evaluator(k).map_err(VisualError::Evaluator)?;
        if auc < prev_auc {
            return Ok(prev_k);
        }
        prev_k = k;
        prev_auc = auc;
    }
    Ok(prev_k)
}
