//! Binary SVM training and scoring.
//!
//! Both kernels are trained by the same SMO-style solver on the dual of
//! the hinge-loss objective: minimize (1/n) Σ max(0, 1 − y(w·x+b)) + λ‖w‖².
//! The dual box bound is C = 1/(2nλ), which makes the averaged-loss form
//! and the standard C-form coincide. The solver picks the maximal
//! violating pair each step, so iteration order is deterministic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    Linear,
    /// exp(−‖x − x'‖² / (2σ²))
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn eval(&self, a: &SparseVector, b: &SparseVector) -> f64 {
        match *self {
            KernelSpec::Linear => a.dot(b),
            KernelSpec::Gaussian { sigma } => {
                (-a.squared_distance(b) / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ModelParams {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Gaussian {
        support: Vec<SparseVector>,
        /// α_i·y_i per support vector.
        coeffs: Vec<f64>,
        bias: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub params: ModelParams,
    pub lambda: f64,
    pub dim: usize,
    pub seed: u64,
    /// Platt sigmoid (A, B): P(High|f) = 1 / (1 + exp(A·f + B)).
    pub platt: Option<(f64, f64)>,
    /// Training-time AUC from out-of-fold predictions; the a_i consumed
    /// by the fusion stage.
    pub auc_estimate: Option<f64>,
    /// Fingerprint of the feature space the model was trained against.
    pub feature_fingerprint: String,
}

/// Calibrated class posteriors plus the raw margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbOutput {
    pub p_high: f64,
    pub p_low: f64,
    pub decision: f64,
}

impl ProbOutput {
    /// The larger of the two class posteriors.
    pub fn max_p(&self) -> f64 {
        self.p_high.max(self.p_low)
    }

    /// Predicted label; the 0.5/0.5 tie resolves to High.
    pub fn is_high(&self) -> bool {
        self.p_high >= self.p_low
    }
}

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("training set is empty")]
    Empty,
    #[error("non-finite feature value in example {0}")]
    NonFinite(usize),
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("feature dimension mismatch: model {model}, input {input}")]
    DimMismatch { model: usize, input: usize },
    #[error("model is not calibrated; fit Platt scaling first")]
    Uncalibrated,
    #[error("labels and examples have different lengths")]
    LengthMismatch,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainParams {
    pub lambda: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            lambda: 0.0, // resolved per call: lambda = 1/(2n) gives C = 1
            tol: 1e-4,
            max_iters: 200_000,
            seed: 0,
        }
    }
}

/// Internal SMO state; exposed to tests via [`smo_solve`].
pub struct SmoResult {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Dual objective value trace, one entry per iteration (for the
    /// monotonicity property).
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

const TAU: f64 = 1e-12;

/// Solves the C-form dual with an SMO maximal-violating-pair loop.
/// `y` entries are ±1. Returns alphas, bias, and the dual-objective trace.
pub fn smo_solve(
    kernel_matrix: &dyn Fn(usize, usize) -> f64,
    y: &[f64],
    c: f64,
    tol: f64,
    max_iters: usize,
) -> SmoResult {
    let n = y.len();
    let mut alpha = vec![0.0f64; n];
    // gradient of 1/2 a'Qa - e'a, Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0f64; n];
    let mut trace = Vec::new();
    let mut iters = 0;

    loop {
        // maximal violating pair
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = usize::MAX;
        let mut big_m_val = f64::INFINITY;
        let mut big_m_idx = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_up && v > m_val {
                m_val = v;
                m_idx = t;
            }
            if in_low && v < big_m_val {
                big_m_val = v;
                big_m_idx = t;
            }
        }
        if m_idx == usize::MAX || big_m_idx == usize::MAX || m_val - big_m_val < tol {
            break;
        }
        if iters >= max_iters {
            break;
        }
        iters += 1;

        let (i, j) = (m_idx, big_m_idx);
        let kii = kernel_matrix(i, i);
        let kjj = kernel_matrix(j, j);
        let kij = kernel_matrix(i, j);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);

        if y[i] != y[j] {
            // Q_ii + Q_jj + 2Q_ij with Q_ij = y_i y_j K_ij = -K_ij here
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else {
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            }
        } else {
            let quad = (kii + kjj - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let (d_ai, d_aj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            let q_ti = y[t] * y[i] * kernel_matrix(t, i);
            let q_tj = y[t] * y[j] * kernel_matrix(t, j);
            grad[t] += q_ti * d_ai + q_tj * d_aj;
        }
        // dual objective = (a.G - sum(a)) / 2
        let obj: f64 = alpha
            .iter()
            .zip(&grad)
            .map(|(&a, &g)| a * g - a)
            .sum::<f64>()
            / 2.0;
        trace.push(obj);
    }

    // bias: average -y G over free vectors, else midpoint of the bounds
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..n {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += v;
            free_count += 1;
        } else {
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            if in_up {
                lb = lb.max(v);
            } else {
                ub = ub.min(v);
            }
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else if lb.is_finite() && ub.is_finite() {
        (lb + ub) / 2.0
    } else if lb.is_finite() {
        lb
    } else {
        ub
    };

    SmoResult {
        alpha,
        bias,
        objective_trace: trace,
        iterations: iters,
    }
}

fn check_inputs(x: &[SparseVector], labels: &[bool]) -> Result<(), SvmError> {
    if x.is_empty() {
        return Err(SvmError::Empty);
    }
    if x.len() != labels.len() {
        return Err(SvmError::LengthMismatch);
    }
    if !labels.iter().any(|&l| l) || !labels.iter().any(|&l| !l) {
        return Err(SvmError::SingleClass);
    }
    for (i, v) in x.iter().enumerate() {
        if v.entries().iter().any(|&(_, w)| !w.is_finite()) {
            return Err(SvmError::NonFinite(i));
        }
    }
    Ok(())
}

fn train_kernel_svm(
    x: &[SparseVector],
    labels: &[bool],
    kernel: KernelSpec,
    params: &TrainParams,
    fingerprint: &str,
) -> Result<SvmModel, SvmError> {
    check_inputs(x, labels)?;
    let n = x.len();
    let lambda = if params.lambda > 0.0 {
        params.lambda
    } else {
        1.0 / (2.0 * n as f64) // C = 1
    };
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(SvmError::BadLambda(lambda));
    }
    if let KernelSpec::Gaussian { sigma } = kernel {
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(SvmError::BadSigma(sigma));
        }
    }
    let c = 1.0 / (2.0 * n as f64 * lambda);
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();

    // full kernel matrix; fine at artifact scale (n in the low thousands)
    let mut k = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&x[i], &x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let result = smo_solve(&|i, j| k[i * n + j], &y, c, params.tol, params.max_iters);

    let dim = x[0].dim();
    let model_params = match kernel {
        KernelSpec::Linear => {
            let mut w = vec![0.0f64; dim];
            for i in 0..n {
                let coef = result.alpha[i] * y[i];
                if coef != 0.0 {
                    for &(col, val) in x[i].entries() {
                        w[col] += coef * val;
                    }
                }
            }
            ModelParams::Linear {
                weights: w,
                bias: result.bias,
            }
        }
        KernelSpec::Gaussian { .. } => {
            let mut support = Vec::new();
            let mut coeffs = Vec::new();
            for i in 0..n {
                if result.alpha[i] > 0.0 {
                    support.push(x[i].clone());
                    coeffs.push(result.alpha[i] * y[i]);
                }
            }
            ModelParams::Gaussian {
                support,
                coeffs,
                bias: result.bias,
            }
        }
    };
    Ok(SvmModel {
        kernel,
        params: model_params,
        lambda,
        dim,
        seed: params.seed,
        platt: None,
        auc_estimate: None,
        feature_fingerprint: fingerprint.to_string(),
    })
}

/// Linear-kernel SVM for the text features.
pub fn train_linear_svm(
    x: &[SparseVector],
    labels: &[bool],
    params: &TrainParams,
    fingerprint: &str,
) -> Result<SvmModel, SvmError> {
    train_kernel_svm(x, labels, KernelSpec::Linear, params, fingerprint)
}

/// Gaussian-kernel SVM for the visual features.
pub fn train_rbf_svm(
    x: &[SparseVector],
    labels: &[bool],
    sigma: f64,
    params: &TrainParams,
    fingerprint: &str,
) -> Result<SvmModel, SvmError> {
    train_kernel_svm(x, labels, KernelSpec::Gaussian { sigma }, params, fingerprint)
}

impl SvmModel {
    pub fn decision_value(&self, x: &SparseVector) -> Result<f64, SvmError> {
        if x.dim() != self.dim {
            return Err(SvmError::DimMismatch {
                model: self.dim,
                input: x.dim(),
            });
        }
        Ok(match &self.params {
            ModelParams::Linear { weights, bias } => {
                let mut f = *bias;
                for &(col, val) in x.entries() {
                    f += weights[col] * val;
                }
                f
            }
            ModelParams::Gaussian {
                support,
                coeffs,
                bias,
            } => {
                let mut f = *bias;
                for (sv, &coef) in support.iter().zip(coeffs) {
                    f += coef * self.kernel.eval(sv, x);
                }
                f
            }
        })
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Result<ProbOutput, SvmError> {
        let (a, b) = self.platt.ok_or(SvmError::Uncalibrated)?;
        let f = self.decision_value(x)?;
        Ok(prob_from_decision(f, a, b))
    }

    /// Linear weight vector; `None` for Gaussian models.
    pub fn linear_weights(&self) -> Option<(&[f64], f64)> {
        match &self.params {
            ModelParams::Linear { weights, bias } => Some((weights, *bias)),
            ModelParams::Gaussian { .. } => None,
        }
    }

    /// Primal objective (1/n) Σ hinge + λ‖w‖² of a linear model on a
    /// training set.
    pub fn linear_primal_objective(&self, x: &[SparseVector], labels: &[bool]) -> Option<f64> {
        let (w, _) = self.linear_weights()?;
        let n = x.len() as f64;
        let mut hinge = 0.0;
        for (xi, &l) in x.iter().zip(labels) {
            let y = if l { 1.0 } else { -1.0 };
            let f = self.decision_value(xi).ok()?;
            hinge += (1.0 - y * f).max(0.0);
        }
        let wn2: f64 = w.iter().map(|v| v * v).sum();
        Some(hinge / n + self.lambda * wn2)
    }
}

/// Applies the Platt sigmoid to a raw margin.
pub fn prob_from_decision(f: f64, a: f64, b: f64) -> ProbOutput {
    let z = a * f + b;
    // numerically stable sigmoid
    let p_high = if z >= 0.0 {
        (-z).exp() / (1.0 + (-z).exp())
    } else {
        1.0 / (1.0 + z.exp())
    };
    let p_high = p_high.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
    ProbOutput {
        p_high,
        p_low: 1.0 - p_high,
        decision: f,
    }
}

/// Fits the Platt sigmoid P(High|f) = 1/(1+exp(A·f+B)) by regularized
/// maximum likelihood with damped Newton steps, using the smoothed
/// targets t+ = (N+ + 1)/(N+ + 2), t− = 1/(N− + 2).
pub fn fit_platt(decision_values: &[f64], labels: &[bool]) -> Result<(f64, f64), SvmError> {
    if decision_values.len() != labels.len() {
        return Err(SvmError::LengthMismatch);
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(SvmError::SingleClass);
    }
    let hi = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let lo = 1.0 / (n_neg as f64 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    let max_iter = 100;
    let min_step = 1e-10;
    let sigma = 1e-12;

    let mut a = 0.0f64;
    let mut b = ((n_neg as f64 + 1.0) / (n_pos as f64 + 1.0)).ln();

    let fval = |a: f64, b: f64| -> f64 {
        decision_values
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let z = a * f + b;
                if z >= 0.0 {
                    t * z + (1.0 + (-z).exp()).ln()
                } else {
                    (t - 1.0) * z + (1.0 + z.exp()).ln()
                }
            })
            .sum()
    };
    let mut fv = fval(a, b);

    for _ in 0..max_iter {
        // gradient and Hessian
        let (mut h11, mut h22, mut h21) = (sigma, sigma, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&f, &t) in decision_values.iter().zip(&targets) {
            let z = a * f + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        let mut stepped = false;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = fval(na, nb);
            if nf < fv + 1e-4 * step * gd {
                a = na;
                b = nb;
                fv = nf;
                stepped = true;
                break;
            }
            step /= 2.0;
        }
        if !stepped {
            break;
        }
    }
    Ok((a, b))
}

/// Trains a model on the full set and calibrates it with 3-fold
/// out-of-fold decision values, so the sigmoid never sees in-fold
/// margins. Folds are stratified by label and deterministic for a seed.
pub fn train_calibrated(
    x: &[SparseVector],
    labels: &[bool],
    kernel: KernelSpec,
    params: &TrainParams,
    fingerprint: &str,
) -> Result<SvmModel, SvmError> {
    check_inputs(x, labels)?;
    let folds = stratified_folds(labels, 3, params.seed);
    let mut oof = vec![f64::NAN; x.len()];
    for fold in 0..3 {
        let train_idx: Vec<usize> = (0..x.len()).filter(|i| folds[*i] != fold).collect();
        let test_idx: Vec<usize> = (0..x.len()).filter(|i| folds[*i] == fold).collect();
        let xt: Vec<SparseVector> = train_idx.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
        // a fold can end up single-class on tiny inputs; fall back to the
        // full-data margins for those points
        match train_kernel_svm(&xt, &yt, kernel, params, fingerprint) {
            Ok(m) => {
                for &i in &test_idx {
                    oof[i] = m.decision_value(&x[i])?;
                }
            }
            Err(SvmError::SingleClass) => {}
            Err(e) => return Err(e),
        }
    }
    let mut model = train_kernel_svm(x, labels, kernel, params, fingerprint)?;
    let mut cal_scores = Vec::new();
    let mut cal_labels = Vec::new();
    for i in 0..x.len() {
        let s = if oof[i].is_nan() {
            model.decision_value(&x[i])?
        } else {
            oof[i]
        };
        cal_scores.push(s);
        cal_labels.push(labels[i]);
    }
    model.platt = Some(fit_platt(&cal_scores, &cal_labels)?);
    if let Ok(curve) = crate::roc::roc_auc(&cal_scores, &cal_labels) {
        model.auc_estimate = Some(curve.auc);
    }
    Ok(model)
}

/// Deterministic stratified fold assignment; returns fold index per example.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut assignment = vec![0usize; labels.len()];
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
            seed ^ if class { 0x9e3779b97f4a7c15 } else { 0x517cc1b727220a95 },
        );
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    assignment
}

/// Median pairwise Euclidean distance over a seeded subsample of at most
/// 1000 vectors; the default σ for the Gaussian kernel.
pub fn median_pairwise_distance(x: &[SparseVector], seed: u64) -> f64 {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut idx: Vec<usize> = (0..x.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx.truncate(1000);
    idx.sort_unstable();
    let mut dists = Vec::new();
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            dists.push(x[i].squared_distance(&x[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = dists[dists.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(vals: &[f64]) -> SparseVector {
        SparseVector::from_dense(vals)
    }

    fn default_params() -> TrainParams {
        TrainParams {
            lambda: 0.01,
            tol: 1e-6,
            max_iters: 100_000,
            seed: 1,
        }
    }

    #[test]
    fn linear_symmetric_1d() {
        let x = vec![sv(&[-1.0]), sv(&[1.0])];
        let y = vec![false, true];
        let m = train_linear_svm(&x, &y, &default_params(), "t").unwrap();
        let f0 = m.decision_value(&sv(&[0.0])).unwrap();
        assert!(f0.abs() < 1e-6, "boundary at origin, got {f0}");
        assert!(m.decision_value(&sv(&[2.0])).unwrap() > 0.0);
        assert!(m.decision_value(&sv(&[-2.0])).unwrap() < 0.0);
    }

    #[test]
    fn duplicating_points_keeps_decision_function() {
        let x = vec![sv(&[-1.0, 0.5]), sv(&[1.0, -0.25]), sv(&[2.0, 1.0]), sv(&[-2.0, 0.0])];
        let y = vec![false, true, true, false];
        let m1 = train_linear_svm(&x, &y, &default_params(), "t").unwrap();
        let mut x2 = x.clone();
        x2.extend(x.iter().cloned());
        let mut y2 = y.clone();
        y2.extend(y.iter().cloned());
        let m2 = train_linear_svm(&x2, &y2, &default_params(), "t").unwrap();
        for probe in [sv(&[0.3, 0.3]), sv(&[-1.5, 0.2]), sv(&[1.2, -0.7])] {
            let f1 = m1.decision_value(&probe).unwrap();
            let f2 = m2.decision_value(&probe).unwrap();
            assert!((f1 - f2).abs() < 1e-3, "f1={f1} f2={f2}");
        }
    }

    #[test]
    fn gaussian_kernel_at_zero_distance_is_one() {
        let k = KernelSpec::Gaussian { sigma: 0.7 };
        let x = sv(&[0.3, -1.2]);
        assert!((k.eval(&x, &x) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_kernel_sigma_limit() {
        let k = KernelSpec::Gaussian { sigma: 1e6 };
        let a = sv(&[0.0, 0.0]);
        let b = sv(&[1.0, 1.0]);
        assert!(k.eval(&a, &b) >= 1.0 - 1e-6);
    }

    #[test]
    fn rbf_solves_xor() {
        let x = vec![sv(&[0.0, 0.0]), sv(&[1.0, 1.0]), sv(&[0.0, 1.0]), sv(&[1.0, 0.0])];
        let y = vec![false, false, true, true];
        let mut p = default_params();
        p.lambda = 1.0 / (2.0 * 4.0 * 10.0); // C = 10
        let m = train_rbf_svm(&x, &y, 0.5, &p, "t").unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            let f = m.decision_value(xi).unwrap();
            assert_eq!(f > 0.0, yi, "point misclassified, f={f}");
        }
    }

    #[test]
    fn linear_model_at_origin_returns_bias() {
        let x = vec![sv(&[-1.0, 2.0]), sv(&[1.0, 1.0]), sv(&[3.0, 0.0]), sv(&[-2.0, -1.0])];
        let y = vec![false, true, true, false];
        let m = train_linear_svm(&x, &y, &default_params(), "t").unwrap();
        let (_, b) = m.linear_weights().unwrap();
        let f = m.decision_value(&sv(&[0.0, 0.0])).unwrap();
        assert!((f - b).abs() < 1e-12);
    }

    #[test]
    fn free_support_vectors_sit_on_margin() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..30 {
            let cls = rng.gen_bool(0.5);
            let cx = if cls { 1.0 } else { -1.0 };
            x.push(sv(&[cx + rng.gen_range(-0.8..0.8), rng.gen_range(-1.0..1.0)]));
            y.push(cls);
        }
        let mut p = default_params();
        p.lambda = 1.0 / (2.0 * 30.0); // C = 1
        let m = train_rbf_svm(&x, &y, 1.0, &p, "t").unwrap();
        let c = 1.0 / (2.0 * 30.0 * p.lambda);
        // recover alphas from support coefficients
        if let ModelParams::Gaussian { support, coeffs, .. } = &m.params {
            for (svx, &coef) in support.iter().zip(coeffs) {
                let alpha = coef.abs();
                if alpha > 1e-8 && alpha < c - 1e-8 {
                    let f = m.decision_value(svx).unwrap();
                    let yv = coef.signum();
                    assert!((f - yv).abs() < 1e-3, "KKT margin violation: f={f}, y={yv}");
                }
            }
        } else {
            panic!("expected gaussian params");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![sv(&[0.0]), sv(&[1.0])];
        assert!(matches!(
            train_linear_svm(&x, &[true, true], &default_params(), "t"),
            Err(SvmError::SingleClass)
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let x = vec![sv(&[-1.0]), sv(&[1.0])];
        let m = train_linear_svm(&x, &[false, true], &default_params(), "t").unwrap();
        assert!(matches!(
            m.decision_value(&sv(&[1.0, 2.0])),
            Err(SvmError::DimMismatch { .. })
        ));
    }

    #[test]
    fn platt_orders_separated_scores() {
        let scores = [-1.0, -0.8, 0.9, 1.0];
        let labels = [false, false, true, true];
        let (a, b) = fit_platt(&scores, &labels).unwrap();
        let p_pos = prob_from_decision(1.0, a, b).p_high;
        let p_neg = prob_from_decision(-1.0, a, b).p_high;
        assert!(p_pos > 0.5, "P(High|+1)={p_pos}");
        assert!(p_neg < 0.5, "P(High|-1)={p_neg}");
        assert!(a < 0.0, "A should be negative for positively correlated scores");
    }

    #[test]
    fn platt_random_labels_predict_prior() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 1000;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let prior = labels.iter().filter(|&&l| l).count() as f64 / n as f64;
        let (a, b) = fit_platt(&scores, &labels).unwrap();
        for f in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let p = prob_from_decision(f, a, b).p_high;
            assert!((p - prior).abs() < 0.1, "P(High|{f})={p}, prior={prior}");
        }
    }

    #[test]
    fn platt_midpoint_gives_half() {
        let scores = [-1.0, -0.5, 0.5, 1.0];
        let labels = [false, false, true, true];
        let (a, b) = fit_platt(&scores, &labels).unwrap();
        let p = prob_from_decision(-b / a, a, b);
        assert!((p.p_high - 0.5).abs() < 1e-12);
        assert!((p.p_high + p.p_low - 1.0).abs() < 1e-12);
    }

    #[test]
    fn calibrated_training_sets_platt_and_auc() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..40 {
            let cls = rng.gen_bool(0.5);
            let cx = if cls { 1.5 } else { -1.5 };
            x.push(sv(&[cx + rng.gen_range(-1.0..1.0)]));
            y.push(cls);
        }
        let m = train_calibrated(&x, &y, KernelSpec::Linear, &default_params(), "t").unwrap();
        assert!(m.platt.is_some());
        let auc = m.auc_estimate.unwrap();
        assert!(auc > 0.8, "auc={auc}");
        let p = m.predict_proba(&sv(&[2.0])).unwrap();
        assert!(p.p_high > 0.5);
    }
}
