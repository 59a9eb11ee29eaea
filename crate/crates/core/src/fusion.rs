//! Fusion of the calibrated text and visual classifiers: a stacked linear
//! meta-classifier over AUC-scaled posteriors, and a nonlinear selector
//! that picks one base classifier by AUC-weighted confidence with a text
//! bias γ.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::roc;
use crate::sparse::SparseVector;
use crate::svm::{self, KernelSpec, ProbOutput, SvmModel, TrainParams};

/// Meta-classifier input: (text_high, text_low, vis_high, vis_low), each
/// pair scaled by the square root of its classifier's AUC.
pub type MetaInput = [f64; 4];

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FusionConfig {
    pub gamma: f64,
    pub auc_text: f64,
    pub auc_vis: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    Text,
    Visual,
}

#[derive(Debug, Error)]
pub enum FusionError {
    #[error(transparent)]
    Svm(#[from] svm::SvmError),
    #[error("fold {0} contains a single class; use fewer folds or more data")]
    SingleClassFold(usize),
    #[error("gamma grid is empty")]
    EmptyGrid,
    #[error("AUC estimate must be in [0,1], got {0}")]
    BadAuc(f64),
}

/// Concatenated class confidences scaled by √AUC; order fixed as
/// (text_high, text_low, vis_high, vis_low).
pub fn meta_features(text: &ProbOutput, a_text: f64, vis: &ProbOutput, a_vis: f64) -> MetaInput {
    let st = a_text.sqrt();
    let sv = a_vis.sqrt();
    [
        text.p_high * st,
        text.p_low * st,
        vis.p_high * sv,
        vis.p_low * sv,
    ]
}

/// Selector: s_text = max(p)·√a_text + γ vs s_vis = max(p)·√a_vis; the
/// winner's argmax label is emitted, ties going to the text classifier.
pub fn nonlinear_select(
    text: &ProbOutput,
    vis: &ProbOutput,
    cfg: &FusionConfig,
) -> (Label, Winner) {
    let s_text = text.max_p() * cfg.auc_text.sqrt() + cfg.gamma;
    let s_vis = vis.max_p() * cfg.auc_vis.sqrt();
    if s_text >= s_vis {
        (
            if text.is_high() { Label::High } else { Label::Low },
            Winner::Text,
        )
    } else {
        (
            if vis.is_high() { Label::High } else { Label::Low },
            Winner::Visual,
        )
    }
}

/// One dev document's base outputs plus its true label.
#[derive(Debug, Clone, Copy)]
pub struct DevOutput {
    pub text: ProbOutput,
    pub vis: ProbOutput,
    pub label: Label,
}

/// Evaluates selector accuracy on the dev outputs for each grid value and
/// returns the argmax; ties resolve to the smaller γ.
pub fn sweep_gamma(
    dev_outputs: &[DevOutput],
    auc_text: f64,
    auc_vis: f64,
    grid: &[f64],
) -> Result<f64, FusionError> {
    if grid.is_empty() {
        return Err(FusionError::EmptyGrid);
    }
    let mut best_gamma = grid[0];
    let mut best_acc = -1.0f64;
    for &gamma in grid {
        let cfg = FusionConfig {
            gamma,
            auc_text,
            auc_vis,
        };
        let correct = dev_outputs
            .iter()
            .filter(|d| nonlinear_select(&d.text, &d.vis, &cfg).0 == d.label)
            .count();
        let acc = correct as f64 / dev_outputs.len().max(1) as f64;
        if acc > best_acc {
            best_acc = acc;
            best_gamma = gamma;
        }
    }
    Ok(best_gamma)
}

/// Standard search grid for γ: 0, 0.05, …, 0.30.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=6).map(|i| i as f64 * 0.05).collect()
}

/// Out-of-fold posterior predictions. Base classifiers are retrained per
/// fold, so no document's prediction comes from a model that saw it.
/// Returns the per-document probabilities and the fold assignment.
pub fn out_of_fold_probs(
    x: &[SparseVector],
    labels: &[bool],
    kernel: KernelSpec,
    params: &TrainParams,
    folds: usize,
    fingerprint: &str,
) -> Result<(Vec<ProbOutput>, Vec<usize>), FusionError> {
    let assignment = svm::stratified_folds(labels, folds, params.seed);
    let mut probs = vec![None; x.len()];
    for fold in 0..folds {
        let train_idx: Vec<usize> = (0..x.len()).filter(|&i| assignment[i] != fold).collect();
        let test_idx: Vec<usize> = (0..x.len()).filter(|&i| assignment[i] == fold).collect();
        if test_idx.is_empty() {
            continue;
        }
        let xt: Vec<SparseVector> = train_idx.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
        if !yt.iter().any(|&l| l) || !yt.iter().any(|&l| !l) {
            return Err(FusionError::SingleClassFold(fold));
        }
        let model = svm::train_calibrated(&xt, &yt, kernel, params, fingerprint)?;
        for &i in &test_idx {
            probs[i] = Some(model.predict_proba(&x[i])?);
        }
    }
    Ok((
        probs.into_iter().map(|p| p.expect("fold covered")).collect(),
        assignment,
    ))
}

/// The trained fusion stack: final base classifiers, their out-of-fold
/// AUC estimates, and the meta SVM over scaled posteriors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaModel {
    pub text_model: SvmModel,
    pub vis_model: SvmModel,
    pub auc_text: f64,
    pub auc_vis: f64,
    pub meta_svm: SvmModel,
}

impl MetaModel {
    pub fn predict_proba(
        &self,
        text_x: &SparseVector,
        vis_x: &SparseVector,
    ) -> Result<ProbOutput, FusionError> {
        let tp = self.text_model.predict_proba(text_x)?;
        let vp = self.vis_model.predict_proba(vis_x)?;
        let m = meta_features(&tp, self.auc_text, &vp, self.auc_vis);
        Ok(self.meta_svm.predict_proba(&SparseVector::from_dense(&m))?)
    }

    /// Base-classifier outputs for one document, for the selector path.
    pub fn base_probs(
        &self,
        text_x: &SparseVector,
        vis_x: &SparseVector,
    ) -> Result<(ProbOutput, ProbOutput), FusionError> {
        Ok((
            self.text_model.predict_proba(text_x)?,
            self.vis_model.predict_proba(vis_x)?,
        ))
    }
}

/// Trains the full fusion stack on the training split:
/// out-of-fold posteriors for both base pipelines, AUC estimates from
/// those posteriors, a calibrated linear meta-SVM on the scaled
/// concatenations, and final base classifiers retrained on everything.
pub fn train_meta(
    text_x: &[SparseVector],
    vis_x: &[SparseVector],
    labels: &[bool],
    text_kernel: KernelSpec,
    vis_kernel: KernelSpec,
    params: &TrainParams,
    folds: usize,
    text_fingerprint: &str,
    vis_fingerprint: &str,
) -> Result<MetaModel, FusionError> {
    let (text_oof, _) =
        out_of_fold_probs(text_x, labels, text_kernel, params, folds, text_fingerprint)?;
    let (vis_oof, _) =
        out_of_fold_probs(vis_x, labels, vis_kernel, params, folds, vis_fingerprint)?;

    let text_scores: Vec<f64> = text_oof.iter().map(|p| p.p_high).collect();
    let vis_scores: Vec<f64> = vis_oof.iter().map(|p| p.p_high).collect();
    let auc_text = roc::roc_auc(&text_scores, labels)
        .map(|c| c.auc)
        .unwrap_or(0.5);
    let auc_vis = roc::roc_auc(&vis_scores, labels)
        .map(|c| c.auc)
        .unwrap_or(0.5);

    let meta_inputs: Vec<SparseVector> = text_oof
        .iter()
        .zip(&vis_oof)
        .map(|(t, v)| SparseVector::from_dense(&meta_features(t, auc_text, v, auc_vis)))
        .collect();
    let meta_fingerprint = format!("meta:{text_fingerprint}:{vis_fingerprint}");
    let meta_svm = svm::train_calibrated(
        &meta_inputs,
        labels,
        KernelSpec::Linear,
        params,
        &meta_fingerprint,
    )?;

    let mut text_model =
        svm::train_calibrated(text_x, labels, text_kernel, params, text_fingerprint)?;
    let mut vis_model = svm::train_calibrated(vis_x, labels, vis_kernel, params, vis_fingerprint)?;
    // the fusion-facing AUC estimates come from the out-of-fold scores
    text_model.auc_estimate = Some(auc_text);
    vis_model.auc_estimate = Some(auc_vis);

    Ok(MetaModel {
        text_model,
        vis_model,
        auc_text,
        auc_vis,
        meta_svm,
    })
}
