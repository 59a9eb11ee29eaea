//! Report artifacts: line-delimited machine-readable records, plain-text
//! ROC tables, and an SVG plot of the ROC curves.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{ClassifierEval, EvalReport};
use crate::roc::RocCurve;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed report line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// One line of the machine-readable report file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ReportLine {
    Run {
        train_domain: String,
        test_domain: String,
        nonlinear_accuracy: f64,
        selector_gamma: f64,
        k: usize,
        auc_text_train: f64,
        auc_vis_train: f64,
        n_train: usize,
        n_dev: usize,
        n_test: usize,
        seed: u64,
        config_hash: String,
        toolkit_version: String,
    },
    Classifier {
        name: String,
        auc: f64,
        curve: RocCurve,
    },
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    let mut f = std::fs::File::create(path).map_err(|source| ReportError::Write {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(contents.as_bytes())
        .map_err(|source| ReportError::Write {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes `report.jsonl`, one `roc_<classifier>.csv` per classifier, and
/// `roc.svg`. Returns the created paths.
pub fn emit_report(report: &EvalReport, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut created = Vec::new();

    // machine-readable report
    let mut lines = Vec::new();
    lines.push(
        serde_json::to_string(&ReportLine::Run {
            train_domain: report.train_domain.clone(),
            test_domain: report.test_domain.clone(),
            nonlinear_accuracy: report.nonlinear_accuracy,
            selector_gamma: report.selector_gamma,
            k: report.k,
            auc_text_train: report.auc_text_train,
            auc_vis_train: report.auc_vis_train,
            n_train: report.n_train,
            n_dev: report.n_dev,
            n_test: report.n_test,
            seed: report.seed,
            config_hash: report.config_hash.clone(),
            toolkit_version: report.toolkit_version.clone(),
        })
        .expect("serializable"),
    );
    for (name, eval) in &report.classifiers {
        lines.push(
            serde_json::to_string(&ReportLine::Classifier {
                name: name.clone(),
                auc: eval.auc,
                curve: eval.curve.clone(),
            })
            .expect("serializable"),
        );
    }
    let jsonl = out_dir.join("report.jsonl");
    write_file(&jsonl, &(lines.join("\n") + "\n"))?;
    created.push(jsonl);

    // ROC tables
    for (name, eval) in &report.classifiers {
        let mut csv = String::from("fpr,tpr,threshold\n");
        for p in &eval.curve.points {
            csv.push_str(&format!("{},{},{}\n", p.fpr, p.tpr, p.threshold));
        }
        let path = out_dir.join(format!("roc_{name}.csv"));
        write_file(&path, &csv)?;
        created.push(path);
    }

    // SVG plot
    let svg = out_dir.join("roc.svg");
    write_file(&svg, &render_roc_svg(report))?;
    created.push(svg);
    Ok(created)
}

/// Reloads a `report.jsonl` file into an [`EvalReport`].
pub fn load_report(path: &Path) -> Result<EvalReport, ReportError> {
    let contents = std::fs::read_to_string(path).map_err(|source| ReportError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut run: Option<EvalReport> = None;
    let mut classifiers = std::collections::BTreeMap::new();
    for (idx, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ReportLine =
            serde_json::from_str(line).map_err(|e| ReportError::Malformed {
                line: idx + 1,
                message: e.to_string(),
            })?;
        match parsed {
            ReportLine::Run {
                train_domain,
                test_domain,
                nonlinear_accuracy,
                selector_gamma,
                k,
                auc_text_train,
                auc_vis_train,
                n_train,
                n_dev,
                n_test,
                seed,
                config_hash,
                toolkit_version,
            } => {
                run = Some(EvalReport {
                    train_domain,
                    test_domain,
                    classifiers: Default::default(),
                    nonlinear_accuracy,
                    selector_gamma,
                    k,
                    auc_text_train,
                    auc_vis_train,
                    n_train,
                    n_dev,
                    n_test,
                    seed,
                    config_hash,
                    toolkit_version,
                });
            }
            ReportLine::Classifier { name, auc, curve } => {
                classifiers.insert(name, ClassifierEval { auc, curve });
            }
        }
    }
    let mut report = run.ok_or(ReportError::Malformed {
        line: 0,
        message: "missing run record".into(),
    })?;
    report.classifiers = classifiers;
    Ok(report)
}

const PLOT_COLORS: [(&str, &str); 4] = [
    ("text", "#1f77b4"),
    ("visual", "#d62728"),
    ("meta", "#2ca02c"),
    ("nonlinear", "#9467bd"),
];

fn render_roc_svg(report: &EvalReport) -> String {
    let (w, h) = (560.0, 480.0);
    let (ml, mr, mt, mb) = (60.0, 150.0, 40.0, 50.0);
    let px = |fpr: f64| ml + fpr * (w - ml - mr);
    let py = |tpr: f64| h - mb - tpr * (h - mt - mb);

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str(&format!(
        "<title>ROC: train {} / test {}</title>\n",
        xml_escape(&report.train_domain),
        xml_escape(&report.test_domain)
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    // axes
    s.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        px(0.0),
        py(0.0),
        px(1.0),
        py(0.0)
    ));
    s.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        px(0.0),
        py(0.0),
        px(0.0),
        py(1.0)
    ));
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{v}</text>\n",
            px(v),
            py(0.0) + 16.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{v}</text>\n",
            px(0.0) - 6.0,
            py(v) + 4.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">false positive rate</text>\n",
        px(0.5),
        h - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">true positive rate</text>\n",
        py(0.5),
        py(0.5)
    ));
    // chance diagonal
    s.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" stroke-dasharray=\"4 4\"/>\n",
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    ));

    let mut legend_y = mt + 10.0;
    for (name, color) in PLOT_COLORS {
        let Some(eval) = report.classifiers.get(name) else {
            continue;
        };
        let pts: Vec<String> = eval
            .curve
            .points
            .iter()
            .map(|p| format!("{},{}", px(p.fpr), py(p.tpr)))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{legend_y}\" x2=\"{1}\" y2=\"{legend_y}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            w - mr + 10.0,
            w - mr + 34.0
        ));
        let note = if name == "nonlinear" {
            " (not headline)"
        } else {
            ""
        };
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{name} AUC {:.3}{note}</text>\n",
            w - mr + 40.0,
            legend_y + 4.0,
            eval.auc
        ));
        legend_y += 18.0;
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
