//! Textual model files. Floats are written with 17 significant decimal
//! digits, which round-trips every finite f64 exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fusion::MetaModel;
use crate::sparse::SparseVector;
use crate::svm::{KernelSpec, ModelParams, SvmModel};

pub const MODEL_MAGIC: &str = "IMPACT-MODEL v1";
pub const FUSION_MAGIC: &str = "IMPACT-FUSION v1";

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str), ModelIoError> {
        for (i, line) in self.iter.by_ref() {
            if !line.trim().is_empty() {
                return Ok((i + 1, line.trim_end()));
            }
        }
        Err(ModelIoError::Parse {
            line: 0,
            message: "unexpected end of file".into(),
        })
    }

    fn expect(&mut self, key: &str) -> Result<(usize, &'a str), ModelIoError> {
        let (n, line) = self.next()?;
        match line.strip_prefix(key) {
            Some(rest) if rest.is_empty() || rest.starts_with(' ') => Ok((n, rest.trim_start())),
            _ => Err(ModelIoError::Parse {
                line: n,
                message: format!("expected {key:?}, found {line:?}"),
            }),
        }
    }
}

fn parse_f64(n: usize, s: &str) -> Result<f64, ModelIoError> {
    s.parse().map_err(|_| ModelIoError::Parse {
        line: n,
        message: format!("bad float {s:?}"),
    })
}

fn parse_usize(n: usize, s: &str) -> Result<usize, ModelIoError> {
    s.parse().map_err(|_| ModelIoError::Parse {
        line: n,
        message: format!("bad integer {s:?}"),
    })
}

fn write_model_body(out: &mut String, model: &SvmModel) {
    out.push_str(MODEL_MAGIC);
    out.push('\n');
    match model.kernel {
        KernelSpec::Linear => out.push_str("kernel linear\n"),
        KernelSpec::Gaussian { sigma } => {
            let _ = writeln!(out, "kernel gaussian {}", fmt_f64(sigma));
        }
    }
    let _ = writeln!(out, "lambda {}", fmt_f64(model.lambda));
    let _ = writeln!(out, "dim {}", model.dim);
    let _ = writeln!(out, "seed {}", model.seed);
    let _ = writeln!(out, "fingerprint {}", model.feature_fingerprint);
    if let Some((a, b)) = model.platt {
        let _ = writeln!(out, "platt {} {}", fmt_f64(a), fmt_f64(b));
    }
    if let Some(auc) = model.auc_estimate {
        let _ = writeln!(out, "auc_estimate {}", fmt_f64(auc));
    }
    match &model.params {
        ModelParams::Linear { weights, bias } => {
            let nnz = weights.iter().filter(|&&w| w != 0.0).count();
            let _ = writeln!(out, "weights {nnz}");
            for (col, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    let _ = writeln!(out, "w {col} {}", fmt_f64(w));
                }
            }
            let _ = writeln!(out, "bias {}", fmt_f64(*bias));
        }
        ModelParams::Gaussian {
            support,
            coeffs,
            bias,
        } => {
            let _ = writeln!(out, "support {}", support.len());
            for (sv, &c) in support.iter().zip(coeffs) {
                let _ = write!(out, "sv {} {}", fmt_f64(c), sv.dim());
                for &(col, val) in sv.entries() {
                    let _ = write!(out, " {col}:{}", fmt_f64(val));
                }
                out.push('\n');
            }
            let _ = writeln!(out, "bias {}", fmt_f64(*bias));
        }
    }
    out.push_str("end\n");
}

fn read_model_body(lines: &mut Lines) -> Result<SvmModel, ModelIoError> {
    let (n, magic) = lines.next()?;
    if magic != MODEL_MAGIC {
        return Err(ModelIoError::Parse {
            line: n,
            message: format!("expected {MODEL_MAGIC:?}, found {magic:?}"),
        });
    }
    let (n, kernel_line) = lines.expect("kernel")?;
    let kernel = match kernel_line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["linear"] => KernelSpec::Linear,
        ["gaussian", sigma] => KernelSpec::Gaussian {
            sigma: parse_f64(n, sigma)?,
        },
        _ => {
            return Err(ModelIoError::Parse {
                line: n,
                message: format!("bad kernel {kernel_line:?}"),
            })
        }
    };
    let (n, v) = lines.expect("lambda")?;
    let lambda = parse_f64(n, v)?;
    let (n, v) = lines.expect("dim")?;
    let dim = parse_usize(n, v)?;
    let (n, v) = lines.expect("seed")?;
    let seed = v.parse().map_err(|_| ModelIoError::Parse {
        line: n,
        message: format!("bad seed {v:?}"),
    })?;
    let (_, fingerprint) = lines.expect("fingerprint")?;
    let feature_fingerprint = fingerprint.to_string();

    let mut platt = None;
    let mut auc_estimate = None;
    let (mut n, mut line) = lines.next()?;
    if let Some(rest) = line.strip_prefix("platt ") {
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(ModelIoError::Parse {
                line: n,
                message: "platt needs two values".into(),
            });
        }
        platt = Some((parse_f64(n, parts[0])?, parse_f64(n, parts[1])?));
        let next = lines.next()?;
        n = next.0;
        line = next.1;
    }
    if let Some(rest) = line.strip_prefix("auc_estimate ") {
        auc_estimate = Some(parse_f64(n, rest.trim())?);
        let next = lines.next()?;
        n = next.0;
        line = next.1;
    }

    let params = if let Some(rest) = line.strip_prefix("weights ") {
        let nnz = parse_usize(n, rest.trim())?;
        let mut weights = vec![0.0f64; dim];
        for _ in 0..nnz {
            let (wn, wl) = lines.expect("w")?;
            let parts: Vec<&str> = wl.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(ModelIoError::Parse {
                    line: wn,
                    message: "weight entry needs column and value".into(),
                });
            }
            let col = parse_usize(wn, parts[0])?;
            if col >= dim {
                return Err(ModelIoError::Parse {
                    line: wn,
                    message: format!("column {col} out of range (dim {dim})"),
                });
            }
            weights[col] = parse_f64(wn, parts[1])?;
        }
        let (bn, bv) = lines.expect("bias")?;
        ModelParams::Linear {
            weights,
            bias: parse_f64(bn, bv)?,
        }
    } else if let Some(rest) = line.strip_prefix("support ") {
        let count = parse_usize(n, rest.trim())?;
        let mut support = Vec::with_capacity(count);
        let mut coeffs = Vec::with_capacity(count);
        for _ in 0..count {
            let (sn, sl) = lines.expect("sv")?;
            let mut parts = sl.split_whitespace();
            let coef = parse_f64(sn, parts.next().unwrap_or(""))?;
            let sv_dim = parse_usize(sn, parts.next().unwrap_or(""))?;
            let mut entries = Vec::new();
            for pair in parts {
                let (col, val) = pair.split_once(':').ok_or(ModelIoError::Parse {
                    line: sn,
                    message: format!("bad entry {pair:?}"),
                })?;
                entries.push((parse_usize(sn, col)?, parse_f64(sn, val)?));
            }
            coeffs.push(coef);
            support.push(SparseVector::from_pairs(entries, sv_dim));
        }
        let (bn, bv) = lines.expect("bias")?;
        ModelParams::Gaussian {
            support,
            coeffs,
            bias: parse_f64(bn, bv)?,
        }
    } else {
        return Err(ModelIoError::Parse {
            line: n,
            message: format!("expected weights or support section, found {line:?}"),
        });
    };
    lines.expect("end")?;
    Ok(SvmModel {
        kernel,
        params,
        lambda,
        dim,
        seed,
        platt,
        auc_estimate,
        feature_fingerprint,
    })
}

/// Serializes a single classifier to the textual model format.
pub fn model_to_string(model: &SvmModel) -> String {
    let mut out = String::new();
    write_model_body(&mut out, model);
    out
}

pub fn model_from_str(text: &str) -> Result<SvmModel, ModelIoError> {
    read_model_body(&mut Lines::new(text))
}

pub fn save_model(model: &SvmModel, path: &Path) -> Result<(), ModelIoError> {
    std::fs::write(path, model_to_string(model)).map_err(|source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<SvmModel, ModelIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_str(&text)
}

/// Serializes the fusion stack: base fingerprints, the (a_text, a_vis)
/// scaling pair, the selector γ, and all three embedded classifiers.
pub fn fusion_to_string(meta: &MetaModel, gamma: f64) -> String {
    let mut out = String::new();
    out.push_str(FUSION_MAGIC);
    out.push('\n');
    let _ = writeln!(out, "text_fingerprint {}", meta.text_model.feature_fingerprint);
    let _ = writeln!(out, "vis_fingerprint {}", meta.vis_model.feature_fingerprint);
    let _ = writeln!(out, "auc_text {}", fmt_f64(meta.auc_text));
    let _ = writeln!(out, "auc_vis {}", fmt_f64(meta.auc_vis));
    let _ = writeln!(out, "gamma {}", fmt_f64(gamma));
    for (name, model) in [
        ("text", &meta.text_model),
        ("visual", &meta.vis_model),
        ("meta", &meta.meta_svm),
    ] {
        let _ = writeln!(out, "begin {name}");
        write_model_body(&mut out, model);
    }
    out.push_str("end\n");
    out
}

pub fn fusion_from_str(text: &str) -> Result<(MetaModel, f64), ModelIoError> {
    let mut lines = Lines::new(text);
    let (n, magic) = lines.next()?;
    if magic != FUSION_MAGIC {
        return Err(ModelIoError::Parse {
            line: n,
            message: format!("expected {FUSION_MAGIC:?}, found {magic:?}"),
        });
    }
    let (_, text_fp) = lines.expect("text_fingerprint")?;
    let text_fp = text_fp.to_string();
    let (_, vis_fp) = lines.expect("vis_fingerprint")?;
    let vis_fp = vis_fp.to_string();
    let (n, v) = lines.expect("auc_text")?;
    let auc_text = parse_f64(n, v)?;
    let (n, v) = lines.expect("auc_vis")?;
    let auc_vis = parse_f64(n, v)?;
    let (n, v) = lines.expect("gamma")?;
    let gamma = parse_f64(n, v)?;

    let mut text_model = None;
    let mut vis_model = None;
    let mut meta_svm = None;
    loop {
        let (n, line) = lines.next()?;
        if line == "end" {
            break;
        }
        let name = line.strip_prefix("begin ").ok_or(ModelIoError::Parse {
            line: n,
            message: format!("expected begin/end, found {line:?}"),
        })?;
        let model = read_model_body(&mut lines)?;
        match name {
            "text" => text_model = Some(model),
            "visual" => vis_model = Some(model),
            "meta" => meta_svm = Some(model),
            _ => {
                return Err(ModelIoError::Parse {
                    line: n,
                    message: format!("unknown section {name:?}"),
                })
            }
        }
    }
    let missing = |what: &str| ModelIoError::Parse {
        line: 0,
        message: format!("missing {what} section"),
    };
    let text_model = text_model.ok_or_else(|| missing("text"))?;
    let vis_model = vis_model.ok_or_else(|| missing("visual"))?;
    let meta_svm = meta_svm.ok_or_else(|| missing("meta"))?;
    for (declared, embedded, name) in [
        (&text_fp, &text_model.feature_fingerprint, "text"),
        (&vis_fp, &vis_model.feature_fingerprint, "visual"),
    ] {
        if declared != embedded {
            return Err(ModelIoError::Parse {
                line: 0,
                message: format!(
                    "{name} fingerprint mismatch: header {declared}, model {embedded}"
                ),
            });
        }
    }
    Ok((
        MetaModel {
            text_model,
            vis_model,
            auc_text,
            auc_vis,
            meta_svm,
        },
        gamma,
    ))
}

pub fn save_fusion(meta: &MetaModel, gamma: f64, path: &Path) -> Result<(), ModelIoError> {
    std::fs::write(path, fusion_to_string(meta, gamma)).map_err(|source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_fusion(path: &Path) -> Result<(MetaModel, f64), ModelIoError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    fusion_from_str(&text)
}
