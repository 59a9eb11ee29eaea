//! Corpus ingest: manifest parsing, citation-threshold labeling, and
//! deterministic stratified splits.
//!
//! A manifest is a UTF-8 file of line-delimited JSON records with fields
//! `id, domain, year, citations, text, pages[]`. Paths are relative to a
//! root directory supplied at parse time.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    High,
    Low,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::High => write!(f, "high"),
            Label::Low => write!(f, "low"),
        }
    }
}

/// Outcome of the citation-threshold rule: 0 citations map to `Low`,
/// more than 10 to `High`, and the 1..=10 band is excluded from the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelBand {
    High,
    Low,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Dev => write!(f, "dev"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// One paper: identity, metadata, on-disk feature sources, and the
/// label/split assigned during ingest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub domain: String,
    pub year: i32,
    pub citations: u32,
    pub text_path: PathBuf,
    pub page_paths: Vec<PathBuf>,
    pub label: Option<Label>,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub records: Vec<DocumentRecord>,
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn domains(&self) -> Vec<String> {
        let mut ds: Vec<String> = self.records.iter().map(|r| r.domain.clone()).collect();
        ds.sort();
        ds.dedup();
        ds
    }

    /// Per-(domain, label) record counts, for the balance report.
    pub fn label_balance(&self) -> Vec<(String, Label, usize)> {
        let mut counts: HashMap<(String, Label), usize> = HashMap::new();
        for r in &self.records {
            if let Some(l) = r.label {
                *counts.entry((r.domain.clone(), l)).or_default() += 1;
            }
        }
        let mut out: Vec<_> = counts.into_iter().map(|((d, l), n)| (d, l, n)).collect();
        out.sort_by(|a, b| (&a.0, a.1 == Label::Low).cmp(&(&b.0, b.1 == Label::Low)));
        out
    }
}

/// Split assignment plus the parameters that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignment: HashMap<String, Split>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read manifest {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest has malformed records:\n{}", format_issues(.0))]
    Malformed(Vec<LineIssue>),
    #[error("duplicate id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("split ratios {0:?} do not sum to 1")]
    BadRatios([f64; 3]),
    #[error("record {0:?} has no label; only 0-citation and >10-citation documents can be split")]
    UnlabeledRecord(String),
}

/// A field-level problem on one manifest line.
#[derive(Debug, Clone)]
pub struct LineIssue {
    pub line: usize,
    pub field: String,
    pub message: String,
}

fn format_issues(issues: &[LineIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  line {}: field {:?}: {}", i.line, i.field, i.message))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A record skipped at ingest because its citation count fell in the
/// excluded 1..=10 band.
#[derive(Debug, Clone)]
pub struct RejectedRecord {
    pub line: usize,
    pub id: String,
    pub citations: u32,
}

#[derive(Debug)]
pub struct ParsedManifest {
    pub manifest: CorpusManifest,
    /// Records in the 1..=10 citation band, excluded but reported.
    pub rejected: Vec<RejectedRecord>,
}

// Raw line shape: citations as i64 so a negative value is caught here
// with a field name instead of a serde type error.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    domain: String,
    year: i32,
    citations: i64,
    text: String,
    pages: Vec<String>,
}

/// 0 citations → `Low`, more than 10 → `High`, anything between is
/// excluded from the corpus.
pub fn label_from_citations(citations: u32) -> LabelBand {
    match citations {
        0 => LabelBand::Low,
        1..=10 => LabelBand::Rejected,
        _ => LabelBand::High,
    }
}

/// Parses a line-delimited JSON manifest. Labels every record via the
/// citation rule; mid-band records are excluded and reported. Malformed
/// lines and duplicate ids are hard errors carrying line numbers.
pub fn parse_manifest(path: &Path, root: &Path) -> Result<ParsedManifest, CorpusError> {
    let contents = std::fs::read_to_string(path).map_err(|source| CorpusError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut issues = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in contents.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                issues.push(LineIssue {
                    line: lineno,
                    field: "record".into(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        if raw.citations < 0 {
            issues.push(LineIssue {
                line: lineno,
                field: "citations".into(),
                message: format!("must be non-negative, got {}", raw.citations),
            });
            continue;
        }
        if raw.pages.is_empty() {
            issues.push(LineIssue {
                line: lineno,
                field: "pages".into(),
                message: "must list at least one page image".into(),
            });
            continue;
        }
        if raw.id.is_empty() {
            issues.push(LineIssue {
                line: lineno,
                field: "id".into(),
                message: "must be non-empty".into(),
            });
            continue;
        }
        if let Some(&first) = seen.get(&raw.id) {
            return Err(CorpusError::DuplicateId {
                id: raw.id,
                first_line: first,
                second_line: lineno,
            });
        }
        seen.insert(raw.id.clone(), lineno);

        let citations = raw.citations as u32;
        let label = match label_from_citations(citations) {
            LabelBand::High => Label::High,
            LabelBand::Low => Label::Low,
            LabelBand::Rejected => {
                rejected.push(RejectedRecord {
                    line: lineno,
                    id: raw.id,
                    citations,
                });
                continue;
            }
        };
        records.push(DocumentRecord {
            id: raw.id,
            domain: raw.domain,
            year: raw.year,
            citations,
            text_path: PathBuf::from(raw.text),
            page_paths: raw.pages.into_iter().map(PathBuf::from).collect(),
            label: Some(label),
            split: None,
        });
    }

    if !issues.is_empty() {
        return Err(CorpusError::Malformed(issues));
    }
    Ok(ParsedManifest {
        manifest: CorpusManifest {
            records,
            root: root.to_path_buf(),
        },
        rejected,
    })
}

fn cell_rng(seed: u64, domain: &str, label: Label) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(domain.as_bytes());
    h.update([match label {
        Label::High => 1u8,
        Label::Low => 0u8,
    }]);
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Largest-remainder apportionment of `n` items over the three splits.
fn apportion(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|&e| e.floor() as usize).collect();
    let mut leftover = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Deterministic stratified split by (domain, label). The result depends
/// only on the set of record ids per cell, the ratios, and the seed —
/// never on manifest line order.
pub fn split_corpus(
    manifest: &CorpusManifest,
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitAssignment, CorpusError> {
    if ratios.iter().any(|&r| r <= 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios(ratios));
    }
    let mut cells: HashMap<(String, Label), Vec<String>> = HashMap::new();
    for r in &manifest.records {
        let label = r.label.ok_or_else(|| CorpusError::UnlabeledRecord(r.id.clone()))?;
        cells
            .entry((r.domain.clone(), label))
            .or_default()
            .push(r.id.clone());
    }
    let mut assignment = HashMap::new();
    let mut keys: Vec<_> = cells.keys().cloned().collect();
    keys.sort_by(|a, b| (&a.0, a.1 == Label::Low).cmp(&(&b.0, b.1 == Label::Low)));
    for key in keys {
        let mut ids = cells.remove(&key).unwrap();
        ids.sort();
        let mut rng = cell_rng(seed, &key.0, key.1);
        ids.shuffle(&mut rng);
        let [n_train, n_dev, _] = apportion(ids.len(), &ratios);
        for (i, id) in ids.into_iter().enumerate() {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_dev {
                Split::Dev
            } else {
                Split::Test
            };
            assignment.insert(id, split);
        }
    }
    Ok(SplitAssignment {
        assignment,
        seed,
        ratios,
    })
}

/// Stamps a split assignment onto the manifest records.
pub fn apply_split(manifest: &mut CorpusManifest, split: &SplitAssignment) {
    for r in &mut manifest.records {
        r.split = split.assignment.get(&r.id).copied();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub record_id: String,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }
}

/// Report-only corpus check: missing or unreadable files, empty text,
/// undecodable images, and out-of-window publication years.
pub fn validate_corpus(manifest: &CorpusManifest) -> ValidationReport {
    let mut report = ValidationReport::default();
    for r in &manifest.records {
        let text = manifest.root.join(&r.text_path);
        match std::fs::metadata(&text) {
            Err(_) => report.issues.push(ValidationIssue {
                record_id: r.id.clone(),
                severity: Severity::Error,
                message: format!("missing text file {}", text.display()),
            }),
            Ok(m) if m.len() == 0 => report.issues.push(ValidationIssue {
                record_id: r.id.clone(),
                severity: Severity::Error,
                message: format!("empty text file {}", text.display()),
            }),
            Ok(_) => {}
        }
        for p in &r.page_paths {
            let page = manifest.root.join(p);
            if !page.is_file() {
                report.issues.push(ValidationIssue {
                    record_id: r.id.clone(),
                    severity: Severity::Error,
                    message: format!("missing page image {}", page.display()),
                });
            } else if image::image_dimensions(&page).is_err() {
                report.issues.push(ValidationIssue {
                    record_id: r.id.clone(),
                    severity: Severity::Error,
                    message: format!("unreadable page image {}", page.display()),
                });
            }
        }
        if r.year < 2000 || r.year > 2013 {
            report.issues.push(ValidationIssue {
                record_id: r.id.clone(),
                severity: Severity::Warning,
                message: format!("year {} outside the 2000-2013 window", r.year),
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_manifest(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn empty_manifest_is_ok() {
        let f = write_manifest(&[]);
        let parsed = parse_manifest(f.path(), Path::new(".")).unwrap();
        assert!(parsed.manifest.records.is_empty());
    }

    #[test]
    fn negative_citations_names_field_and_line() {
        let f = write_manifest(&[
            r#"{"id":"p1","domain":"cs","year":2005,"citations":-1,"text":"a.txt","pages":["a.png"]}"#,
        ]);
        let err = parse_manifest(f.path(), Path::new(".")).unwrap_err();
        match err {
            CorpusError::Malformed(issues) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].line, 1);
                assert_eq!(issues[0].field, "citations");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_cites_both_lines() {
        let rec = r#"{"id":"p1","domain":"cs","year":2005,"citations":0,"text":"a.txt","pages":["a.png"]}"#;
        let f = write_manifest(&[rec, rec]);
        let err = parse_manifest(f.path(), Path::new(".")).unwrap_err();
        match err {
            CorpusError::DuplicateId {
                id,
                first_line,
                second_line,
            } => {
                assert_eq!(id, "p1");
                assert_eq!((first_line, second_line), (1, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn label_bands() {
        assert_eq!(label_from_citations(0), LabelBand::Low);
        assert_eq!(label_from_citations(11), LabelBand::High);
        assert_eq!(label_from_citations(5), LabelBand::Rejected);
        assert_eq!(label_from_citations(1), LabelBand::Rejected);
        assert_eq!(label_from_citations(10), LabelBand::Rejected);
    }

    #[test]
    fn midband_records_are_rejected_not_errored() {
        let f = write_manifest(&[
            r#"{"id":"p1","domain":"cs","year":2005,"citations":3,"text":"a.txt","pages":["a.png"]}"#,
        ]);
        let parsed = parse_manifest(f.path(), Path::new(".")).unwrap();
        assert!(parsed.manifest.records.is_empty());
        assert_eq!(parsed.rejected.len(), 1);
        assert_eq!(parsed.rejected[0].citations, 3);
    }

    fn synthetic_manifest(n: usize) -> CorpusManifest {
        let records = (0..n)
            .map(|i| DocumentRecord {
                id: format!("doc{i:04}"),
                domain: if i % 2 == 0 { "cs" } else { "medical" }.into(),
                year: 2005,
                citations: if i % 4 < 2 { 0 } else { 20 },
                text_path: PathBuf::from("t.txt"),
                page_paths: vec![PathBuf::from("p.png")],
                label: Some(if i % 4 < 2 { Label::Low } else { Label::High }),
                split: None,
            })
            .collect();
        CorpusManifest {
            records,
            root: PathBuf::from("."),
        }
    }

    #[test]
    fn split_counts_within_one_of_target() {
        let m = synthetic_manifest(100);
        let s = split_corpus(&m, [0.7, 0.15, 0.15], 7).unwrap();
        let mut per_cell: HashMap<(String, Label, Split), usize> = HashMap::new();
        for r in &m.records {
            let sp = s.assignment[&r.id];
            *per_cell
                .entry((r.domain.clone(), r.label.unwrap(), sp))
                .or_default() += 1;
        }
        for domain in ["cs", "medical"] {
            for label in [Label::High, Label::Low] {
                let n: usize = [Split::Train, Split::Dev, Split::Test]
                    .iter()
                    .map(|&sp| per_cell.get(&(domain.into(), label, sp)).copied().unwrap_or(0))
                    .sum();
                for (sp, ratio) in [
                    (Split::Train, 0.7),
                    (Split::Dev, 0.15),
                    (Split::Test, 0.15),
                ] {
                    let got = per_cell.get(&(domain.into(), label, sp)).copied().unwrap_or(0) as f64;
                    let target = (ratio * n as f64).round();
                    assert!(
                        (got - target).abs() <= 1.0,
                        "{domain}/{label:?}/{sp:?}: got {got}, target {target}"
                    );
                }
            }
        }
    }

    #[test]
    fn split_is_order_independent() {
        let m = synthetic_manifest(60);
        let mut shuffled = m.clone();
        shuffled.records.reverse();
        let a = split_corpus(&m, [0.7, 0.15, 0.15], 42).unwrap();
        let b = split_corpus(&shuffled, [0.7, 0.15, 0.15], 42).unwrap();
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn bad_ratios_rejected() {
        let m = synthetic_manifest(10);
        assert!(matches!(
            split_corpus(&m, [0.5, 0.5, 0.1], 1),
            Err(CorpusError::BadRatios(_))
        ));
    }

    #[test]
    fn unlabeled_record_rejected() {
        let mut m = synthetic_manifest(4);
        m.records[0].label = None;
        assert!(matches!(
            split_corpus(&m, [0.7, 0.15, 0.15], 1),
            Err(CorpusError::UnlabeledRecord(_))
        ));
    }

    #[test]
    fn validation_flags_year_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.txt"), "hello").unwrap();
        let mut m = synthetic_manifest(1);
        m.root = dir.path().to_path_buf();
        m.records[0].year = 1999;
        let report = validate_corpus(&m);
        // year warning + missing page image error
        assert!(report
            .issues
            .iter()
            .any(|i| i.severity == Severity::Warning && i.message.contains("1999")));
        assert!(report
            .issues
            .iter()
            .any(|i| i.severity == Severity::Error && i.message.contains("p.png")));
    }
}
