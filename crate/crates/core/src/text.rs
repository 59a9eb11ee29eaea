//! Text features: tokenization, corpus vocabulary, and L2-normalized
//! TF-IDF vectors.
//!
//! Tokens are maximal alphanumeric runs, lowercased, with English stop
//! words and pure-integer year tokens in 1950..=2017 removed. The
//! vocabulary keeps the 50k terms with the highest corpus frequency and
//! is fit on the training split only.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseVector;

/// The fixed English stop-word list shipped with the toolkit, one word
/// per line. 318 words.
pub const STOP_WORDS_RAW: &str = include_str!("stopwords.txt");

pub const DEFAULT_MAX_TERMS: usize = 50_000;

fn stop_words() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOP_WORDS_RAW.lines().filter(|l| !l.is_empty()).collect())
}

fn is_year_token(token: &str) -> bool {
    if !token.chars().all(|c| c.is_ascii_digit()) {
        return false;
    }
    matches!(token.parse::<u32>(), Ok(y) if (1950..=2017).contains(&y))
}

/// Lowercases, splits into maximal alphanumeric runs, and drops stop
/// words and pure-integer tokens in 1950..=2017.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in lower.chars() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens.retain(|t| !stop_words().contains(t.as_str()) && !is_year_token(t));
    tokens
}

/// Term vocabulary with the document statistics needed for IDF weighting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    #[serde(skip)]
    index: OnceLock<HashMap<String, usize>>,
    doc_freq: Vec<u64>,
    corpus_term_freq: Vec<u64>,
    n_docs: u64,
}

#[derive(Debug, Error)]
pub enum TextError {
    #[error("cannot build a vocabulary from an all-empty corpus")]
    EmptyCorpus,
    #[error("max_terms must be at least 1")]
    ZeroMaxTerms,
    #[error("unknown term {0:?}")]
    UnknownTerm(String),
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, col: usize) -> &str {
        &self.terms[col]
    }

    pub fn doc_freq(&self, col: usize) -> u64 {
        self.doc_freq[col]
    }

    pub fn corpus_term_freq(&self, col: usize) -> u64 {
        self.corpus_term_freq[col]
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index().get(term).copied()
    }

    fn index(&self) -> &HashMap<String, usize> {
        self.index.get_or_init(|| {
            self.terms
                .iter()
                .enumerate()
                .map(|(i, t)| (t.clone(), i))
                .collect()
        })
    }

    /// Inverse document frequency, ln((1 + n_docs) / (1 + doc_freq)).
    pub fn idf(&self, term: &str) -> Result<f64, TextError> {
        let col = self
            .column(term)
            .ok_or_else(|| TextError::UnknownTerm(term.to_string()))?;
        Ok(self.idf_col(col))
    }

    pub fn idf_col(&self, col: usize) -> f64 {
        ((1 + self.n_docs) as f64 / (1 + self.doc_freq[col]) as f64).ln()
    }

    /// Stable content hash, used as the feature-space fingerprint in
    /// model files.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.n_docs.to_le_bytes());
        for (i, t) in self.terms.iter().enumerate() {
            h.update(t.as_bytes());
            h.update([0u8]);
            h.update(self.doc_freq[i].to_le_bytes());
            h.update(self.corpus_term_freq[i].to_le_bytes());
        }
        let d = h.finalize();
        d.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Builds the vocabulary from training-split token lists: retains the
/// `max_terms` highest-corpus-frequency terms, ordered by descending
/// frequency with lexicographic tie-break.
pub fn build_vocabulary<'a, I, T>(token_lists: I, max_terms: usize) -> Result<Vocabulary, TextError>
where
    I: IntoIterator<Item = T>,
    T: IntoIterator<Item = &'a String>,
{
    if max_terms == 0 {
        return Err(TextError::ZeroMaxTerms);
    }
    // BTreeMap keeps term iteration order deterministic
    let mut tf: BTreeMap<String, u64> = BTreeMap::new();
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    let mut n_docs = 0u64;
    for doc in token_lists {
        n_docs += 1;
        let mut seen = HashSet::new();
        for tok in doc {
            *tf.entry(tok.clone()).or_default() += 1;
            if seen.insert(tok.as_str().to_string()) {
                *df.entry(tok.clone()).or_default() += 1;
            }
        }
    }
    if tf.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let mut ranked: Vec<(String, u64)> = tf.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_terms);

    let terms: Vec<String> = ranked.iter().map(|(t, _)| t.clone()).collect();
    let corpus_term_freq: Vec<u64> = ranked.iter().map(|&(_, f)| f).collect();
    let doc_freq: Vec<u64> = terms.iter().map(|t| df[t]).collect();
    Ok(Vocabulary {
        terms,
        index: OnceLock::new(),
        doc_freq,
        corpus_term_freq,
        n_docs,
    })
}

/// A vectorized document: the TF-IDF vector plus a flag marking documents
/// that produced no in-vocabulary mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfVector {
    pub vector: SparseVector,
    /// True when the document had no in-vocabulary term or every matched
    /// term carried zero IDF; the vector is then all zeros.
    pub empty: bool,
}

/// Raw count × IDF per in-vocabulary term, then L2 normalization.
pub fn tfidf_vector(tokens: &[String], vocabulary: &Vocabulary) -> TfIdfVector {
    let mut counts: HashMap<usize, u64> = HashMap::new();
    for tok in tokens {
        if let Some(col) = vocabulary.column(tok) {
            *counts.entry(col).or_default() += 1;
        }
    }
    let weighted = SparseVector::from_pairs(
        counts
            .into_iter()
            .map(|(col, n)| (col, n as f64 * vocabulary.idf_col(col))),
        vocabulary.len(),
    );
    let empty = weighted.is_zero();
    TfIdfVector {
        vector: weighted.l2_normalized(),
        empty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_lowercases_strips_stopwords_and_punctuation() {
        assert_eq!(tokenize("The Cat, cat 2005!"), toks(&["cat", "cat"]));
    }

    #[test]
    fn tokenize_year_boundaries() {
        assert_eq!(
            tokenize("1949 2018 svm"),
            toks(&["1949", "2018", "svm"]),
            "years outside 1950..=2017 survive"
        );
        assert_eq!(tokenize("1950 2017"), Vec::<String>::new());
    }

    #[test]
    fn tokenize_splits_hyphenated() {
        // "e" survives (not a stop word), "print" survives
        assert_eq!(tokenize("e-print"), toks(&["e", "print"]));
    }

    #[test]
    fn tokenize_is_idempotent() {
        let t1 = tokenize("Scale-Invariant Feature Transform (SIFT), 2004.");
        let rejoined = t1.join(" ");
        assert_eq!(tokenize(&rejoined), t1);
    }

    #[test]
    fn vocabulary_top_terms_by_frequency() {
        let docs = vec![toks(&["a", "a", "b"]), toks(&["b", "c"])];
        let v = build_vocabulary(docs.iter().map(|d| d.iter()), 2).unwrap();
        let mut kept: Vec<&str> = v.terms().iter().map(|s| s.as_str()).collect();
        kept.sort();
        assert_eq!(kept, vec!["a", "b"]);
        // ordering: a and b tie at frequency 2, lexicographic break
        assert_eq!(v.term(0), "a");
        assert_eq!(v.term(1), "b");
    }

    #[test]
    fn vocabulary_single_doc() {
        let docs = vec![toks(&["x"])];
        let v = build_vocabulary(docs.iter().map(|d| d.iter()), 100).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.n_docs(), 1);
        assert_eq!(v.doc_freq(0), 1);
    }

    #[test]
    fn vocabulary_rejects_degenerate_input() {
        let docs: Vec<Vec<String>> = vec![vec![]];
        assert!(matches!(
            build_vocabulary(docs.iter().map(|d| d.iter()), 10),
            Err(TextError::EmptyCorpus)
        ));
        let docs = vec![toks(&["x"])];
        assert!(matches!(
            build_vocabulary(docs.iter().map(|d| d.iter()), 0),
            Err(TextError::ZeroMaxTerms)
        ));
    }

    #[test]
    fn vocabulary_order_independent() {
        let d1 = toks(&["a", "b", "b"]);
        let d2 = toks(&["c", "a"]);
        let v1 = build_vocabulary([d1.iter(), d2.iter()], 3).unwrap();
        let v2 = build_vocabulary([d2.iter(), d1.iter()], 3).unwrap();
        assert_eq!(v1.terms(), v2.terms());
        assert_eq!(v1.fingerprint(), v2.fingerprint());
    }

    #[test]
    fn idf_hand_values() {
        // n_docs=2, df in {1,2}
        let docs = vec![toks(&["cat", "cat", "dog"]), toks(&["dog", "bird"])];
        let v = build_vocabulary(docs.iter().map(|d| d.iter()), 10).unwrap();
        assert!((v.idf("dog").unwrap() - 0.0).abs() < 1e-12);
        assert!((v.idf("cat").unwrap() - (3.0f64 / 2.0).ln()).abs() < 1e-12);
        assert!((v.idf("cat").unwrap() - 0.405465).abs() < 1e-6);
        assert!(matches!(v.idf("fish"), Err(TextError::UnknownTerm(_))));
    }

    #[test]
    fn idf_large_corpus_value() {
        let mut docs = vec![toks(&["rare", "common"])];
        for _ in 0..999 {
            docs.push(toks(&["common"]));
        }
        let v = build_vocabulary(docs.iter().map(|d| d.iter()), 10).unwrap();
        assert!((v.idf("rare").unwrap() - (1001.0f64 / 2.0).ln()).abs() < 1e-12);
        assert!((v.idf("rare").unwrap() - 6.2156).abs() < 1e-3);
    }

    #[test]
    fn tfidf_two_document_worked_corpus() {
        // d1: "cat cat dog", d2: "dog bird"
        let d1 = toks(&["cat", "cat", "dog"]);
        let d2 = toks(&["dog", "bird"]);
        let v = build_vocabulary([d1.iter(), d2.iter()], 10).unwrap();
        let out = tfidf_vector(&d1, &v);
        assert!(!out.empty);
        // cat: 2*ln(1.5), dog: 1*ln(1) = 0 -> after normalization, cat = 1.0
        let cat = v.column("cat").unwrap();
        assert!((out.vector.get(cat) - 1.0).abs() < 1e-12);
        assert_eq!(out.vector.nnz(), 1);
    }

    #[test]
    fn tfidf_no_in_vocab_terms_is_flagged_zero() {
        let d1 = toks(&["cat"]);
        let v = build_vocabulary([d1.iter()], 10).unwrap();
        let out = tfidf_vector(&toks(&["zebra"]), &v);
        assert!(out.empty);
        assert!(out.vector.is_zero());
    }

    #[test]
    fn tfidf_unit_norm() {
        let d1 = toks(&["a", "b", "c"]);
        let d2 = toks(&["a"]);
        let v = build_vocabulary([d1.iter(), d2.iter()], 10).unwrap();
        let out = tfidf_vector(&d1, &v);
        assert!((out.vector.norm() - 1.0).abs() < 1e-9);
    }
}
