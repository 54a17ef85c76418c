//! Tokenization, vocabulary pruning and bag-of-words views.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Default English stopword list, one word per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PreprocessRules {
    /// Words whose document frequency (as a fraction of documents) exceeds
    /// this value are dropped.
    pub max_doc_frequency: f64,
    /// Words occurring fewer times than this across the corpus are dropped.
    pub min_word_count: usize,
    pub stopwords: BTreeSet<String>,
    pub lowercase: bool,
}

impl Default for PreprocessRules {
    fn default() -> Self {
        PreprocessRules {
            max_doc_frequency: 0.70,
            min_word_count: 10,
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            lowercase: true,
        }
    }
}

impl PreprocessRules {
    /// Rules that prune nothing beyond tokenization.
    pub fn permissive() -> Self {
        PreprocessRules {
            max_doc_frequency: 1.0,
            min_word_count: 0,
            stopwords: BTreeSet::new(),
            lowercase: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_doc_frequency > 0.0 && self.max_doc_frequency <= 1.0) {
            return Err(Error::invalid(alloc::format!(
                "max_doc_frequency must lie in (0, 1], got {}",
                self.max_doc_frequency
            )));
        }
        Ok(())
    }
}

/// Parses a newline-separated stopword list; blank lines and `#` comments are skipped.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
    pub labels: Vec<String>,
}

impl RawDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        RawDocument {
            id: id.into(),
            text: text.into(),
            labels: Vec::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.labels.push(label.into());
        self
    }
}

/// Lowercases (optionally), splits on non-alphanumeric characters, and drops
/// pure-number tokens and tokens shorter than two characters.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2 && !t.chars().all(char::is_numeric))
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

/// A document as sorted `(word_id, count)` pairs.
pub type BowRow = Vec<(usize, u32)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    vocab: Vec<String>,
    doc_ids: Vec<String>,
    docs: Vec<Vec<usize>>,
    counts: Vec<BowRow>,
    label_names: Vec<String>,
    labels: Option<Vec<Vec<usize>>>,
}

impl Corpus {
    /// Assembles a corpus from already-numbered parts and checks its invariants.
    pub fn from_parts(
        vocab: Vec<String>,
        doc_ids: Vec<String>,
        docs: Vec<Vec<usize>>,
        label_names: Vec<String>,
        labels: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let v = vocab.len();
        let mut seen = BTreeSet::new();
        for w in &vocab {
            if !seen.insert(w.as_str()) {
                return Err(Error::invalid(alloc::format!("duplicate vocabulary word '{w}'")));
            }
        }
        if doc_ids.len() != docs.len() {
            return Err(Error::shape("doc_ids", docs.len().to_string(), doc_ids.len().to_string()));
        }
        let mut ids = BTreeSet::new();
        for id in &doc_ids {
            if !ids.insert(id.as_str()) {
                return Err(Error::invalid(alloc::format!("duplicate document id '{id}'")));
            }
        }
        for (d, doc) in docs.iter().enumerate() {
            if let Some(&bad) = doc.iter().find(|&&t| t >= v) {
                return Err(Error::invalid(alloc::format!(
                    "document '{}' has token id {bad} outside vocabulary of size {v}",
                    doc_ids[d]
                )));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != docs.len() {
                return Err(Error::shape("labels", docs.len().to_string(), labels.len().to_string()));
            }
            for (d, ls) in labels.iter().enumerate() {
                if let Some(&bad) = ls.iter().find(|&&l| l >= label_names.len()) {
                    return Err(Error::invalid(alloc::format!(
                        "document '{}' has label id {bad} but only {} labels exist",
                        doc_ids[d],
                        label_names.len()
                    )));
                }
            }
        }
        let counts = docs.iter().map(|d| bow_row(d)).collect();
        Ok(Corpus {
            vocab,
            doc_ids,
            docs,
            counts,
            label_names,
            labels,
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Token ids of document `d` in their original order.
    pub fn doc(&self, d: usize) -> &[usize] {
        &self.docs[d]
    }

    pub fn docs(&self) -> &[Vec<usize>] {
        &self.docs
    }

    /// Sparse count row of document `d`.
    pub fn counts(&self, d: usize) -> &[(usize, u32)] {
        &self.counts[d]
    }

    pub fn dense_counts(&self, d: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.vocab.len()];
        for &(w, c) in &self.counts[d] {
            row[w] = f64::from(c);
        }
        row
    }

    pub fn doc_len(&self, d: usize) -> usize {
        self.docs[d].len()
    }

    /// Documents with no retained tokens. They stay in the corpus so that
    /// per-document matrices remain aligned, but are skipped in training.
    pub fn is_empty_doc(&self, d: usize) -> bool {
        self.docs[d].is_empty()
    }

    pub fn empty_docs(&self) -> Vec<usize> {
        (0..self.num_docs()).filter(|&d| self.is_empty_doc(d)).collect()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn labels(&self) -> Option<&[Vec<usize>]> {
        self.labels.as_deref()
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.vocab.iter().position(|w| w == word)
    }

    /// Total occurrences of every vocabulary word.
    pub fn word_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.vocab.len()];
        for row in &self.counts {
            for &(w, c) in row {
                totals[w] += u64::from(c);
            }
        }
        totals
    }

    /// Number of documents containing each vocabulary word.
    pub fn doc_frequencies(&self) -> Vec<usize> {
        let mut df = vec![0usize; self.vocab.len()];
        for row in &self.counts {
            for &(w, _) in row {
                df[w] += 1;
            }
        }
        df
    }
}

fn bow_row(tokens: &[usize]) -> BowRow {
    let mut map = BTreeMap::new();
    for &t in tokens {
        *map.entry(t).or_insert(0u32) += 1;
    }
    map.into_iter().collect()
}

/// Tokenizes and prunes raw documents into a [`Corpus`].
///
/// The vocabulary is ordered by descending corpus count, ties broken
/// lexicographically. Label names are sorted lexicographically.
pub fn preprocess(raw_docs: &[RawDocument], rules: &PreprocessRules) -> Result<Corpus> {
    if raw_docs.is_empty() {
        return Err(Error::invalid("no documents to preprocess"));
    }
    rules.validate()?;

    let tokenized: Vec<Vec<String>> = raw_docs
        .iter()
        .map(|d| {
            tokenize(&d.text, rules.lowercase)
                .into_iter()
                .filter(|t| !rules.stopwords.contains(t))
                .collect()
        })
        .collect();

    let mut count: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for doc in &tokenized {
        let mut in_doc = BTreeSet::new();
        for t in doc {
            let e = count.entry(t.as_str()).or_insert((0, 0));
            e.0 += 1;
            if in_doc.insert(t.as_str()) {
                e.1 += 1;
            }
        }
    }
    if count.is_empty() {
        return Err(Error::EmptyVocabulary { rule: "stopwords/tokenization" });
    }

    let n_docs = raw_docs.len() as f64;
    let after_df: Vec<(&str, usize)> = count
        .iter()
        .filter(|(_, &(_, df))| df as f64 / n_docs <= rules.max_doc_frequency)
        .map(|(&w, &(c, _))| (w, c))
        .collect();
    if after_df.is_empty() {
        return Err(Error::EmptyVocabulary { rule: "max_doc_frequency" });
    }
    let mut kept: Vec<(&str, usize)> =
        after_df.into_iter().filter(|&(_, c)| c >= rules.min_word_count).collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { rule: "min_word_count" });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));

    let index: BTreeMap<&str, usize> = kept.iter().enumerate().map(|(i, &(w, _))| (w, i)).collect();
    let docs: Vec<Vec<usize>> = tokenized
        .iter()
        .map(|doc| doc.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .collect();
    let vocab: Vec<String> = kept.iter().map(|&(w, _)| w.to_string()).collect();

    let (label_names, labels) = if raw_docs.iter().any(|d| !d.labels.is_empty()) {
        let names: BTreeSet<&str> =
            raw_docs.iter().flat_map(|d| d.labels.iter().map(String::as_str)).collect();
        let names: Vec<String> = names.into_iter().map(String::from).collect();
        let labels = raw_docs
            .iter()
            .map(|d| {
                let mut ids: Vec<usize> = d
                    .labels
                    .iter()
                    .map(|l| names.iter().position(|n| n == l).expect("label collected above"))
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                ids
            })
            .collect();
        (names, Some(labels))
    } else {
        (Vec::new(), None)
    };

    let doc_ids = raw_docs.iter().map(|d| d.id.clone()).collect();
    let corpus = Corpus::from_parts(vocab, doc_ids, docs, label_names, labels)?;
    let empty = corpus.empty_docs().len();
    if empty > 0 {
        log::warn!("{empty} documents are empty after pruning and will be skipped in training");
    }
    Ok(corpus)
}

/// Count row of document `doc` divided by its length.
pub fn normalized_bow(corpus: &Corpus, doc: usize) -> Result<Vec<f64>> {
    if doc >= corpus.num_docs() {
        return Err(Error::invalid(alloc::format!(
            "document index {doc} out of range for {} documents",
            corpus.num_docs()
        )));
    }
    let len = corpus.doc_len(doc);
    if len == 0 {
        return Err(Error::EmptyDocument);
    }
    let mut row = corpus.dense_counts(doc);
    let inv = 1.0 / len as f64;
    for x in &mut row {
        *x *= inv;
    }
    Ok(row)
}
