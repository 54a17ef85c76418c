//! Document-level supervision built from per-document topic scores.
//!
//! Scores `p_dk` in `[0, 1]` say how strongly document `d` is about topic `k`.
//! They come either from an external entailment model (imported through the
//! `ctm` crate) or from [`proxy_scores`], an embedding-similarity stand-in.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::embeddings::VocabEmbedding;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Hypothesis template the entailment scores are expected to be computed with.
pub const HYPOTHESIS_TEMPLATE: &str = "this document is about {}";

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    p: Matrix,
    doc_ids: Vec<String>,
    names: Vec<String>,
}

impl ScoreMatrix {
    pub fn new(p: Matrix, doc_ids: Vec<String>, names: Vec<String>) -> Result<Self> {
        if p.rows() != doc_ids.len() || p.cols() != names.len() {
            return Err(Error::shape(
                "score matrix",
                alloc::format!("{}x{}", doc_ids.len(), names.len()),
                p.shape_str(),
            ));
        }
        for (d, row) in p.row_iter().enumerate() {
            for (k, &x) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::invalid(alloc::format!(
                        "score out of range at doc {}, topic {}: {x}",
                        doc_ids[d], names[k]
                    )));
                }
            }
        }
        Ok(ScoreMatrix { p, doc_ids, names })
    }

    /// Aligns externally keyed score rows to corpus order and to `names`.
    ///
    /// `columns` names the entries of every row in `rows`, in file order.
    pub fn align(
        rows: Vec<(String, Vec<f64>)>,
        columns: &[String],
        corpus: &Corpus,
        names: &[String],
    ) -> Result<Self> {
        let mut col_of = Vec::with_capacity(names.len());
        for name in names {
            let c = columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::invalid(alloc::format!("score file has no column for topic '{name}'")))?;
            col_of.push(c);
        }
        if let Some(extra) = columns.iter().find(|c| !names.contains(c)) {
            return Err(Error::invalid(alloc::format!("score file names unknown topic '{extra}'")));
        }
        let known: BTreeSet<&str> = corpus.doc_ids().iter().map(String::as_str).collect();
        let mut by_id: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (line, (id, values)) in rows.into_iter().enumerate() {
            if values.len() != columns.len() {
                return Err(Error::invalid(alloc::format!(
                    "score row {} ('{id}') has {} values, expected {}",
                    line + 1,
                    values.len(),
                    columns.len()
                )));
            }
            if !known.contains(id.as_str()) {
                return Err(Error::invalid(alloc::format!("score file names unknown document '{id}'")));
            }
            if by_id.insert(id.clone(), values).is_some() {
                return Err(Error::invalid(alloc::format!("score file repeats document '{id}'")));
            }
        }
        let missing: Vec<&str> = corpus
            .doc_ids()
            .iter()
            .filter(|id| !by_id.contains_key(id.as_str()))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(Error::invalid(alloc::format!(
                "score file is missing documents: {}",
                missing.join(", ")
            )));
        }
        let p = Matrix::from_fn(corpus.num_docs(), names.len(), |d, k| {
            by_id[corpus.doc_ids()[d].as_str()][col_of[k]]
        });
        ScoreMatrix::new(p, corpus.doc_ids().to_vec(), names.to_vec())
    }

    pub fn scores(&self) -> &Matrix {
        &self.p
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Row-stochastic document-topic supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMatrix {
    theta: Matrix,
    doc_ids: Vec<String>,
    names: Vec<String>,
    /// Rows that fell back to uniform because no usable score existed.
    flagged: Vec<usize>,
}

impl PriorMatrix {
    pub fn new(theta: Matrix, doc_ids: Vec<String>, names: Vec<String>) -> Result<Self> {
        if theta.rows() != doc_ids.len() || theta.cols() != names.len() {
            return Err(Error::shape(
                "prior matrix",
                alloc::format!("{}x{}", doc_ids.len(), names.len()),
                theta.shape_str(),
            ));
        }
        for (d, row) in theta.row_iter().enumerate() {
            if !linalg::is_on_simplex(row, 1e-9) {
                return Err(Error::invalid(alloc::format!(
                    "prior row for document '{}' is not a distribution",
                    doc_ids[d]
                )));
            }
        }
        Ok(PriorMatrix {
            theta,
            doc_ids,
            names,
            flagged: Vec::new(),
        })
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    pub fn row(&self, d: usize) -> &[f64] {
        self.theta.row(d)
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn flagged(&self) -> &[usize] {
        &self.flagged
    }

    /// Marks rows as fallbacks; out-of-range ids are dropped.
    pub fn with_flagged(mut self, mut flagged: Vec<usize>) -> Self {
        flagged.retain(|&d| d < self.doc_ids.len());
        flagged.sort_unstable();
        flagged.dedup();
        self.flagged = flagged;
        self
    }

    /// Replaces row `d` with `keep * row + (1 - keep) * theta`.
    pub fn blend_row(&mut self, d: usize, theta: &[f64], keep: f64) {
        for (t, &x) in self.theta.row_mut(d).iter_mut().zip(theta) {
            *t = keep * *t + (1.0 - keep) * x;
        }
    }

    /// Checks that rows line up with `corpus` document order.
    pub fn check_alignment(&self, corpus: &Corpus) -> Result<()> {
        if self.doc_ids.len() != corpus.num_docs() {
            return Err(Error::invalid(alloc::format!(
                "prior has {} documents but corpus has {}",
                self.doc_ids.len(),
                corpus.num_docs()
            )));
        }
        if let Some((a, b)) = self.doc_ids.iter().zip(corpus.doc_ids()).find(|(a, b)| a != b) {
            return Err(Error::invalid(alloc::format!(
                "prior document '{a}' does not match corpus document '{b}'"
            )));
        }
        Ok(())
    }
}

/// Embedding-similarity scores: `(cos(centroid_d, name_k) + 1) / 2`, where
/// the centroid is the count-weighted mean embedding of the document.
///
/// Empty documents and zero-norm centroids produce all-zero rows.
pub fn proxy_scores(
    corpus: &Corpus,
    emb: &VocabEmbedding,
    names: &[String],
    name_vectors: &[Vec<f64>],
) -> Result<ScoreMatrix> {
    let dim = emb.dim();
    if emb.matrix.cols() != corpus.vocab_size() {
        return Err(Error::shape(
            "vocabulary embedding",
            alloc::format!("{dim}x{}", corpus.vocab_size()),
            emb.matrix.shape_str(),
        ));
    }
    if name_vectors.len() != names.len() {
        return Err(Error::shape("name vectors", names.len().to_string(), name_vectors.len().to_string()));
    }
    if let Some(v) = name_vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::shape("name vector", dim.to_string(), v.len().to_string()));
    }
    let name_norms: Vec<f64> = name_vectors.iter().map(|v| linalg::sqrt(linalg::dot(v, v))).collect();
    let mut p = Matrix::zeros(corpus.num_docs(), names.len());
    let mut zero_rows = 0usize;
    for d in 0..corpus.num_docs() {
        let mut centroid = vec![0.0; dim];
        for &(w, c) in corpus.counts(d) {
            for (l, slot) in centroid.iter_mut().enumerate() {
                *slot += f64::from(c) * emb.matrix.get(l, w);
            }
        }
        let norm = linalg::sqrt(linalg::dot(&centroid, &centroid));
        if norm == 0.0 {
            zero_rows += 1;
            continue;
        }
        for (k, nv) in name_vectors.iter().enumerate() {
            if name_norms[k] == 0.0 {
                continue;
            }
            let cos = linalg::dot(&centroid, nv) / (norm * name_norms[k]);
            p.set(d, k, ((cos + 1.0) / 2.0).clamp(0.0, 1.0));
        }
    }
    if zero_rows > 0 {
        log::warn!("{zero_rows} documents have no usable centroid; their proxy scores are zero");
    }
    ScoreMatrix::new(p, corpus.doc_ids().to_vec(), names.to_vec())
}

/// Squared-and-normalized soft labels:
/// `theta_dk = (p_dk^2 / f_k) / sum_k' (p_dk'^2 / f_k')` with `f_k = sum_d p_dk`.
///
/// All-zero score rows become uniform and are flagged.
pub fn soft_labels(scores: &ScoreMatrix) -> Result<PriorMatrix> {
    let p = &scores.p;
    let k = p.cols();
    let mut f = vec![0.0; k];
    for row in p.row_iter() {
        linalg::axpy(1.0, row, &mut f);
    }
    if let Some(j) = f.iter().position(|&x| x <= 0.0) {
        return Err(Error::invalid(alloc::format!(
            "topic {} received zero total score",
            scores.names[j]
        )));
    }
    let mut theta = Matrix::zeros(p.rows(), k);
    let mut flagged = Vec::new();
    for d in 0..p.rows() {
        let out = theta.row_mut(d);
        for (j, (slot, &x)) in out.iter_mut().zip(p.row(d)).enumerate() {
            *slot = x * x / f[j];
        }
        if !linalg::normalize_in_place(out) {
            out.fill(1.0 / k as f64);
            flagged.push(d);
        }
    }
    if !flagged.is_empty() {
        log::warn!("{} documents had all-zero scores and received a uniform prior", flagged.len());
    }
    let mut prior = PriorMatrix::new(theta, scores.doc_ids.clone(), scores.names.clone())?;
    prior.flagged = flagged;
    Ok(prior)
}

/// Thresholded labels: uniform over the topics with `p_dk > tau`, or uniform
/// over all topics (flagged) when none passes.
pub fn hard_labels(scores: &ScoreMatrix, tau: f64) -> Result<PriorMatrix> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(alloc::format!("tau must lie in (0, 1), got {tau}")));
    }
    let p = &scores.p;
    let k = p.cols();
    let mut theta = Matrix::zeros(p.rows(), k);
    let mut flagged = Vec::new();
    for d in 0..p.rows() {
        let out = theta.row_mut(d);
        for (slot, &x) in out.iter_mut().zip(p.row(d)) {
            *slot = if x > tau { 1.0 } else { 0.0 };
        }
        if !linalg::normalize_in_place(out) {
            out.fill(1.0 / k as f64);
            flagged.push(d);
        }
    }
    let mut prior = PriorMatrix::new(theta, scores.doc_ids.clone(), scores.names.clone())?;
    prior.flagged = flagged;
    Ok(prior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{preprocess, PreprocessRules, RawDocument};
    use alloc::format;

    fn scores(rows: &[&[f64]]) -> ScoreMatrix {
        let p = Matrix::from_rows(rows).unwrap();
        let ids = (0..p.rows()).map(|i| format!("d{i}")).collect();
        let names = (0..p.cols()).map(|i| format!("t{i}")).collect();
        ScoreMatrix::new(p, ids, names).unwrap()
    }

    #[test]
    fn soft_labels_hand_case() {
        // f = [1.2, 0.8]; row 0: 0.64/1.2 = 0.5333, 0.04/0.8 = 0.05
        let prior = soft_labels(&scores(&[&[0.8, 0.2], &[0.4, 0.6]])).unwrap();
        let a = 0.64 / 1.2;
        let b = 0.04 / 0.8;
        assert!((prior.row(0)[0] - a / (a + b)).abs() < 1e-15);
        assert!((prior.row(0)[0] - 0.9143).abs() < 5e-4);
        assert!((prior.row(0)[1] - 0.0857).abs() < 5e-4);
    }

    #[test]
    fn soft_labels_uniform_and_zero_entries() {
        let prior = soft_labels(&scores(&[&[0.3, 0.3], &[0.3, 0.3]])).unwrap();
        assert!(prior.theta().as_slice().iter().all(|&x| (x - 0.5).abs() < 1e-15));
        let prior = soft_labels(&scores(&[&[1.0, 0.0], &[0.2, 0.9]])).unwrap();
        assert_eq!(prior.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn soft_labels_zero_column_and_zero_row() {
        let err = soft_labels(&scores(&[&[0.5, 0.0], &[0.2, 0.0]])).unwrap_err();
        assert!(format!("{err}").contains("topic t1 received zero total score"));
        let prior = soft_labels(&scores(&[&[0.0, 0.0], &[0.2, 0.7]])).unwrap();
        assert_eq!(prior.row(0), &[0.5, 0.5]);
        assert_eq!(prior.flagged(), &[0]);
    }

    #[test]
    fn hard_label_cases() {
        let prior = hard_labels(&scores(&[&[0.9, 0.1], &[0.8, 0.7], &[0.2, 0.3]]), 0.5).unwrap();
        assert_eq!(prior.row(0), &[1.0, 0.0]);
        assert_eq!(prior.row(1), &[0.5, 0.5]);
        assert_eq!(prior.row(2), &[0.5, 0.5]);
        assert_eq!(prior.flagged(), &[2]);
        assert!(hard_labels(&scores(&[&[0.9, 0.1]]), 1.0).is_err());
    }

    #[test]
    fn out_of_range_score_reports_location() {
        let p = Matrix::from_rows(&[[0.2, 1.3]]).unwrap();
        let err = ScoreMatrix::new(p, vec!["doc7".into()], vec!["a".into(), "b".into()]).unwrap_err();
        assert!(format!("{err}").contains("score out of range at doc doc7, topic b"));
    }

    fn corpus3() -> Corpus {
        let docs = ["aa bb", "bb cc", "cc aa"]
            .iter()
            .enumerate()
            .map(|(i, t)| RawDocument::new(format!("d{i}"), *t))
            .collect::<Vec<_>>();
        preprocess(&docs, &PreprocessRules::permissive()).unwrap()
    }

    #[test]
    fn align_reorders_rows_and_columns() {
        let corpus = corpus3();
        let names = vec![String::from("x"), String::from("y")];
        let rows = vec![
            ("d2".into(), vec![0.2, 0.8]),
            ("d0".into(), vec![0.0, 1.0]),
            ("d1".into(), vec![0.4, 0.6]),
        ];
        let cols = vec![String::from("y"), String::from("x")];
        let s = ScoreMatrix::align(rows, &cols, &corpus, &names).unwrap();
        assert_eq!(s.scores().row(0), &[1.0, 0.0]);
        assert_eq!(s.scores().row(2), &[0.8, 0.2]);
    }

    #[test]
    fn align_lists_missing_documents_and_unknown_names() {
        let corpus = corpus3();
        let names = vec![String::from("x"), String::from("y")];
        let cols = names.clone();
        let err = ScoreMatrix::align(vec![("d0".into(), vec![0.1, 0.2])], &cols, &corpus, &names).unwrap_err();
        assert!(format!("{err}").contains("d1, d2"));
        let cols = vec![String::from("x"), String::from("y"), String::from("z")];
        let rows = (0..3).map(|i| (format!("d{i}"), vec![0.1, 0.2, 0.3])).collect();
        let err = ScoreMatrix::align(rows, &cols, &corpus, &names).unwrap_err();
        assert!(format!("{err}").contains("unknown topic 'z'"));
    }

    #[test]
    fn proxy_scores_cosine_cases() {
        let corpus = corpus3();
        // vocab order: aa, bb, cc (all count 2, lexicographic)
        let emb = VocabEmbedding {
            matrix: Matrix::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]).unwrap(),
            missing: BTreeSet::new(),
        };
        let names = vec![String::from("n0"), String::from("n1")];
        let name_vectors = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
        let s = proxy_scores(&corpus, &emb, &names, &name_vectors).unwrap();
        // d0 centroid direction (1, 1): equal to n0, orthogonal to n1
        assert!((s.scores().get(0, 0) - 1.0).abs() < 1e-12);
        assert!((s.scores().get(0, 1) - 0.5).abs() < 1e-12);
        // d1 = bb + cc = (1, 2)
        let brute = |c: [f64; 2], n: [f64; 2]| {
            let cos = (c[0] * n[0] + c[1] * n[1])
                / ((c[0] * c[0] + c[1] * c[1]).sqrt() * (n[0] * n[0] + n[1] * n[1]).sqrt());
            (cos + 1.0) / 2.0
        };
        assert!((s.scores().get(1, 0) - brute([1.0, 2.0], [1.0, 1.0])).abs() < 1e-12);
        assert!((s.scores().get(1, 1) - brute([1.0, 2.0], [1.0, -1.0])).abs() < 1e-12);
        assert!((s.scores().get(2, 1) - brute([2.0, 1.0], [1.0, -1.0])).abs() < 1e-12);
    }
}
