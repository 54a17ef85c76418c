//! Comparing corpora through their models' projections onto a shared
//! reference vocabulary.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// A model's topic-word distributions over the reference vocabulary, with the
/// identity of that reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedTopics {
    pub names: Vec<String>,
    pub ref_vocab: Vec<String>,
    /// Digest of the reference vocabulary recorded when the model was trained.
    pub ref_vocab_hash: String,
    /// k x V_ref
    pub beta_tilde: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    pub names: Vec<String>,
    /// `KL(a_j || b_j)` per topic.
    pub per_topic_kl: Vec<f64>,
    /// Topic names by descending divergence, ties by topic id.
    pub ranking: Vec<String>,
}

/// Per-topic `KL(a_j || b_j)` over the shared reference vocabulary.
pub fn corpus_divergence(a: &ProjectedTopics, b: &ProjectedTopics) -> Result<ComparisonReport> {
    let mut differing = Vec::new();
    if a.names != b.names {
        differing.push("names");
    }
    if a.ref_vocab != b.ref_vocab {
        differing.push("ref_vocab");
    }
    if a.ref_vocab_hash != b.ref_vocab_hash {
        differing.push("ref_vocab_hash");
    }
    if a.beta_tilde.rows() != b.beta_tilde.rows() || a.beta_tilde.cols() != b.beta_tilde.cols() {
        differing.push("beta_tilde shape");
    }
    if !differing.is_empty() {
        return Err(Error::invalid(alloc::format!(
            "models were trained against different references (differing: {})",
            differing.join(", ")
        )));
    }
    let per_topic_kl: Vec<f64> = a
        .beta_tilde
        .row_iter()
        .zip(b.beta_tilde.row_iter())
        .map(|(p, q)| linalg::kl_divergence(p, q).max(0.0))
        .collect();
    let ranking = linalg::argsort_desc(&per_topic_kl)
        .into_iter()
        .map(|j| a.names[j].clone())
        .collect();
    Ok(ComparisonReport {
        names: a.names.clone(),
        per_topic_kl,
        ranking,
    })
}

/// Top `n` target-vocabulary words of one topic.
pub fn context_words(beta: &Matrix, vocab: &[String], topic: usize, n: usize) -> Result<Vec<String>> {
    if topic >= beta.rows() {
        return Err(Error::invalid(alloc::format!(
            "topic {topic} out of range for {} topics",
            beta.rows()
        )));
    }
    let single = Matrix::from_rows(&[beta.row(topic)]).expect("one row");
    Ok(crate::ectm::top_words(&single, vocab, n)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::LN_2;

    fn projected(rows: &[[f64; 2]]) -> ProjectedTopics {
        ProjectedTopics {
            names: (0..rows.len()).map(|i| alloc::format!("t{i}")).collect(),
            ref_vocab: vec!["a".into(), "b".into()],
            ref_vocab_hash: "h".into(),
            beta_tilde: Matrix::from_rows(rows).unwrap(),
        }
    }

    #[test]
    fn self_comparison_is_zero_with_id_ranking() {
        let a = projected(&[[0.2, 0.8], [0.6, 0.4], [0.5, 0.5]]);
        let r = corpus_divergence(&a, &a).unwrap();
        assert_eq!(r.per_topic_kl, vec![0.0; 3]);
        assert_eq!(r.ranking, vec!["t0", "t1", "t2"]);
    }

    #[test]
    fn near_one_hot_against_uniform_is_ln2() {
        let eps = 1e-12;
        let a = projected(&[[1.0 - eps, eps], [0.5, 0.5]]);
        let b = projected(&[[0.5, 0.5], [0.5, 0.5]]);
        let r = corpus_divergence(&a, &b).unwrap();
        assert!((r.per_topic_kl[0] - LN_2).abs() < 1e-9);
        assert_eq!(r.ranking[0], "t0");
    }

    #[test]
    fn reference_mismatch_lists_fields() {
        let a = projected(&[[0.5, 0.5], [0.5, 0.5]]);
        let mut b = a.clone();
        b.names[1] = "other".into();
        b.ref_vocab_hash = "g".into();
        let err = corpus_divergence(&a, &b).unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("names") && msg.contains("ref_vocab_hash"));
    }

    #[test]
    fn context_words_cases() {
        let vocab: Vec<String> = ["x", "y", "z"].iter().map(|s| String::from(*s)).collect();
        let beta = Matrix::from_rows(&[[0.2, 0.5, 0.3], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]).unwrap();
        assert_eq!(context_words(&beta, &vocab, 0, 2).unwrap(), vec!["y", "z"]);
        assert_eq!(context_words(&beta, &vocab, 1, 2).unwrap(), vec!["x", "y"]);
        assert_eq!(context_words(&beta, &vocab, 1, 3).unwrap().len(), 3);
        assert!(context_words(&beta, &vocab, 2, 1).is_err());
    }
}
