//! Topic coherence (NPMI), topic diversity, topic quality and classification scores.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Top words per topic used for coherence.
pub const COHERENCE_TOP_N: usize = 10;
/// Top words per topic used for diversity.
pub const DIVERSITY_TOP_N: usize = 25;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TopicQualityReport {
    pub tc: f64,
    pub td: f64,
    pub tq: f64,
    /// Coherence of each topic separately.
    pub per_topic_tc: Vec<f64>,
}

/// Document-level co-occurrence statistics over a corpus.
#[derive(Debug, Clone)]
pub struct CooccurrenceIndex {
    num_docs: usize,
    /// Sorted document ids containing each word.
    postings: Vec<Vec<u32>>,
    word_ids: BTreeMap<String, usize>,
}

impl CooccurrenceIndex {
    pub fn new(corpus: &Corpus) -> Self {
        let mut postings = vec![Vec::new(); corpus.vocab_size()];
        for d in 0..corpus.num_docs() {
            for &(w, _) in corpus.counts(d) {
                postings[w].push(d as u32);
            }
        }
        let word_ids = corpus.vocab().iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        CooccurrenceIndex {
            num_docs: corpus.num_docs(),
            postings,
            word_ids,
        }
    }

    fn id(&self, word: &str) -> Result<usize> {
        self.word_ids
            .get(word)
            .copied()
            .ok_or_else(|| Error::invalid(alloc::format!("word '{word}' is not in the coherence corpus")))
    }

    fn joint(&self, a: usize, b: usize) -> usize {
        let (pa, pb) = (&self.postings[a], &self.postings[b]);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Normalized PMI of two words under boolean document co-occurrence.
    pub fn npmi(&self, a: &str, b: &str) -> Result<f64> {
        let (a, b) = (self.id(a)?, self.id(b)?);
        Ok(npmi_from_counts(
            self.postings[a].len(),
            self.postings[b].len(),
            self.joint(a, b),
            self.num_docs,
        ))
    }
}

/// NPMI from document counts. Pairs that never co-occur score -1, pairs
/// present together in every document score 1.
pub fn npmi_from_counts(df_a: usize, df_b: usize, joint: usize, num_docs: usize) -> f64 {
    if joint == 0 || num_docs == 0 {
        return -1.0;
    }
    if joint == num_docs {
        return 1.0;
    }
    let n = num_docs as f64;
    let p_ab = joint as f64 / n;
    // Fixed operand order keeps the result exactly symmetric.
    let (lo, hi) = (df_a.min(df_b) as f64 / n, df_a.max(df_b) as f64 / n);
    (linalg::ln(p_ab) - linalg::ln(lo) - linalg::ln(hi)) / -linalg::ln(p_ab)
}

/// Mean NPMI over all unordered pairs within each topic, averaged over topics.
/// Returns the overall value and the per-topic values.
pub fn topic_coherence_detailed(top_words: &[Vec<String>], index: &CooccurrenceIndex) -> Result<(f64, Vec<f64>)> {
    if top_words.is_empty() {
        return Err(Error::invalid("no topics to score"));
    }
    let mut per_topic = Vec::with_capacity(top_words.len());
    for words in top_words {
        if words.len() < 2 {
            return Err(Error::invalid("coherence needs at least two words per topic"));
        }
        let mut total = 0.0;
        let mut pairs = 0usize;
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                total += index.npmi(&words[i], &words[j])?;
                pairs += 1;
            }
        }
        per_topic.push(total / pairs as f64);
    }
    let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok((mean, per_topic))
}

pub fn topic_coherence(top_words: &[Vec<String>], corpus: &Corpus) -> Result<f64> {
    topic_coherence_detailed(top_words, &CooccurrenceIndex::new(corpus)).map(|(tc, _)| tc)
}

/// Fraction of distinct words among all topics' top-`n` lists.
pub fn topic_diversity(top_words: &[Vec<String>], n: usize) -> Result<f64> {
    if top_words.is_empty() || n == 0 {
        return Err(Error::invalid("topic diversity needs at least one non-empty list"));
    }
    if let Some((j, l)) = top_words.iter().enumerate().find(|(_, l)| l.len() != n) {
        return Err(Error::invalid(alloc::format!(
            "topic {j} lists {} words, expected {n}",
            l.len()
        )));
    }
    let distinct: BTreeSet<&str> = top_words.iter().flatten().map(String::as_str).collect();
    Ok(distinct.len() as f64 / (n * top_words.len()) as f64)
}

pub fn topic_quality(tc: f64, td: f64) -> f64 {
    tc * td
}

/// Coherence from the top-10 words, diversity from the top-25 words of `beta`
/// (both capped at the vocabulary size), and their product.
pub fn topic_quality_report(
    beta: &Matrix,
    vocab: &[String],
    coherence_corpus: &Corpus,
    coherence_n: usize,
    diversity_n: usize,
) -> Result<TopicQualityReport> {
    let tc_words = crate::ectm::top_words(beta, vocab, coherence_n.min(vocab.len()))?;
    let td_n = diversity_n.min(vocab.len());
    let td_words = crate::ectm::top_words(beta, vocab, td_n)?;
    let (tc, per_topic_tc) = topic_coherence_detailed(&tc_words, &CooccurrenceIndex::new(coherence_corpus))?;
    let td = topic_diversity(&td_words, td_n)?;
    Ok(TopicQualityReport {
        tc,
        td,
        tq: topic_quality(tc, td),
        per_topic_tc,
    })
}

/// Argmax topic per row, lowest id on ties.
pub fn classify(theta: &Matrix) -> Vec<usize> {
    theta.row_iter().map(linalg::argmax).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

/// Accuracy, macro-F1 and micro-F1 over `num_classes` labels. Classes with no
/// true positives contribute an F1 of 0 to the macro average.
pub fn classification_report(pred: &[usize], gold: &[usize], num_classes: usize) -> Result<ClassificationReport> {
    if pred.len() != gold.len() {
        return Err(Error::invalid(alloc::format!(
            "prediction count {} differs from gold count {}",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    if let Some(&bad) = pred.iter().chain(gold).find(|&&c| c >= num_classes) {
        return Err(Error::invalid(alloc::format!("label {bad} outside {num_classes} classes")));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &g) in pred.iter().zip(gold) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 || tp == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let macro_f1 = (0..num_classes).map(|c| f1(tp[c], fp[c], fn_[c])).sum::<f64>() / num_classes as f64;
    let (stp, sfp, sfn) = (tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let micro_f1 = f1(stp, sfp, sfn);
    Ok(ClassificationReport {
        accuracy: stp as f64 / pred.len() as f64,
        macro_f1,
        micro_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| String::from(*w)).collect()
    }

    #[test]
    fn npmi_hand_cases() {
        // always together, each in half the docs
        assert!((npmi_from_counts(2, 2, 2, 4) - 1.0).abs() < 1e-12);
        assert_eq!(npmi_from_counts(2, 2, 0, 4), -1.0);
        // independent: joint = product of marginals
        assert!(npmi_from_counts(2, 2, 1, 4).abs() < 1e-12);
    }

    #[test]
    fn diversity_cases() {
        let a: Vec<String> = (0..25).map(|i| alloc::format!("w{i}")).collect();
        let b: Vec<String> = (25..50).map(|i| alloc::format!("w{i}")).collect();
        assert_eq!(topic_diversity(&[a.clone(), b], 25).unwrap(), 1.0);
        assert_eq!(topic_diversity(&[a.clone(), a.clone()], 25).unwrap(), 0.5);
        assert!(topic_diversity(&[s(&["x"])], 25).is_err());
    }

    #[test]
    fn quality_is_product() {
        assert!((topic_quality(0.30, 1.00) - 0.30).abs() < 1e-15);
        assert_eq!(topic_quality(0.7, 0.0), 0.0);
        assert!((topic_quality(0.28, 0.97) - 0.2716).abs() < 1e-12);
    }

    #[test]
    fn classify_ties_go_low() {
        let theta = Matrix::from_rows(&[
            vec![0.7, 0.2, 0.1, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.25, 0.25, 0.25, 0.25],
        ])
        .unwrap();
        assert_eq!(classify(&theta), vec![0, 0, 0]);
    }

    #[test]
    fn classification_hand_confusion_matrix() {
        let r = classification_report(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.micro_f1, 0.5);
        let r = classification_report(&[2, 1, 0], &[2, 1, 0], 3).unwrap();
        assert_eq!((r.accuracy, r.macro_f1, r.micro_f1), (1.0, 1.0, 1.0));
        assert!(classification_report(&[0], &[0, 1], 2).is_err());
    }
}
