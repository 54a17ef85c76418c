//! Labeled LDA by collapsed Gibbs sampling, producing the reference
//! topic-word representation.
//!
//! Each document may only draw topic assignments from its own label set; with
//! that constraint the sampler is ordinary collapsed Gibbs for LDA.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LldaConfig {
    /// Document-topic Dirichlet concentration.
    pub alpha: f64,
    /// Topic-word Dirichlet concentration.
    pub eta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Iterations between averaged samples after burn-in.
    pub sample_lag: usize,
    pub seed: u64,
}

impl Default for LldaConfig {
    fn default() -> Self {
        LldaConfig {
            alpha: 0.1,
            eta: 0.01,
            iterations: 1000,
            burn_in: 500,
            sample_lag: 10,
            seed: 0,
        }
    }
}

impl LldaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.eta > 0.0) {
            return Err(Error::invalid("LLDA alpha and eta must be positive"));
        }
        if self.iterations == 0 || self.sample_lag == 0 {
            return Err(Error::invalid("LLDA iterations and sample_lag must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::invalid(alloc::format!(
                "LLDA burn_in ({}) must be smaller than iterations ({})",
                self.burn_in,
                self.iterations
            )));
        }
        Ok(())
    }
}

/// Named reference topics with their row-stochastic topic-word matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTopics {
    names: Vec<String>,
    vocab: Vec<String>,
    beta: Matrix,
}

/// Row-sum tolerance for reference matrices.
pub const ROW_SUM_TOL: f64 = 1e-9;

impl ReferenceTopics {
    pub fn new(names: Vec<String>, vocab: Vec<String>, beta: Matrix) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::invalid("k >= 2 required"));
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::invalid(alloc::format!("duplicate topic name '{n}'")));
            }
        }
        let mut seen = BTreeSet::new();
        for w in &vocab {
            if !seen.insert(w.as_str()) {
                return Err(Error::invalid(alloc::format!("duplicate reference vocabulary word '{w}'")));
            }
        }
        if beta.rows() != names.len() || beta.cols() != vocab.len() {
            return Err(Error::shape(
                "reference beta",
                alloc::format!("{}x{}", names.len(), vocab.len()),
                beta.shape_str(),
            ));
        }
        for (j, row) in beta.row_iter().enumerate() {
            if let Some(bad) = row.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::invalid(alloc::format!(
                    "reference topic '{}' has non-positive entry {bad}",
                    names[j]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(alloc::format!(
                    "reference topic '{}' sums to {sum}, not 1",
                    names[j]
                )));
            }
        }
        Ok(ReferenceTopics { names, vocab, beta })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn beta(&self) -> &Matrix {
        &self.beta
    }

    pub fn num_topics(&self) -> usize {
        self.names.len()
    }

    pub fn topic_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Trains Labeled LDA on `corpus` for the given topics.
pub fn train_llda(corpus: &Corpus, topic_names: &[String], config: &LldaConfig) -> Result<ReferenceTopics> {
    train_llda_observed(corpus, topic_names, config, |_, _, _| {})
}

/// Like [`train_llda`], calling `observe(doc, token_position, topic)` after
/// every sampled assignment, including initialization.
pub fn train_llda_observed(
    corpus: &Corpus,
    topic_names: &[String],
    config: &LldaConfig,
    mut observe: impl FnMut(usize, usize, usize),
) -> Result<ReferenceTopics> {
    config.validate()?;
    let k = topic_names.len();
    if k < 2 {
        return Err(Error::invalid("k >= 2 required"));
    }
    let label_sets = document_label_sets(corpus, topic_names)?;
    let v = corpus.vocab_size();
    let eta = config.eta;
    let v_eta = v as f64 * eta;

    let mut rng = rng::seeded(config.seed);
    let mut n_kw = vec![0u32; k * v];
    let mut n_k = vec![0u32; k];
    let mut n_dk = vec![vec![0u32; k]; corpus.num_docs()];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(corpus.num_docs());

    for (d, labels) in label_sets.iter().enumerate() {
        let mut zd = Vec::with_capacity(corpus.doc_len(d));
        for (i, &w) in corpus.doc(d).iter().enumerate() {
            let t = labels[rng.random_range(0..labels.len())];
            n_kw[t * v + w] += 1;
            n_k[t] += 1;
            n_dk[d][t] += 1;
            observe(d, i, t);
            zd.push(t);
        }
        z.push(zd);
    }

    let mut weights = vec![0.0; k];
    let mut accum = Matrix::zeros(k, v);
    let mut samples = 0usize;
    for it in 0..config.iterations {
        for (d, labels) in label_sets.iter().enumerate() {
            for (i, &w) in corpus.doc(d).iter().enumerate() {
                let old = z[d][i];
                n_kw[old * v + w] -= 1;
                n_k[old] -= 1;
                n_dk[d][old] -= 1;

                let mut total = 0.0;
                for (slot, &t) in labels.iter().enumerate() {
                    let p = (f64::from(n_dk[d][t]) + config.alpha) * (f64::from(n_kw[t * v + w]) + eta)
                        / (f64::from(n_k[t]) + v_eta);
                    total += p;
                    weights[slot] = total;
                }
                let u = rng.random::<f64>() * total;
                let slot = weights[..labels.len()].iter().position(|&c| u < c).unwrap_or(labels.len() - 1);
                let t = labels[slot];

                n_kw[t * v + w] += 1;
                n_k[t] += 1;
                n_dk[d][t] += 1;
                z[d][i] = t;
                observe(d, i, t);
            }
        }
        if it >= config.burn_in && (it - config.burn_in) % config.sample_lag == 0 {
            for t in 0..k {
                let denom = f64::from(n_k[t]) + v_eta;
                for (w, slot) in accum.row_mut(t).iter_mut().enumerate() {
                    *slot += (f64::from(n_kw[t * v + w]) + eta) / denom;
                }
            }
            samples += 1;
        }
    }

    let scale = 1.0 / samples as f64;
    for t in 0..k {
        let row = accum.row_mut(t);
        for x in row.iter_mut() {
            *x *= scale;
        }
        crate::linalg::normalize_in_place(row);
    }
    ReferenceTopics::new(topic_names.to_vec(), corpus.vocab().to_vec(), accum)
}

/// Maps each document's labels onto indices of `topic_names`.
fn document_label_sets(corpus: &Corpus, topic_names: &[String]) -> Result<Vec<Vec<usize>>> {
    let labels = corpus
        .labels()
        .ok_or_else(|| Error::invalid("reference corpus carries no labels"))?;
    let mut name_to_topic = Vec::with_capacity(corpus.label_names().len());
    for name in corpus.label_names() {
        let t = topic_names.iter().position(|n| n == name).ok_or_else(|| {
            Error::invalid(alloc::format!("corpus label '{name}' is not among the topic names"))
        })?;
        name_to_topic.push(t);
    }
    let mut used = vec![false; topic_names.len()];
    let mut sets = Vec::with_capacity(labels.len());
    for (d, ls) in labels.iter().enumerate() {
        if ls.is_empty() {
            return Err(Error::invalid(alloc::format!(
                "document '{}' has an empty label set",
                corpus.doc_ids()[d]
            )));
        }
        let mut set: Vec<usize> = ls.iter().map(|&l| name_to_topic[l]).collect();
        set.sort_unstable();
        set.dedup();
        for &t in &set {
            used[t] = true;
        }
        sets.push(set);
    }
    if let Some(t) = used.iter().position(|u| !u) {
        return Err(Error::invalid(alloc::format!(
            "topic '{}' is not assigned to any document",
            topic_names[t]
        )));
    }
    Ok(sets)
}

/// Averages reference matrices from independent chains in the given order.
pub fn average_references(chains: &[ReferenceTopics]) -> Result<ReferenceTopics> {
    let first = chains.first().ok_or_else(|| Error::invalid("no chains to average"))?;
    let mut acc = Matrix::zeros(first.beta.rows(), first.beta.cols());
    for c in chains {
        if c.names != first.names || c.vocab != first.vocab {
            return Err(Error::invalid("chains disagree on topics or vocabulary"));
        }
        crate::linalg::axpy(1.0, c.beta.as_slice(), acc.as_mut_slice());
    }
    for t in 0..acc.rows() {
        crate::linalg::normalize_in_place(acc.row_mut(t));
    }
    ReferenceTopics::new(first.names.clone(), first.vocab.clone(), acc)
}
