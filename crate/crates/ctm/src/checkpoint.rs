//! Model checkpoints: the trained parameters together with everything needed
//! to check that later inputs line up with them.

use std::path::Path;

use ctm_core::ectm::{self, TrainOutcome, TrainStatus};
use ctm_core::{Corpus, EctmModel, LossBreakdown, Matrix, ProjectedTopics, ReferenceTopics};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::formats;

pub const FORMAT: &str = "ctm-checkpoint/1";

/// SHA-256 of the newline-joined word list.
pub fn vocab_hash(words: &[String]) -> String {
    let mut h = Sha256::new();
    for w in words {
        h.update(w.as_bytes());
        h.update(b"\n");
    }
    format!("{:x}", h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub seed: u64,
    pub embed_seed: u64,
    pub vocab: Vec<String>,
    pub vocab_hash: String,
    pub reference_names: Vec<String>,
    pub reference_vocab: Vec<String>,
    pub reference_vocab_hash: String,
    pub model: EctmModel,
    /// Document ids of the training corpus, in prior row order.
    pub doc_ids: Vec<String>,
    /// Prior after the last self-training refresh.
    pub final_prior: Matrix,
    pub history: Vec<LossBreakdown>,
    pub steps: usize,
    pub status: TrainStatus,
}

impl Checkpoint {
    pub fn new(
        outcome: &TrainOutcome,
        corpus: &Corpus,
        reference: &ReferenceTopics,
        seed: u64,
        embed_seed: u64,
    ) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            seed,
            embed_seed,
            vocab: corpus.vocab().to_vec(),
            vocab_hash: vocab_hash(corpus.vocab()),
            reference_names: reference.names().to_vec(),
            reference_vocab: reference.vocab().to_vec(),
            reference_vocab_hash: vocab_hash(reference.vocab()),
            model: outcome.model.clone(),
            doc_ids: outcome.prior.doc_ids().to_vec(),
            final_prior: outcome.prior.theta().clone(),
            history: outcome.history.clone(),
            steps: outcome.steps,
            status: outcome.status,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        formats::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = formats::read_json(path)?;
        if ck.format != FORMAT {
            return Err(Error::parse(path, None, format!("unsupported checkpoint format '{}'", ck.format)));
        }
        if ck.vocab_hash != vocab_hash(&ck.vocab) || ck.reference_vocab_hash != vocab_hash(&ck.reference_vocab) {
            return Err(Error::parse(path, None, "vocabulary hash does not match stored vocabulary"));
        }
        let m = &ck.model;
        if m.vocab_size() != ck.vocab.len()
            || m.ref_vocab_size() != ck.reference_vocab.len()
            || m.num_topics() != ck.reference_names.len()
        {
            return Err(Error::parse(path, None, "parameter shapes disagree with stored vocabularies"));
        }
        Ok(ck)
    }

    /// Fails unless `corpus` uses exactly the training vocabulary.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        if vocab_hash(corpus.vocab()) != self.vocab_hash {
            return Err(Error::Invalid(format!(
                "corpus vocabulary ({} words) differs from the model's ({} words)",
                corpus.vocab_size(),
                self.vocab.len()
            )));
        }
        Ok(())
    }

    pub fn topic_index(&self, name: &str) -> Result<usize> {
        self.reference_names
            .iter()
            .position(|n| n == name)
            .or_else(|| name.parse::<usize>().ok().filter(|&i| i < self.reference_names.len()))
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "unknown topic '{name}' (topics: {})",
                    self.reference_names.join(", ")
                ))
            })
    }

    pub fn projected(&self) -> ProjectedTopics {
        ProjectedTopics {
            names: self.reference_names.clone(),
            ref_vocab: self.reference_vocab.clone(),
            ref_vocab_hash: self.reference_vocab_hash.clone(),
            beta_tilde: ectm::topic_matrices(&self.model).beta_tilde,
        }
    }
}
