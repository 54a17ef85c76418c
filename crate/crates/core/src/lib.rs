//! Coordinated topic modeling.
//!
//! A target corpus is modeled over a fixed set of named topics whose reference
//! topic-word distributions act as semantic axes. The crate holds the numerical
//! core: preprocessing, Labeled LDA for the reference representation, prior
//! generation from surface-name scores, the embedded coordinated topic model
//! with hand-derived gradients, topic-quality metrics and corpus comparison.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! everything touching the operating system live in the `ctm` crate.
#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod compare;
pub mod corpus;
pub mod ectm;
pub mod embeddings;
mod error;
pub mod linalg;
pub mod llda;
pub mod metrics;
pub mod prior;
pub mod rng;
pub mod synthetic;

pub use compare::{context_words, corpus_divergence, ComparisonReport, ProjectedTopics};
pub use corpus::{normalized_bow, preprocess, Corpus, PreprocessRules, RawDocument};
pub use ectm::{EctmConfig, EctmModel, LossBreakdown, TrainOutcome};
pub use embeddings::{project_vocab, EmbeddingTable, VocabEmbedding};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use llda::{train_llda, LldaConfig, ReferenceTopics};
pub use prior::{hard_labels, proxy_scores, soft_labels, PriorMatrix, ScoreMatrix};
