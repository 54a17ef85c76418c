//! Word embedding tables and their projection onto a vocabulary.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// Standard deviation of the fallback vectors for out-of-table words.
pub const FALLBACK_STD: f64 = 0.1;

/// Default seed for fallback vectors.
pub const DEFAULT_EMBED_SEED: u64 = 13;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    /// Adds or replaces the vector for `word`.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(Error::shape(
                "embedding vector",
                alloc::format!("{}", self.dim),
                alloc::format!("{} for '{word}'", vector.len()),
            ));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(alloc::format!("non-finite entry in embedding of '{word}'")));
        }
        self.vectors.insert(word, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }
}

/// Embedding matrix (L x V) for one vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabEmbedding {
    pub matrix: Matrix,
    /// Vocabulary ids whose column came from the fallback generator.
    pub missing: BTreeSet<usize>,
}

impl VocabEmbedding {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn column(&self, w: usize) -> Vec<f64> {
        (0..self.matrix.rows()).map(|l| self.matrix.get(l, w)).collect()
    }
}

/// Deterministic stand-in vector for a word absent from the table:
/// i.i.d. `N(0, FALLBACK_STD^2)` entries seeded by the word and `seed`.
pub fn fallback_vector(word: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::seeded(rng::mix64(rng::fnv1a(word.as_bytes()) ^ rng::mix64(seed)));
    let normal = Normal::new(0.0, FALLBACK_STD).expect("positive std");
    (0..dim).map(|_| normal.sample(&mut rng)).collect()
}

/// Builds the fixed L x V embedding matrix for `vocab`.
///
/// Words in the table are copied; others get [`fallback_vector`]. Because
/// every column depends only on its word, a word shared by two vocabularies
/// receives the same column in both projections.
pub fn project_vocab(table: &EmbeddingTable, vocab: &[String], seed: u64) -> Result<VocabEmbedding> {
    if vocab.is_empty() {
        return Err(Error::invalid("cannot project an empty vocabulary"));
    }
    let dim = table.dim();
    let mut matrix = Matrix::zeros(dim, vocab.len());
    let mut missing = BTreeSet::new();
    for (w, word) in vocab.iter().enumerate() {
        let column = match table.get(word) {
            Some(v) => v.to_vec(),
            None => {
                missing.insert(w);
                fallback_vector(word, dim, seed)
            }
        };
        for (l, x) in column.into_iter().enumerate() {
            matrix.set(l, w, x);
        }
    }
    if !missing.is_empty() {
        log::warn!(
            "{} of {} vocabulary words missing from embeddings; using seeded fallback vectors",
            missing.len(),
            vocab.len()
        );
    }
    Ok(VocabEmbedding { matrix, missing })
}
