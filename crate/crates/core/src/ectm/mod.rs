//! The embedded coordinated topic model.
//!
//! Topics are embeddings `alpha` (L x k) in the same space as the fixed word
//! embeddings of the target vocabulary (`rho`, L x V) and of the reference
//! vocabulary (`rho_tilde`, L x V_ref). From the same `alpha` the model
//! produces the target topic-word matrix `beta = softmax(rho^T alpha)` and its
//! projection onto the reference vocabulary, which is pulled towards the
//! reference topics. Documents are encoded by a two-hidden-layer perceptron
//! into a Gaussian over logits; topic proportions are the softmax of a draw.
//!
//! Training minimizes
//!
//! ```text
//! neg_recon + kl_gauss + lambda_beta * r_beta + lambda_theta * r_theta
//! ```
//!
//! with gradients derived by hand in [`forward`].

use crate::linalg::Matrix;

pub mod forward;
pub mod model;
pub mod train;

pub use forward::{
    encode, gradients, loss, reconstruct, sample_theta, topic_matrices, Encoded, Noise, TopicMatrices,
};
pub use model::{init_model, EctmModel, Encoder, Params};
pub use train::{infer_theta, self_training_update, top_words, train, Adam, TrainOutcome, TrainStatus};

/// What the encoder sees for each document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EncoderInput {
    /// Counts divided by document length.
    #[default]
    Normalized,
    /// Raw counts.
    Counts,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EctmConfig {
    pub num_topics: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_beta: f64,
    pub lambda_theta: f64,
    /// Optimizer steps between prior refreshes.
    pub self_train_period: usize,
    /// Weight kept on the old prior in each refresh.
    pub self_train_blend: f64,
    pub self_training: bool,
    pub seed: u64,
    /// Use `log((theta^T beta + b) / 2)` instead of `log(theta^T beta + b)`.
    pub normalize_recon: bool,
    /// When false the background bias is all zeros.
    pub background_bias: bool,
    pub encoder_input: EncoderInput,
}

impl Default for EctmConfig {
    fn default() -> Self {
        EctmConfig {
            num_topics: 2,
            embed_dim: 300,
            hidden: 300,
            lr: 0.005,
            epochs: 150,
            batch_size: 256,
            lambda_beta: 20.0,
            lambda_theta: 35.0,
            self_train_period: 50,
            self_train_blend: 0.5,
            self_training: true,
            seed: 0,
            normalize_recon: false,
            background_bias: true,
            encoder_input: EncoderInput::Normalized,
        }
    }
}

impl EctmConfig {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if self.num_topics < 2 {
            return Err(Error::invalid("k >= 2 required"));
        }
        if self.embed_dim == 0 || self.hidden == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("embed_dim, hidden, epochs and batch_size must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.lambda_beta >= 0.0 && self.lambda_theta >= 0.0) {
            return Err(Error::invalid("regularization weights must be nonnegative"));
        }
        if self.self_train_period == 0 {
            return Err(Error::invalid("self_train_period must be positive"));
        }
        if !(0.0..=1.0).contains(&self.self_train_blend) {
            return Err(Error::invalid("self_train_blend must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// The four terms of the minimized objective and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    pub neg_recon: f64,
    pub kl_gauss: f64,
    pub r_beta: f64,
    pub r_theta: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(neg_recon: f64, kl_gauss: f64, r_beta: f64, r_theta: f64, lambda_beta: f64, lambda_theta: f64) -> Self {
        LossBreakdown {
            neg_recon,
            kl_gauss,
            r_beta,
            r_theta,
            total: neg_recon + kl_gauss + lambda_beta * r_beta + lambda_theta * r_theta,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }

    /// Mean of several breakdowns, term by term.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let n = items.len().max(1) as f64;
        let mut m = LossBreakdown::default();
        for b in items {
            m.neg_recon += b.neg_recon / n;
            m.kl_gauss += b.kl_gauss / n;
            m.r_beta += b.r_beta / n;
            m.r_theta += b.r_theta / n;
            m.total += b.total / n;
        }
        m
    }
}

/// `(1/k) sum_j KL(reference_j || projected_j)`, the unweighted topic-level term.
pub fn reference_divergence(reference: &Matrix, projected: &Matrix) -> f64 {
    let k = reference.rows();
    let total: f64 = reference
        .row_iter()
        .zip(projected.row_iter())
        .map(|(p, q)| crate::linalg::kl_divergence(p, q))
        .sum();
    total / k as f64
}

pub(crate) fn vec_is_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}
