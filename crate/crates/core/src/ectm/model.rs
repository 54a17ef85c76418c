use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::EctmConfig;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;

/// Standard deviation of the initial topic embeddings.
pub const ALPHA_INIT_STD: f64 = 0.02;

/// Two hidden softplus layers followed by linear heads for the mean and
/// log-variance of the logit Gaussian.
///
/// The input layer is stored one row per vocabulary word (V x H) so sparse
/// documents touch only their own rows.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Encoder {
    pub w_in: Matrix,
    pub b_in: Vec<f64>,
    pub w_hidden: Matrix,
    pub b_hidden: Vec<f64>,
    pub w_mu: Matrix,
    pub b_mu: Vec<f64>,
    pub w_logvar: Matrix,
    pub b_logvar: Vec<f64>,
}

impl Encoder {
    pub fn zeros(vocab: usize, hidden: usize, k: usize) -> Self {
        Encoder {
            w_in: Matrix::zeros(vocab, hidden),
            b_in: vec![0.0; hidden],
            w_hidden: Matrix::zeros(hidden, hidden),
            b_hidden: vec![0.0; hidden],
            w_mu: Matrix::zeros(k, hidden),
            b_mu: vec![0.0; k],
            w_logvar: Matrix::zeros(k, hidden),
            b_logvar: vec![0.0; k],
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_in.len()
    }
}

/// Every trainable tensor. Gradients share this shape.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Params {
    /// Topic embeddings, L x k; column `j` embeds topic `j`.
    pub alpha: Matrix,
    pub encoder: Encoder,
}

/// Names of the trainable tensors in the order of [`Params::tensors`].
pub const TENSOR_NAMES: [&str; 9] = [
    "alpha", "w_in", "b_in", "w_hidden", "b_hidden", "w_mu", "b_mu", "w_logvar", "b_logvar",
];

impl Params {
    pub fn zeros_like(&self) -> Params {
        Params {
            alpha: Matrix::zeros(self.alpha.rows(), self.alpha.cols()),
            encoder: Encoder::zeros(self.encoder.w_in.rows(), self.encoder.hidden(), self.alpha.cols()),
        }
    }

    pub fn tensors(&self) -> [&[f64]; 9] {
        let e = &self.encoder;
        [
            self.alpha.as_slice(),
            e.w_in.as_slice(),
            &e.b_in,
            e.w_hidden.as_slice(),
            &e.b_hidden,
            e.w_mu.as_slice(),
            &e.b_mu,
            e.w_logvar.as_slice(),
            &e.b_logvar,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 9] {
        let e = &mut self.encoder;
        [
            self.alpha.as_mut_slice(),
            e.w_in.as_mut_slice(),
            &mut e.b_in,
            e.w_hidden.as_mut_slice(),
            &mut e.b_hidden,
            e.w_mu.as_mut_slice(),
            &mut e.b_mu,
            e.w_logvar.as_mut_slice(),
            &mut e.b_logvar,
        ]
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.tensors()
            .iter()
            .zip(TENSOR_NAMES)
            .find(|(t, _)| !super::vec_is_finite(t))
            .map(|(_, n)| n)
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EctmModel {
    pub config: EctmConfig,
    pub params: Params,
    /// Fixed target-vocabulary embeddings, L x V.
    pub rho: Matrix,
    /// Fixed reference-vocabulary embeddings, L x V_ref.
    pub rho_tilde: Matrix,
    /// Fixed background bias over the target vocabulary.
    pub bias: Vec<f64>,
}

impl EctmModel {
    pub fn num_topics(&self) -> usize {
        self.params.alpha.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.rho.cols()
    }

    pub fn ref_vocab_size(&self) -> usize {
        self.rho_tilde.cols()
    }

    pub fn embed_dim(&self) -> usize {
        self.rho.rows()
    }
}

/// Add-one smoothed unigram distribution of the corpus.
pub fn background_bias(corpus: &Corpus) -> Vec<f64> {
    let totals = corpus.word_totals();
    let denom = (totals.iter().sum::<u64>() + totals.len() as u64) as f64;
    totals.iter().map(|&c| (c + 1) as f64 / denom).collect()
}

/// Creates a model with seeded random parameters.
///
/// `rho` must be L x V for the corpus vocabulary and `rho_tilde` L x V_ref for
/// the reference vocabulary.
pub fn init_model(config: &EctmConfig, rho: Matrix, rho_tilde: Matrix, corpus: &Corpus) -> Result<EctmModel> {
    config.validate()?;
    let (l, k, h, v) = (config.embed_dim, config.num_topics, config.hidden, corpus.vocab_size());
    if rho.rows() != l || rho.cols() != v {
        return Err(Error::shape("rho", alloc::format!("{l}x{v}"), rho.shape_str()));
    }
    if rho_tilde.rows() != l {
        return Err(Error::shape(
            "rho_tilde",
            alloc::format!("{l}x{}", rho_tilde.cols()),
            rho_tilde.shape_str(),
        ));
    }
    if !rho.is_finite() || !rho_tilde.is_finite() {
        return Err(Error::Numerical("non-finite word embedding".into()));
    }

    let mut rng = rng::stage_rng(config.seed, "ectm-init");
    let normal = Normal::new(0.0, ALPHA_INIT_STD).expect("positive std");
    let alpha = Matrix::from_fn(l, k, |_, _| normal.sample(&mut rng));
    let mut xavier = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
        let a = linalg::sqrt(6.0 / (fan_in + fan_out) as f64);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-a..a))
    };
    let encoder = Encoder {
        w_in: xavier(v, h, v, h),
        b_in: vec![0.0; h],
        w_hidden: xavier(h, h, h, h),
        b_hidden: vec![0.0; h],
        w_mu: xavier(k, h, h, k),
        b_mu: vec![0.0; k],
        w_logvar: xavier(k, h, h, k),
        b_logvar: vec![0.0; k],
    };
    let bias = if config.background_bias {
        background_bias(corpus)
    } else {
        vec![0.0; v]
    };
    Ok(EctmModel {
        config: config.clone(),
        params: Params { alpha, encoder },
        rho,
        rho_tilde,
        bias,
    })
}
