//! Forward computation of the objective and its analytic gradient.
//!
//! Per document `d` with counts `c`:
//!
//! ```text
//! h1 = softplus(W_in^T x + b_in)          h2 = softplus(W_h h1 + b_h)
//! mu = W_mu h2 + b_mu                     lv = W_lv h2 + b_lv
//! delta = mu + exp(lv / 2) * eps          theta = softmax(delta)
//! q_v = sum_j theta_j beta_jv + b_v       neg_recon_d = -sum_v c_v log q_v
//! ```
//!
//! (with `q / 2` inside the log when reconstruction is normalized). Batch
//! terms are averaged over the batch; the reference term is global.

use alloc::vec;
use alloc::vec::Vec;

use super::model::{EctmModel, Encoder, Params};
use super::{EncoderInput, LossBreakdown};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, LOG_FLOOR};
use crate::llda::ReferenceTopics;
use crate::prior::PriorMatrix;

/// Mean and log-variance of the Gaussian over topic logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

/// Standard-normal draws used by the reparameterization, one row per batch entry.
#[derive(Debug, Clone, Copy)]
pub enum Noise<'a> {
    /// Mean path: `delta = mu`.
    Zero,
    Draws(&'a Matrix),
}

impl Noise<'_> {
    fn row(&self, i: usize) -> Option<&[f64]> {
        match self {
            Noise::Zero => None,
            Noise::Draws(m) => Some(m.row(i)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicMatrices {
    /// k x V, rows on the simplex.
    pub beta: Matrix,
    /// k x V_ref, rows on the simplex.
    pub beta_tilde: Matrix,
}

struct EncoderTrace {
    input: Vec<(usize, f64)>,
    a1: Vec<f64>,
    h1: Vec<f64>,
    a2: Vec<f64>,
    h2: Vec<f64>,
}

fn encoder_forward(enc: &Encoder, input: Vec<(usize, f64)>) -> (EncoderTrace, Encoded) {
    let mut a1 = enc.b_in.clone();
    for &(w, x) in &input {
        linalg::axpy(x, enc.w_in.row(w), &mut a1);
    }
    let h1: Vec<f64> = a1.iter().map(|&a| linalg::softplus(a)).collect();
    let mut a2 = enc.w_hidden.mul_vec(&h1);
    linalg::axpy(1.0, &enc.b_hidden, &mut a2);
    let h2: Vec<f64> = a2.iter().map(|&a| linalg::softplus(a)).collect();
    let mut mu = enc.w_mu.mul_vec(&h2);
    linalg::axpy(1.0, &enc.b_mu, &mut mu);
    let mut logvar = enc.w_logvar.mul_vec(&h2);
    linalg::axpy(1.0, &enc.b_logvar, &mut logvar);
    (EncoderTrace { input, a1, h1, a2, h2 }, Encoded { mu, logvar })
}

fn check_encoder_output(trace: &EncoderTrace, out: &Encoded) -> Result<()> {
    let layers: [(&str, &[f64]); 4] = [
        ("input layer", &trace.h1),
        ("hidden layer", &trace.h2),
        ("mean head", &out.mu),
        ("log-variance head", &out.logvar),
    ];
    match layers.iter().find(|(_, v)| !super::vec_is_finite(v)) {
        Some((name, _)) => Err(Error::Numerical(alloc::format!("non-finite encoder output in {name}"))),
        None => Ok(()),
    }
}

/// Encoder input for document `d` as sparse `(word, value)` pairs.
pub(crate) fn doc_input(model: &EctmModel, corpus: &Corpus, d: usize) -> Vec<(usize, f64)> {
    let counts = corpus.counts(d);
    let scale = match model.config.encoder_input {
        EncoderInput::Normalized => {
            let len = corpus.doc_len(d);
            if len == 0 {
                return Vec::new();
            }
            1.0 / len as f64
        }
        EncoderInput::Counts => 1.0,
    };
    counts.iter().map(|&(w, c)| (w, f64::from(c) * scale)).collect()
}

/// Runs the encoder on a dense input vector of length V.
pub fn encode(model: &EctmModel, x: &[f64]) -> Result<Encoded> {
    if x.len() != model.vocab_size() {
        return Err(Error::shape(
            "encoder input",
            alloc::format!("{}", model.vocab_size()),
            alloc::format!("{}", x.len()),
        ));
    }
    let input = x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(w, &v)| (w, v)).collect();
    let (trace, out) = encoder_forward(&model.params.encoder, input);
    check_encoder_output(&trace, &out)?;
    Ok(out)
}

pub(crate) fn encode_doc(model: &EctmModel, corpus: &Corpus, d: usize) -> Result<Encoded> {
    let (trace, out) = encoder_forward(&model.params.encoder, doc_input(model, corpus, d));
    check_encoder_output(&trace, &out)?;
    Ok(out)
}

/// `softmax(mu + exp(logvar / 2) * noise)`.
pub fn sample_theta(mu: &[f64], logvar: &[f64], noise: &[f64]) -> Vec<f64> {
    let delta: Vec<f64> = mu
        .iter()
        .zip(logvar)
        .zip(noise)
        .map(|((&m, &lv), &e)| m + linalg::exp(0.5 * lv) * e)
        .collect();
    linalg::softmax(&delta)
}

/// Pre-softmax logits `rho^T alpha_j` for every topic, one row per topic.
fn topic_logits(alpha: &Matrix, embeddings: &Matrix) -> Matrix {
    let k = alpha.cols();
    let mut out = Matrix::zeros(k, embeddings.cols());
    let alpha_t = alpha.transpose();
    for j in 0..k {
        out.row_mut(j).copy_from_slice(&embeddings.tmul_vec(alpha_t.row(j)));
    }
    out
}

fn softmax_rows(mut logits: Matrix) -> Matrix {
    for j in 0..logits.rows() {
        linalg::softmax_in_place(logits.row_mut(j));
    }
    logits
}

fn log_softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for j in 0..out.rows() {
        let lsm = linalg::log_softmax(logits.row(j));
        out.row_mut(j).copy_from_slice(&lsm);
    }
    out
}

/// Target topic-word matrix and its projection onto the reference vocabulary,
/// both from the same topic embeddings.
pub fn topic_matrices(model: &EctmModel) -> TopicMatrices {
    TopicMatrices {
        beta: softmax_rows(topic_logits(&model.params.alpha, &model.rho)),
        beta_tilde: softmax_rows(topic_logits(&model.params.alpha, &model.rho_tilde)),
    }
}

/// Log of the reconstructed word distribution,
/// `log(theta^T beta + b)` (or `log((theta^T beta + b) / 2)` when `normalize`).
pub fn reconstruct(theta: &[f64], beta: &Matrix, bias: &[f64], normalize: bool) -> Vec<f64> {
    let mut q = beta.tmul_vec(theta);
    linalg::axpy(1.0, bias, &mut q);
    let scale = if normalize { 0.5 } else { 1.0 };
    q.iter().map(|&x| linalg::floored_ln(scale * x)).collect()
}

/// Minimized objective on `batch`.
pub fn loss(
    model: &EctmModel,
    corpus: &Corpus,
    batch: &[usize],
    reference: &ReferenceTopics,
    prior: &PriorMatrix,
    noise: Noise<'_>,
) -> Result<LossBreakdown> {
    check_inputs(model, corpus, reference.beta(), prior.theta(), batch, noise)?;
    objective(model, corpus, batch, reference.beta(), prior.theta(), noise, false).map(|(l, _)| l)
}

/// Objective on `batch` together with its gradient with respect to every
/// trainable tensor. Word embeddings and the background bias are constants,
/// and so is the prior.
pub fn gradients(
    model: &EctmModel,
    corpus: &Corpus,
    batch: &[usize],
    reference: &ReferenceTopics,
    prior: &PriorMatrix,
    noise: Noise<'_>,
) -> Result<(LossBreakdown, Params)> {
    check_inputs(model, corpus, reference.beta(), prior.theta(), batch, noise)?;
    let (l, g) = objective(model, corpus, batch, reference.beta(), prior.theta(), noise, true)?;
    let g = g.expect("gradients requested");
    if let Some(name) = g.first_non_finite() {
        return Err(Error::Numerical(alloc::format!("non-finite gradient for {name}")));
    }
    Ok((l, g))
}

pub(crate) fn check_inputs(
    model: &EctmModel,
    corpus: &Corpus,
    beta_ref: &Matrix,
    prior: &Matrix,
    batch: &[usize],
    noise: Noise<'_>,
) -> Result<()> {
    let k = model.num_topics();
    if beta_ref.rows() != k || beta_ref.cols() != model.ref_vocab_size() {
        return Err(Error::shape(
            "reference beta",
            alloc::format!("{k}x{}", model.ref_vocab_size()),
            beta_ref.shape_str(),
        ));
    }
    if corpus.vocab_size() != model.vocab_size() {
        return Err(Error::shape(
            "corpus vocabulary",
            alloc::format!("{}", model.vocab_size()),
            alloc::format!("{}", corpus.vocab_size()),
        ));
    }
    if prior.rows() != corpus.num_docs() || prior.cols() != k {
        return Err(Error::shape(
            "prior",
            alloc::format!("{}x{k}", corpus.num_docs()),
            prior.shape_str(),
        ));
    }
    if let Some(&d) = batch.iter().find(|&&d| d >= corpus.num_docs()) {
        return Err(Error::invalid(alloc::format!("batch document index {d} out of range")));
    }
    if let Noise::Draws(m) = noise {
        if m.rows() != batch.len() || m.cols() != k {
            return Err(Error::shape("noise", alloc::format!("{}x{k}", batch.len()), m.shape_str()));
        }
    }
    Ok(())
}

const LN_FLOOR: f64 = -27.631_021_115_928_547; // ln(1e-12)

pub(crate) fn objective(
    model: &EctmModel,
    corpus: &Corpus,
    batch: &[usize],
    beta_ref: &Matrix,
    prior: &Matrix,
    noise: Noise<'_>,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<Params>)> {
    let cfg = &model.config;
    let k = model.num_topics();
    let v = model.vocab_size();
    let params = &model.params;
    let enc = &params.encoder;

    let beta = softmax_rows(topic_logits(&params.alpha, &model.rho));
    let log_beta_tilde = log_softmax_rows(&topic_logits(&params.alpha, &model.rho_tilde));

    let inv_b = if batch.is_empty() { 0.0 } else { 1.0 / batch.len() as f64 };
    let recon_scale = if cfg.normalize_recon { 0.5 } else { 1.0 };
    let mut grad = want_grad.then(|| params.zeros_like());
    let mut g_beta = Matrix::zeros(k, v);

    let (mut sum_recon, mut sum_kl, mut sum_rt) = (0.0, 0.0, 0.0);
    let mut d_theta = vec![0.0; k];
    let mut g_log_theta = vec![0.0; k];
    for (i, &d) in batch.iter().enumerate() {
        if corpus.is_empty_doc(d) {
            return Err(Error::EmptyDocument);
        }
        let (trace, out) = encoder_forward(enc, doc_input(model, corpus, d));
        check_encoder_output(&trace, &out)?;
        let Encoded { mu, logvar } = out;
        let eps = noise.row(i);
        let sigma: Vec<f64> = logvar.iter().map(|&lv| linalg::exp(0.5 * lv)).collect();
        let delta: Vec<f64> = match eps {
            Some(e) => (0..k).map(|j| mu[j] + sigma[j] * e[j]).collect(),
            None => mu.clone(),
        };
        let log_theta = linalg::log_softmax(&delta);
        let theta: Vec<f64> = log_theta.iter().map(|&x| linalg::exp(x)).collect();

        // reconstruction, touching only words present in the document
        d_theta.fill(0.0);
        for &(w, c) in corpus.counts(d) {
            let c = f64::from(c);
            let q: f64 = (0..k).map(|j| theta[j] * beta.get(j, w)).sum::<f64>() + model.bias[w];
            let p = recon_scale * q;
            sum_recon -= c * linalg::floored_ln(p);
            if want_grad && p > LOG_FLOOR {
                let g = -c / q * inv_b;
                for j in 0..k {
                    d_theta[j] += g * beta.get(j, w);
                    let slot = g_beta.get(j, w) + theta[j] * g;
                    g_beta.set(j, w, slot);
                }
            }
        }

        // KL(prior_d || theta_d)
        let target = prior.row(d);
        for j in 0..k {
            g_log_theta[j] = 0.0;
            if target[j] > 0.0 {
                let lt = log_theta[j].max(LN_FLOOR);
                sum_rt += target[j] * (linalg::floored_ln(target[j]) - lt);
                if log_theta[j] > LN_FLOOR {
                    g_log_theta[j] = -cfg.lambda_theta * inv_b * target[j];
                }
            }
        }

        // KL(N(mu, diag exp(lv)) || N(0, I))
        sum_kl += 0.5
            * mu.iter()
                .zip(&logvar)
                .map(|(&m, &lv)| linalg::exp(lv) + m * m - 1.0 - lv)
                .sum::<f64>();

        let Some(g) = grad.as_mut() else { continue };
        let theta_dot: f64 = linalg::dot(&theta, &d_theta);
        let g_log_sum: f64 = g_log_theta.iter().sum();
        let d_delta: Vec<f64> = (0..k)
            .map(|j| theta[j] * (d_theta[j] - theta_dot) + g_log_theta[j] - theta[j] * g_log_sum)
            .collect();
        let d_mu: Vec<f64> = (0..k).map(|j| d_delta[j] + mu[j] * inv_b).collect();
        let d_lv: Vec<f64> = (0..k)
            .map(|j| {
                let through_noise = eps.map_or(0.0, |e| d_delta[j] * e[j] * 0.5 * sigma[j]);
                through_noise + 0.5 * (linalg::exp(logvar[j]) - 1.0) * inv_b
            })
            .collect();
        backprop_encoder(enc, &mut g.encoder, &trace, &d_mu, &d_lv);
    }

    let neg_recon = sum_recon * inv_b;
    let kl_gauss = sum_kl * inv_b;
    let r_theta = sum_rt * inv_b;

    let mut r_beta = 0.0;
    for j in 0..k {
        for (w, &pr) in beta_ref.row(j).iter().enumerate() {
            if pr > 0.0 {
                r_beta += pr * (linalg::floored_ln(pr) - log_beta_tilde.get(j, w).max(LN_FLOOR));
            }
        }
    }
    r_beta /= k as f64;

    let breakdown = LossBreakdown::new(neg_recon, kl_gauss, r_beta, r_theta, cfg.lambda_beta, cfg.lambda_theta);

    if let Some(g) = grad.as_mut() {
        let weight = cfg.lambda_beta / k as f64;
        let mut d_alpha_col = vec![0.0; model.embed_dim()];
        for j in 0..k {
            // softmax backward for beta_j
            let b_row = beta.row(j);
            let g_row = g_beta.row(j);
            let inner = linalg::dot(b_row, g_row);
            let d_logit: Vec<f64> = b_row.iter().zip(g_row).map(|(&b, &gb)| b * (gb - inner)).collect();
            d_alpha_col.copy_from_slice(&model.rho.mul_vec(&d_logit));

            // log-softmax backward for the reference projection
            let lbt = log_beta_tilde.row(j);
            let g_log: Vec<f64> = beta_ref
                .row(j)
                .iter()
                .zip(lbt)
                .map(|(&pr, &l)| if pr > 0.0 && l > LN_FLOOR { -weight * pr } else { 0.0 })
                .collect();
            let g_sum: f64 = g_log.iter().sum();
            let d_logit_tilde: Vec<f64> =
                g_log.iter().zip(lbt).map(|(&gl, &l)| gl - linalg::exp(l) * g_sum).collect();
            linalg::axpy(1.0, &model.rho_tilde.mul_vec(&d_logit_tilde), &mut d_alpha_col);

            for (l, &x) in d_alpha_col.iter().enumerate() {
                g.alpha.set(l, j, x);
            }
        }
    }

    Ok((breakdown, grad))
}

fn backprop_encoder(enc: &Encoder, g: &mut Encoder, trace: &EncoderTrace, d_mu: &[f64], d_lv: &[f64]) {
    g.w_mu.add_outer(1.0, d_mu, &trace.h2);
    linalg::axpy(1.0, d_mu, &mut g.b_mu);
    g.w_logvar.add_outer(1.0, d_lv, &trace.h2);
    linalg::axpy(1.0, d_lv, &mut g.b_logvar);

    let mut d_h2 = enc.w_mu.tmul_vec(d_mu);
    linalg::axpy(1.0, &enc.w_logvar.tmul_vec(d_lv), &mut d_h2);
    let d_a2: Vec<f64> = d_h2.iter().zip(&trace.a2).map(|(&dh, &a)| dh * linalg::sigmoid(a)).collect();
    g.w_hidden.add_outer(1.0, &d_a2, &trace.h1);
    linalg::axpy(1.0, &d_a2, &mut g.b_hidden);

    let d_h1 = enc.w_hidden.tmul_vec(&d_a2);
    let d_a1: Vec<f64> = d_h1.iter().zip(&trace.a1).map(|(&dh, &a)| dh * linalg::sigmoid(a)).collect();
    for &(w, x) in &trace.input {
        linalg::axpy(x, &d_a1, g.w_in.row_mut(w));
    }
    linalg::axpy(1.0, &d_a1, &mut g.b_in);
}
