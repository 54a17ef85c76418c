use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::forward::{check_inputs, encode_doc, objective, Noise};
use super::model::{EctmModel, Params};
use super::LossBreakdown;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::llda::ReferenceTopics;
use crate::prior::PriorMatrix;
use crate::rng;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, params: &Params) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, f64::from(t));
        let c2 = 1.0 - libm::pow(self.beta2, f64::from(t));
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (linalg::sqrt(v_hat) + eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrainStatus {
    Completed,
    /// The objective or a gradient became non-finite at this optimizer step;
    /// the returned model holds the parameters from before that step.
    Diverged { step: usize },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EctmModel,
    /// Prior after all self-training refreshes.
    pub prior: PriorMatrix,
    /// Mean loss terms per epoch.
    pub history: Vec<LossBreakdown>,
    pub steps: usize,
    pub status: TrainStatus,
}

/// Blends the model's topic proportions into the prior for `docs`:
/// `prior <- keep * prior + (1 - keep) * theta`.
pub fn self_training_update(prior: &mut PriorMatrix, theta: &Matrix, docs: &[usize], keep: f64) {
    for &d in docs {
        prior.blend_row(d, theta.row(d), keep);
    }
}

/// Mean-path topic proportions `softmax(mu)` for every document.
///
/// Empty documents are encoded from an all-zero input.
pub fn infer_theta(model: &EctmModel, corpus: &Corpus) -> Result<Matrix> {
    if corpus.vocab_size() != model.vocab_size() {
        return Err(Error::shape(
            "corpus vocabulary",
            alloc::format!("{}", model.vocab_size()),
            alloc::format!("{}", corpus.vocab_size()),
        ));
    }
    let k = model.num_topics();
    let mut theta = Matrix::zeros(corpus.num_docs(), k);
    for d in 0..corpus.num_docs() {
        let enc = encode_doc(model, corpus, d)?;
        theta.row_mut(d).copy_from_slice(&linalg::softmax(&enc.mu));
    }
    Ok(theta)
}

/// Top `n` words of every row of `beta`, by descending probability with ties
/// broken by word id.
pub fn top_words(beta: &Matrix, vocab: &[String], n: usize) -> Result<Vec<Vec<String>>> {
    if beta.cols() != vocab.len() {
        return Err(Error::shape("vocabulary", alloc::format!("{}", beta.cols()), alloc::format!("{}", vocab.len())));
    }
    if n > vocab.len() {
        return Err(Error::invalid(alloc::format!(
            "requested {n} top words but the vocabulary has {}",
            vocab.len()
        )));
    }
    Ok(beta
        .row_iter()
        .map(|row| linalg::argsort_desc(row).into_iter().take(n).map(|w| vocab[w].clone()).collect())
        .collect())
}

/// Trains `model` on the non-empty documents of `corpus`.
pub fn train(model: EctmModel, corpus: &Corpus, reference: &ReferenceTopics, prior: PriorMatrix) -> Result<TrainOutcome> {
    train_with_progress(model, corpus, reference, prior, |_, _| {})
}

/// [`train`], calling `on_epoch(epoch, mean_loss)` after every epoch.
pub fn train_with_progress(
    mut model: EctmModel,
    corpus: &Corpus,
    reference: &ReferenceTopics,
    mut prior: PriorMatrix,
    mut on_epoch: impl FnMut(usize, &LossBreakdown),
) -> Result<TrainOutcome> {
    let cfg = model.config.clone();
    cfg.validate()?;
    prior.check_alignment(corpus)?;
    if prior.names() != reference.names() {
        return Err(Error::invalid("prior topic names differ from reference topic names"));
    }
    check_inputs(&model, corpus, reference.beta(), prior.theta(), &[], Noise::Zero)?;

    let k = model.num_topics();
    let active: Vec<usize> = (0..corpus.num_docs()).filter(|&d| !corpus.is_empty_doc(d)).collect();
    if active.is_empty() {
        return Err(Error::invalid("corpus has no non-empty documents"));
    }
    let mut rng = rng::stage_rng(cfg.seed, "ectm-train");
    let mut adam = Adam::new(cfg.lr, &model.params);
    let mut order = active.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut steps = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_losses = Vec::new();
        for batch in order.chunks(cfg.batch_size) {
            let noise = Matrix::from_fn(batch.len(), k, |_, _| StandardNormal.sample(&mut rng));
            let step_result = objective(
                &model,
                corpus,
                batch,
                reference.beta(),
                prior.theta(),
                Noise::Draws(&noise),
                true,
            );
            let (loss, grads) = match step_result {
                Ok((l, Some(g))) if l.is_finite() && g.first_non_finite().is_none() => (l, g),
                Ok(_) | Err(Error::Numerical(_)) => {
                    log::error!("training diverged at step {steps}; returning last finite parameters");
                    history.push(LossBreakdown::mean(&epoch_losses));
                    return Ok(TrainOutcome {
                        model,
                        prior,
                        history,
                        steps,
                        status: TrainStatus::Diverged { step: steps },
                    });
                }
                Err(e) => return Err(e),
            };
            adam.step(&mut model.params, &grads);
            steps += 1;
            epoch_losses.push(loss);

            if cfg.self_training && steps % cfg.self_train_period == 0 {
                let theta = infer_theta(&model, corpus)?;
                self_training_update(&mut prior, &theta, &active, cfg.self_train_blend);
            }
        }
        let mean = LossBreakdown::mean(&epoch_losses);
        on_epoch(epoch, &mean);
        history.push(mean);
    }

    Ok(TrainOutcome {
        model,
        prior,
        history,
        steps,
        status: TrainStatus::Completed,
    })
}
