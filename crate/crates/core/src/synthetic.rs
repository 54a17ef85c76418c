//! Planted-topic synthetic worlds with known ground truth, and the end-to-end
//! pipeline that runs on them.
//!
//! Every topic owns a disjoint block of words. The reference corpus and the
//! target corpus draw from overlapping but different parts of each block, so
//! the two vocabularies only partly coincide. Word embeddings cluster around a
//! random centre per topic.

use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{preprocess, Corpus, PreprocessRules, RawDocument};
use crate::ectm::{self, EctmConfig, TrainOutcome};
use crate::embeddings::{project_vocab, EmbeddingTable, DEFAULT_EMBED_SEED};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::llda::{train_llda, LldaConfig, ReferenceTopics};
use crate::metrics;
use crate::prior::{soft_labels, PriorMatrix, ScoreMatrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub topic_names: Vec<String>,
    pub words_per_topic: usize,
    /// Word positions (within each topic block) used by the reference corpus.
    pub ref_words: core::ops::Range<usize>,
    /// Word positions used by the target corpus.
    pub target_words: core::ops::Range<usize>,
    pub ref_docs: usize,
    pub target_docs: usize,
    pub doc_len: core::ops::RangeInclusive<usize>,
    /// Zipf exponent of the within-topic word distribution.
    pub zipf: f64,
    /// Topics whose target-corpus word distribution is reversed.
    pub reversed_topics: Vec<usize>,
    /// Per-token probability of drawing from a second topic chosen per document.
    pub secondary_share: f64,
    /// Shared filler words and the per-token probability of drawing one.
    pub filler_words: usize,
    pub filler_rate: f64,
    pub embed_dim: usize,
    pub center_norm: f64,
    pub embed_noise: f64,
    /// Fraction of target documents whose prior points at a wrong topic.
    pub prior_noise: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            topic_names: ["sports", "politics", "science"].iter().map(|s| String::from(*s)).collect(),
            words_per_topic: 24,
            ref_words: 0..20,
            target_words: 4..24,
            ref_docs: 300,
            target_docs: 600,
            doc_len: 30..=60,
            zipf: 0.8,
            reversed_topics: Vec::new(),
            secondary_share: 0.2,
            filler_words: 6,
            filler_rate: 0.1,
            embed_dim: 32,
            center_norm: 3.0,
            embed_noise: 0.5,
            prior_noise: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedWorld {
    pub names: Vec<String>,
    pub embeddings: EmbeddingTable,
    pub reference_docs: Vec<RawDocument>,
    pub target_docs: Vec<RawDocument>,
    /// True topic of each target document.
    pub truth: Vec<usize>,
    /// Topic the noisy oracle prior points at, per target document.
    pub oracle_labels: Vec<usize>,
}

fn topic_word(name: &str, i: usize) -> String {
    alloc::format!("{name}{i:02}")
}

fn filler_word(i: usize) -> String {
    alloc::format!("common{i:02}")
}

fn zipf_weights(n: usize, s: f64, reversed: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|i| 1.0 / libm::pow((i + 1) as f64, s)).collect();
    if reversed {
        w.reverse();
    }
    w
}

fn sample_doc(
    rng: &mut rng::StageRng,
    spec: &PlantedSpec,
    topic: usize,
    positions: &core::ops::Range<usize>,
    reversed: &[usize],
) -> String {
    let k = spec.topic_names.len();
    let secondary = (topic + rng.random_range(1..k)) % k;
    let dist = |t: usize| {
        let weights = zipf_weights(positions.len(), spec.zipf, reversed.contains(&t));
        WeightedIndex::new(weights).expect("positive weights")
    };
    let (main_dist, second_dist) = (dist(topic), dist(secondary));
    let len = rng.random_range(spec.doc_len.clone());
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        let u = rng.random::<f64>();
        if spec.filler_words > 0 && u < spec.filler_rate {
            words.push(filler_word(rng.random_range(0..spec.filler_words)));
        } else if u < spec.filler_rate + spec.secondary_share * (1.0 - spec.filler_rate) {
            let name = &spec.topic_names[secondary];
            words.push(topic_word(name, positions.start + second_dist.sample(rng)));
        } else {
            let name = &spec.topic_names[topic];
            words.push(topic_word(name, positions.start + main_dist.sample(rng)));
        }
    }
    words.join(" ")
}

/// Generates a planted world from `spec`.
pub fn generate(spec: &PlantedSpec) -> Result<PlantedWorld> {
    let k = spec.topic_names.len();
    if k < 2 {
        return Err(Error::invalid("k >= 2 required"));
    }
    if spec.ref_words.end > spec.words_per_topic
        || spec.target_words.end > spec.words_per_topic
        || spec.ref_words.is_empty()
        || spec.target_words.is_empty()
    {
        return Err(Error::invalid("word ranges must be non-empty and inside the topic block"));
    }

    let mut rng = rng::stage_rng(spec.seed, "planted-embeddings");
    let unit = Normal::new(0.0, 1.0).expect("valid");
    let noise = Normal::new(0.0, spec.embed_noise.max(f64::MIN_POSITIVE)).expect("valid");
    let mut table = EmbeddingTable::new(spec.embed_dim)?;
    for name in &spec.topic_names {
        let mut center: Vec<f64> = (0..spec.embed_dim).map(|_| unit.sample(&mut rng)).collect();
        let norm = linalg::sqrt(linalg::dot(&center, &center));
        for c in &mut center {
            *c *= spec.center_norm / norm;
        }
        for i in 0..spec.words_per_topic {
            let v = center.iter().map(|&c| c + noise.sample(&mut rng)).collect();
            table.insert(topic_word(name, i), v)?;
        }
        table.insert(name.clone(), center)?;
    }
    for i in 0..spec.filler_words {
        let v = (0..spec.embed_dim).map(|_| noise.sample(&mut rng)).collect();
        table.insert(filler_word(i), v)?;
    }

    let mut rng = rng::stage_rng(spec.seed, "planted-reference");
    let mut reference_docs = Vec::with_capacity(spec.ref_docs);
    for i in 0..spec.ref_docs {
        let topic = i % k;
        let text = sample_doc(&mut rng, spec, topic, &spec.ref_words, &[]);
        reference_docs.push(RawDocument::new(alloc::format!("ref{i:05}"), text).with_label(spec.topic_names[topic].clone()));
    }

    let mut rng = rng::stage_rng(spec.seed, "planted-target");
    let mut target_docs = Vec::with_capacity(spec.target_docs);
    let mut truth = Vec::with_capacity(spec.target_docs);
    let mut oracle_labels = Vec::with_capacity(spec.target_docs);
    for i in 0..spec.target_docs {
        let topic = i % k;
        let text = sample_doc(&mut rng, spec, topic, &spec.target_words, &spec.reversed_topics);
        target_docs.push(RawDocument::new(alloc::format!("doc{i:05}"), text).with_label(spec.topic_names[topic].clone()));
        truth.push(topic);
    }
    let mut rng = rng::stage_rng(spec.seed, "planted-prior");
    for &topic in &truth {
        let label = if rng.random::<f64>() < spec.prior_noise {
            let shift = rng.random_range(1..k);
            (topic + shift) % k
        } else {
            topic
        };
        oracle_labels.push(label);
    }

    Ok(PlantedWorld {
        names: spec.topic_names.clone(),
        embeddings: table,
        reference_docs,
        target_docs,
        truth,
        oracle_labels,
    })
}

/// Scores of 0.9 for the oracle topic and 0.1 elsewhere, aligned to `corpus`.
pub fn oracle_scores(world: &PlantedWorld, corpus: &Corpus) -> Result<ScoreMatrix> {
    let k = world.names.len();
    let index: alloc::collections::BTreeMap<&str, usize> =
        world.target_docs.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let mut p = Matrix::zeros(corpus.num_docs(), k);
    for (d, id) in corpus.doc_ids().iter().enumerate() {
        let i = *index
            .get(id.as_str())
            .ok_or_else(|| Error::invalid(alloc::format!("document '{id}' not in planted world")))?;
        for t in 0..k {
            p.set(d, t, if world.oracle_labels[i] == t { 0.9 } else { 0.1 });
        }
    }
    ScoreMatrix::new(p, corpus.doc_ids().to_vec(), world.names.clone())
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub preprocess: PreprocessRules,
    pub llda: LldaConfig,
    pub ectm: EctmConfig,
    pub embed_seed: u64,
}

impl PipelineConfig {
    /// Settings for a planted world: default pruning, a short LLDA chain, and
    /// the default model hyperparameters with the world's dimensions.
    pub fn for_spec(spec: &PlantedSpec) -> Self {
        PipelineConfig {
            preprocess: PreprocessRules::default(),
            llda: LldaConfig {
                iterations: 200,
                burn_in: 100,
                seed: rng::stage_seed(spec.seed, "llda"),
                ..LldaConfig::default()
            },
            ectm: EctmConfig {
                num_topics: spec.topic_names.len(),
                embed_dim: spec.embed_dim,
                seed: rng::stage_seed(spec.seed, "ectm"),
                ..EctmConfig::default()
            },
            embed_seed: DEFAULT_EMBED_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub reference_corpus: Corpus,
    pub reference: ReferenceTopics,
    pub corpus: Corpus,
    pub initial_prior: PriorMatrix,
    pub outcome: TrainOutcome,
    /// Mean-path topic proportions after training.
    pub theta: Matrix,
    /// True topic per corpus document.
    pub truth: Vec<usize>,
    pub accuracy: f64,
    /// Unweighted reference divergence of the trained model.
    pub r_beta: f64,
}

/// Runs reference training, prior generation and model training on a planted world.
pub fn run_pipeline(world: &PlantedWorld, config: &PipelineConfig) -> Result<PipelineResult> {
    let reference_corpus = preprocess(&world.reference_docs, &config.preprocess)?;
    let reference = train_llda(&reference_corpus, &world.names, &config.llda)?;
    let corpus = preprocess(&world.target_docs, &config.preprocess)?;
    let prior = soft_labels(&oracle_scores(world, &corpus)?)?;
    let (outcome, theta) = run_training(&reference, &corpus, &prior, &world.embeddings, config)?;

    let truth: Vec<usize> = world.truth.clone();
    let pred = metrics::classify(&theta);
    let accuracy = pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64;
    let tm = ectm::topic_matrices(&outcome.model);
    let r_beta = ectm::reference_divergence(reference.beta(), &tm.beta_tilde);
    Ok(PipelineResult {
        reference_corpus,
        reference,
        corpus,
        initial_prior: prior,
        outcome,
        theta,
        truth,
        accuracy,
        r_beta,
    })
}

/// Projects embeddings, initializes and trains a model, then infers theta.
pub fn run_training(
    reference: &ReferenceTopics,
    corpus: &Corpus,
    prior: &PriorMatrix,
    embeddings: &EmbeddingTable,
    config: &PipelineConfig,
) -> Result<(TrainOutcome, Matrix)> {
    let rho = project_vocab(embeddings, corpus.vocab(), config.embed_seed)?;
    let rho_tilde = project_vocab(embeddings, reference.vocab(), config.embed_seed)?;
    let model = ectm::init_model(&config.ectm, rho.matrix, rho_tilde.matrix, corpus)?;
    let outcome = ectm::train(model, corpus, reference, prior.clone())?;
    let theta = ectm::infer_theta(&outcome.model, corpus)?;
    Ok((outcome, theta))
}
