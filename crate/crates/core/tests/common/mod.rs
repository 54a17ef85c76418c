//! Test-only oracles and fixtures. Nothing here calls into the code paths it
//! is used to check, apart from evaluating the objective for finite differences.
#![allow(dead_code)]

use ctm_core::ectm::{self, EctmConfig, EctmModel, Encoder, Noise, Params};
use ctm_core::linalg::Matrix;
use ctm_core::prior::PriorMatrix;
use ctm_core::{Corpus, ReferenceTopics};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub struct TinyProblem {
    pub model: EctmModel,
    pub corpus: Corpus,
    pub reference: ReferenceTopics,
    pub prior: PriorMatrix,
    pub noise: Matrix,
    pub batch: Vec<usize>,
}

pub const TINY_V: usize = 20;
pub const TINY_V_REF: usize = 15;
pub const TINY_K: usize = 3;
pub const TINY_L: usize = 8;
pub const TINY_HIDDEN: usize = 16;
pub const TINY_DOCS: usize = 5;

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Matrix {
    let n = Normal::new(0.0, std).unwrap();
    Matrix::from_fn(rows, cols, |_, _| n.sample(rng))
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize, std: f64) -> Vec<f64> {
    let n = Normal::new(0.0, std).unwrap();
    (0..len).map(|_| n.sample(rng)).collect()
}

/// A random parameter state of the tiny model (V=20, V_ref=15, k=3, L=8,
/// hidden=16, 5 documents) with random reference, prior, counts and noise.
pub fn tiny_problem(seed: u64, lambda_beta: f64, lambda_theta: f64) -> TinyProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (v, vr, k, l, h) = (TINY_V, TINY_V_REF, TINY_K, TINY_L, TINY_HIDDEN);
    let vocab: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
    let ref_vocab: Vec<String> = (0..vr).map(|i| format!("r{i}")).collect();
    let names: Vec<String> = (0..k).map(|i| format!("t{i}")).collect();
    let doc_ids: Vec<String> = (0..TINY_DOCS).map(|i| format!("d{i}")).collect();
    let docs: Vec<Vec<usize>> = (0..TINY_DOCS)
        .map(|_| {
            let len = rng.random_range(5..15);
            (0..len).map(|_| rng.random_range(0..v)).collect()
        })
        .collect();
    let corpus = Corpus::from_parts(vocab, doc_ids.clone(), docs, Vec::new(), None).unwrap();

    let beta_ref = Matrix::from_rows(&(0..k).map(|_| random_simplex(&mut rng, vr)).collect::<Vec<_>>()).unwrap();
    let reference = ReferenceTopics::new(names.clone(), ref_vocab, beta_ref).unwrap();
    let prior_rows: Vec<Vec<f64>> = (0..TINY_DOCS).map(|_| random_simplex(&mut rng, k)).collect();
    let prior = PriorMatrix::new(Matrix::from_rows(&prior_rows).unwrap(), doc_ids, names).unwrap();

    let encoder = Encoder {
        w_in: random_matrix(&mut rng, v, h, 0.5),
        b_in: random_vec(&mut rng, h, 0.2),
        w_hidden: random_matrix(&mut rng, h, h, 0.3),
        b_hidden: random_vec(&mut rng, h, 0.2),
        w_mu: random_matrix(&mut rng, k, h, 0.3),
        b_mu: random_vec(&mut rng, k, 0.2),
        w_logvar: random_matrix(&mut rng, k, h, 0.1),
        b_logvar: random_vec(&mut rng, k, 0.2),
    };
    let params = Params {
        alpha: random_matrix(&mut rng, l, k, 0.5),
        encoder,
    };
    let bias = random_simplex(&mut rng, v);
    let model = EctmModel {
        config: EctmConfig {
            num_topics: k,
            embed_dim: l,
            hidden: h,
            lambda_beta,
            lambda_theta,
            ..EctmConfig::default()
        },
        params,
        rho: random_matrix(&mut rng, l, v, 1.0),
        rho_tilde: random_matrix(&mut rng, l, vr, 1.0),
        bias,
    };
    let noise = Matrix::from_fn(TINY_DOCS, k, |_, _| StandardNormal.sample(&mut rng));
    TinyProblem {
        model,
        corpus,
        reference,
        prior,
        noise,
        batch: (0..TINY_DOCS).collect(),
    }
}

impl TinyProblem {
    pub fn total(&self, model: &EctmModel) -> f64 {
        ectm::loss(model, &self.corpus, &self.batch, &self.reference, &self.prior, Noise::Draws(&self.noise))
            .unwrap()
            .total
    }
}

/// Scale below which gradient magnitudes are compared absolutely.
pub const GRAD_REL_FLOOR: f64 = 1e-6;

/// Largest relative disagreement between the analytic gradient and central
/// finite differences with step `h`, over every trainable value.
/// Returns `(max_rel_err, tensor index, value index)`.
pub fn finite_difference_check(p: &TinyProblem, h: f64) -> (f64, usize, usize) {
    let (_, analytic) =
        ectm::gradients(&p.model, &p.corpus, &p.batch, &p.reference, &p.prior, Noise::Draws(&p.noise)).unwrap();
    let analytic: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();
    let mut worst = (0.0, 0, 0);
    let mut probe = p.model.clone();
    for (t, grad) in analytic.iter().enumerate() {
        for i in 0..grad.len() {
            let original = probe.params.tensors()[t][i];
            probe.params.tensors_mut()[t][i] = original + h;
            let up = p.total(&probe);
            probe.params.tensors_mut()[t][i] = original - h;
            let down = p.total(&probe);
            probe.params.tensors_mut()[t][i] = original;
            let numeric = (up - down) / (2.0 * h);
            let scale = grad[i].abs().max(numeric.abs()).max(GRAD_REL_FLOOR);
            let rel = (grad[i] - numeric).abs() / scale;
            if rel > worst.0 {
                worst = (rel, t, i);
            }
        }
    }
    worst
}

/// Literal squared-and-normalized soft labels, computed with plain loops.
pub fn brute_force_soft_labels(p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = p[0].len();
    let mut f = vec![0.0; k];
    for row in p {
        for j in 0..k {
            f[j] += row[j];
        }
    }
    p.iter()
        .map(|row| {
            let mut denom = 0.0;
            for j in 0..k {
                denom += row[j] * row[j] / f[j];
            }
            (0..k).map(|j| row[j] * row[j] / f[j] / denom).collect()
        })
        .collect()
}

/// NPMI by enumerating documents as word sets.
pub fn enumerated_npmi(docs: &[Vec<&str>], a: &str, b: &str) -> f64 {
    let n = docs.len() as f64;
    let has = |d: &Vec<&str>, w: &str| d.iter().any(|x| *x == w);
    let ca = docs.iter().filter(|d| has(d, a)).count() as f64;
    let cb = docs.iter().filter(|d| has(d, b)).count() as f64;
    let cab = docs.iter().filter(|d| has(d, a) && has(d, b)).count() as f64;
    if cab == 0.0 {
        return -1.0;
    }
    if cab == n {
        return 1.0;
    }
    let pab = cab / n;
    ((pab / ((ca / n) * (cb / n))).ln()) / (-pab.ln())
}
