mod common;

use common::{finite_difference_check, tiny_problem};
use ctm_core::ectm::{self, topic_matrices, Noise};
use ctm_core::{Matrix, ReferenceTopics};

#[test]
fn analytic_gradient_matches_finite_differences() {
    for seed in [1, 2, 3] {
        let p = tiny_problem(seed, 20.0, 35.0);
        let (err, t, i) = finite_difference_check(&p, 1e-4);
        println!("seed {seed}: max relative error {err:.3e} (tensor {t}, index {i})");
        assert!(err < 1e-4, "seed {seed}: relative error {err} at tensor {t} index {i}");
    }
}

#[test]
fn finite_differences_hold_in_normalized_and_count_modes() {
    let mut p = tiny_problem(9, 5.0, 2.0);
    p.model.config.normalize_recon = true;
    p.model.config.encoder_input = ectm::EncoderInput::Counts;
    let (err, _, _) = finite_difference_check(&p, 1e-4);
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn reference_term_alone_only_moves_topic_embeddings() {
    let p = tiny_problem(4, 20.0, 0.0);
    let (_, g) = ectm::gradients(&p.model, &p.corpus, &[], &p.reference, &p.prior, Noise::Zero).unwrap();
    assert!(g.alpha.as_slice().iter().any(|&x| x != 0.0));
    for (name, tensor) in ectm::model::TENSOR_NAMES.iter().zip(g.tensors()).skip(1) {
        assert!(tensor.iter().all(|&x| x == 0.0), "{name} has a nonzero gradient");
    }
}

#[test]
fn reference_term_is_stationary_at_its_minimum() {
    let p = tiny_problem(5, 20.0, 0.0);
    let projected = topic_matrices(&p.model).beta_tilde;
    let names = p.reference.names().to_vec();
    let vocab = p.reference.vocab().to_vec();
    let reference = ReferenceTopics::new(names, vocab, projected).unwrap();
    let (l, g) = ectm::gradients(&p.model, &p.corpus, &[], &reference, &p.prior, Noise::Zero).unwrap();
    assert!(l.r_beta.abs() < 1e-12);
    assert!(g.alpha.as_slice().iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn zero_noise_gradient_ignores_log_variance_path_through_theta() {
    // on the mean path the log-variance only enters through the Gaussian KL
    let p = tiny_problem(6, 20.0, 35.0);
    let (_, g) = ectm::gradients(&p.model, &p.corpus, &p.batch, &p.reference, &p.prior, Noise::Zero).unwrap();
    let mut only_kl = p.model.clone();
    only_kl.config.lambda_beta = 0.0;
    only_kl.config.lambda_theta = 0.0;
    let zero = Matrix::zeros(p.batch.len(), 3);
    let (_, g2) = ectm::gradients(&only_kl, &p.corpus, &p.batch, &p.reference, &p.prior, Noise::Draws(&zero)).unwrap();
    assert_eq!(g.encoder.b_logvar, g2.encoder.b_logvar);
}
