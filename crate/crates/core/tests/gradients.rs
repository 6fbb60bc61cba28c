mod common;

use agreement_core::engine::augmented_grad;
use agreement_core::nn::{bce_loss_raw, MlpArchitecture, MlpModel};
use agreement_core::seeding;
use common::*;

#[test]
fn twenty_random_models_match_finite_differences() {
    for seed in 0..20 {
        let model = random_small_model(seed);
        assert!(model.n_parameters() <= 200);
        let mut rng = seeding::rng(1000 + seed);
        let b = 7;
        let x = random_matrix(b, model.input_dim(), &mut rng);
        let t = random_probs(b, model.output_dim(), &mut rng);
        let (loss, grads) = model.backward(x.view(), t.view()).unwrap();
        let objective = labeled_objective(x.view(), t.view());
        assert!((loss - objective(&model)).abs() < 1e-12);
        let err = max_relative_error(&grads, &numeric_gradient(&model, objective));
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn five_by_four_three_two_model() {
    let arch = MlpArchitecture::new(vec![3]).unwrap();
    let model = MlpModel::init(&arch, 4, 2, 77).unwrap();
    let mut rng = seeding::rng(78);
    let x = random_matrix(5, 4, &mut rng);
    let t = random_binary(5, 2, &mut rng);
    let (_, grads) = model.backward(x.view(), t.view()).unwrap();
    let err = max_relative_error(&grads, &numeric_gradient(&model, labeled_objective(x.view(), t.view())));
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn augmented_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let model = random_small_model(500 + seed);
        let mut rng = seeding::rng(seed);
        let (d, l) = (model.input_dim(), model.output_dim());
        let labeled = batch(random_matrix(6, d, &mut rng), Some(random_binary(6, l, &mut rng)));
        let unlabeled = batch(random_matrix(9, d, &mut rng), None);
        let consensus = agreement_core::PredictionMatrix::new(random_probs(9, l, &mut rng)).unwrap();
        for lambda in [0.0, 0.5, 1.0] {
            let (loss, grads) = augmented_grad(&model, &labeled, &unlabeled, &consensus, lambda).unwrap();
            let objective = |m: &MlpModel| {
                let sup = bce_loss_raw(
                    m.forward(labeled.features.view()).unwrap().view(),
                    labeled.labels.as_ref().unwrap().view(),
                )
                .unwrap();
                let agree = bce_loss_raw(m.forward(unlabeled.features.view()).unwrap().view(), consensus.view()).unwrap();
                sup + lambda * agree
            };
            assert!((loss - objective(&model)).abs() < 1e-12);
            let err = max_relative_error(&grads, &numeric_gradient(&model, objective));
            assert!(err < 1e-4, "seed {seed}, lambda {lambda}: relative error {err}");
        }
    }
}

#[test]
fn forward_matches_scalar_loop() {
    for seed in 0..20 {
        let model = MlpModel::init(&MlpArchitecture::new(vec![7, 5]).unwrap(), 6, 4, seed).unwrap();
        let mut rng = seeding::rng(seed + 99);
        let x = random_matrix(11, 6, &mut rng);
        let out = model.forward(x.view()).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            let reference = scalar_forward(&model, row.as_slice().unwrap());
            for (k, r) in reference.iter().enumerate() {
                assert!((out[[i, k]] - r).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn duplicated_batch_keeps_mean_gradient() {
    let model = random_small_model(3);
    let mut rng = seeding::rng(4);
    let x = random_matrix(5, model.input_dim(), &mut rng);
    let t = random_probs(5, model.output_dim(), &mut rng);
    let x2 = agreement_core::ndarray::concatenate![agreement_core::ndarray::Axis(0), x, x];
    let t2 = agreement_core::ndarray::concatenate![agreement_core::ndarray::Axis(0), t, t];
    let (_, g1) = model.backward(x.view(), t.view()).unwrap();
    let (_, g2) = model.backward(x2.view(), t2.view()).unwrap();
    for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
        for (u, v) in a.iter().zip(b) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}

#[test]
fn target_equal_to_output_zeroes_output_delta() {
    let model = MlpModel::init(&MlpArchitecture::new(vec![]).unwrap(), 3, 2, 5).unwrap();
    let mut rng = seeding::rng(6);
    let x = random_matrix(4, 3, &mut rng);
    let p = model.forward(x.view()).unwrap();
    let (_, g) = model.backward(x.view(), p.view()).unwrap();
    assert!(g.tensors().iter().all(|t| t.iter().all(|v| v.abs() < 1e-15)));
}
