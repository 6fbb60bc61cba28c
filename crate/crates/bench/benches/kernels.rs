use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use agreement_core::consensus::{rbm_fit, RbmGradient, RbmParams};
use agreement_core::data::{generate_synthetic, sample_batch, SyntheticSpec};
use agreement_core::engine::{augmented_grad, init_models, predict_all};
use agreement_core::eval::{average_precision, macro_auc_pr};
use agreement_core::nn::{AdamConfig, MlpArchitecture, MlpModel};
use agreement_core::seeding;

fn dataset() -> agreement_core::Dataset {
    generate_synthetic(&SyntheticSpec::default(), 0).unwrap()
}

fn mlp(c: &mut Criterion) {
    let data = dataset();
    let mut rng = seeding::rng(1);
    let batch = sample_batch(&data, 128, &mut rng).unwrap();
    let labels = batch.labels.clone().unwrap();
    let arch: MlpArchitecture = "[128 64 32]".parse().unwrap();
    let model = MlpModel::init(&arch, 20, 5, 3).unwrap();
    c.bench_function("mlp_forward_128x[128 64 32]", |b| {
        b.iter(|| model.forward(black_box(batch.features.view())).unwrap())
    });
    c.bench_function("mlp_backward_128x[128 64 32]", |b| {
        b.iter(|| model.backward(black_box(batch.features.view()), labels.view()).unwrap())
    });
    let unlabeled = sample_batch(&data, 128, &mut rng).unwrap();
    let target = model.forward(unlabeled.features.view()).unwrap();
    c.bench_function("augmented_grad_lambda1", |b| {
        b.iter(|| augmented_grad(&model, &batch, &unlabeled, black_box(&target), 1.0).unwrap())
    });
}

fn rbm(c: &mut Criterion) {
    let data = dataset();
    let archs = MlpArchitecture::parse_list("[1], [8], [16 8], [64 32], [128 64 32]").unwrap();
    let models = init_models(&archs, 20, 5, 0).unwrap();
    let preds = predict_all(&models, data.features()).unwrap();
    let labeled = predict_all(&models, data.features().slice(agreement_core::ndarray::s![..100, ..])).unwrap();
    let labels = data.labels().unwrap().slice(agreement_core::ndarray::s![..100, ..]).to_owned();
    for (name, gradient) in [("cd", RbmGradient::ContrastiveDivergence), ("exact", RbmGradient::Exact)] {
        c.bench_function(&format!("rbm_fit_100_iters_2000x5x5_{name}"), |b| {
            b.iter_batched(
                || RbmParams::zeros(5, 5),
                |params| {
                    let mut rng = seeding::rng(2);
                    rbm_fit(&params, &preds, &labeled, labels.view(), 100, false, gradient, AdamConfig::default(), &mut rng)
                        .unwrap()
                },
                BatchSize::SmallInput,
            )
        });
    }
}

fn metrics(c: &mut Criterion) {
    let data = dataset();
    let model = MlpModel::init(&MlpArchitecture::new(vec![8]).unwrap(), 20, 5, 0).unwrap();
    let preds = model.forward(data.features()).unwrap();
    let labels = data.labels().unwrap();
    let scores: Vec<f64> = preds.column(0).to_vec();
    let column: Vec<f64> = labels.column(0).to_vec();
    c.bench_function("average_precision_2000", |b| {
        b.iter(|| average_precision(black_box(&scores), &column).unwrap())
    });
    c.bench_function("macro_auc_pr_2000x5", |b| b.iter(|| macro_auc_pr(black_box(preds.view()), labels).unwrap()));
}

criterion_group!(benches, mlp, rbm, metrics);
criterion_main!(benches);
