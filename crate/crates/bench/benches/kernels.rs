use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use empathy_core::dataio::{synth_generate, SynthConfig, SynthTask};
use empathy_core::lda::{Corpus, LdaConfig, LdaModel};
use empathy_core::network::{Mode, ModelParams};
use empathy_core::numcore::Matrix;
use empathy_core::objective::attach_loss;
use empathy_core::training::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for n in [16, 64, 128] {
        let a = random_matrix(&mut rng, n, n);
        let b = random_matrix(&mut rng, n, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| black_box(&a).matmul(black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn forward_backward(c: &mut Criterion) {
    let ds = synth_generate(&SynthConfig::for_task(SynthTask::TopicCorrelated, 8), 0).unwrap();
    let cfg = TrainConfig::default();
    let model = ModelParams::init(&cfg.arch(ds.dims), 0).unwrap();
    let sample = &ds.samples[0];
    c.bench_function("forward_eval", |b| {
        b.iter(|| model.forward(black_box(sample), Mode::Eval).unwrap())
    });
    c.bench_function("forward_backward", |b| {
        b.iter(|| {
            let mut pass = model
                .forward(black_box(sample), Mode::Train { seed: 1 })
                .unwrap();
            let vars = attach_loss(
                &mut pass.tape,
                &pass.vars,
                sample.labels.ee as usize,
                None,
                &cfg.weights,
                cfg.kl_direction,
            )
            .unwrap();
            pass.tape.backward(vars.total).unwrap()
        })
    });
}

fn lda_sweeps(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let docs: Vec<Vec<String>> = (0..200)
        .map(|d| {
            (0..50)
                .map(|_| format!("t{}w{}", d % 2, rng.random_range(0..20)))
                .collect()
        })
        .collect();
    let corpus = Corpus::from_token_docs(&docs);
    let cfg = LdaConfig {
        k: 10,
        sweeps: 10,
        ..Default::default()
    };
    c.bench_function("lda_fit_10_sweeps", |b| {
        b.iter(|| LdaModel::fit(black_box(&corpus), &cfg).unwrap())
    });
}

criterion_group!(benches, matmul, forward_backward, lda_sweeps);
criterion_main!(benches);
