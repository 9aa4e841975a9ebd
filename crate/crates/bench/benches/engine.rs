use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ebano_core::mlwe::{kmeans, pca_reduce, KMeansParams, TokenEmbeddingMatrix};
use ebano_core::model_gateway::ReferenceModel;
use ebano_core::{explain_document, npir, ExplainConfig, Lexicons};

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn bench_npir(c: &mut Criterion) {
    c.bench_function("npir", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 1..=100 {
                acc += npir(black_box(i as f64 / 100.0), black_box(0.37));
            }
            acc
        })
    });
}

fn bench_kmeans(c: &mut Criterion) {
    let mut group = c.benchmark_group("kmeans");
    for n in [16, 64, 256] {
        let m = random_matrix(n, 8, n as u64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| kmeans(m, KMeansParams::new(4, 42)).unwrap())
        });
    }
    group.finish();
}

fn bench_pca(c: &mut Criterion) {
    let mut group = c.benchmark_group("pca_reduce");
    for (rows, cols) in [(32, 64), (64, 768)] {
        let matrix = TokenEmbeddingMatrix {
            rows: random_matrix(rows, cols, 7),
            token_positions: (0..rows).collect(),
        };
        group.bench_with_input(BenchmarkId::new("tokens", format!("{rows}x{cols}")), &matrix, |b, m| {
            b.iter(|| pca_reduce(m, 8))
        });
    }
    group.finish();
}

fn bench_explain(c: &mut Criterion) {
    let model = ReferenceModel::builtin();
    let lex = Lexicons::builtin();
    let cfg = ExplainConfig::default();
    let text = "This film was very awful. I have never seen such a bad movie. \
                The cast tried hard, but the plot was dull and the ending was worse.";
    c.bench_function("explain_document", |b| {
        b.iter(|| explain_document("bench", black_box(text), &model, &lex, &cfg).unwrap())
    });
}

criterion_group!(benches, bench_npir, bench_kmeans, bench_pca, bench_explain);
criterion_main!(benches);
