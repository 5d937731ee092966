use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rep4ex::kernels::{gram, median_heuristic, mmr_statistic, mmr_statistic_streaming, KernelSpec};
use rep4ex::models::{train_autoencoder, TrainConfig};
use rep4ex::{Graph, RngStream};
use rep4ex_bench::{default_mlp, random_matrix, unmix_sample};
use std::hint::black_box;

fn matmul(c: &mut Criterion) {
    let a = random_matrix(256, 32, 1);
    let b = random_matrix(32, 32, 2);
    c.bench_function("matmul 256x32 * 32x32", |bn| bn.iter(|| black_box(&a).matmul(black_box(&b))));
    let k = random_matrix(256, 256, 3);
    c.bench_function("matmul 256x256 * 256x2", |bn| {
        let r = random_matrix(256, 2, 4);
        bn.iter(|| black_box(&k).matmul(black_box(&r)))
    });
}

fn backward(c: &mut Criterion) {
    let net = default_mlp(10, 10, 5);
    let x = random_matrix(256, 10, 6);
    c.bench_function("mlp forward+backward, batch 256", |bn| {
        bn.iter(|| {
            let mut g = Graph::new();
            let xn = g.constant(x.clone());
            let p: Vec<_> = net.params().into_iter().map(|m| g.parameter(m)).collect();
            let out = net.forward_graph(&mut g, xn, &p);
            let sq = g.square(out);
            let loss = g.mean(sq);
            black_box(g.backward(loss).unwrap())
        })
    });
}

fn mmr(c: &mut Criterion) {
    let a = RngStream::new(7, 7).uniform_matrix(1000, 2, -1.0, 1.0);
    let r = random_matrix(1000, 2, 8);
    let spec = KernelSpec::gaussian(median_heuristic(&a, &mut RngStream::new(0, 0)).unwrap()).unwrap();
    c.bench_function("gram n=256", |bn| {
        let a = a.select_rows(&(0..256).collect::<Vec<_>>());
        bn.iter(|| gram(black_box(&a), &spec))
    });
    let k = gram(&a, &spec);
    c.bench_function("mmr statistic from gram, n=1000", |bn| bn.iter(|| mmr_statistic(black_box(&r), &k)));
    c.bench_function("mmr statistic streaming, n=1000", |bn| bn.iter(|| mmr_statistic_streaming(black_box(&a), &r, &spec)));
}

fn ae_epoch(c: &mut Criterion) {
    let ds = unmix_sample(256);
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let mut group = c.benchmark_group("autoencoder epoch, n=256");
    group.sample_size(20);
    for lambda in [0.0, 100.0] {
        group.bench_function(format!("lambda={lambda}"), |bn| {
            bn.iter_batched(|| (), |_| train_autoencoder(ds.observed(), 2, lambda, &cfg, None, 0).unwrap(), BatchSize::SmallInput)
        });
    }
    group.finish();
}

criterion_group!(benches, matmul, backward, mmr, ae_epoch);
criterion_main!(benches);
