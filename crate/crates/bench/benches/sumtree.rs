use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};

use adacvar_bench::{log_weights, SIZES};
use adacvar_core::kdpp::SumTree;

fn sumtree(c: &mut Criterion) {
    let mut g = c.benchmark_group("sumtree");
    for n in SIZES {
        let w = log_weights(n, 1.0, 0).weights();
        g.bench_with_input(BenchmarkId::new("build", n), &w, |b, w| b.iter(|| SumTree::build(w).unwrap()));
        let mut tree = SumTree::build(&w).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        g.bench_function(BenchmarkId::new("sample", n), |b| {
            b.iter(|| tree.sample(rng.random::<f64>()).unwrap())
        });
        g.bench_function(BenchmarkId::new("update", n), |b| {
            b.iter(|| {
                let i = rng.random_range(0..n);
                tree.update(i, rng.random::<f64>()).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, sumtree);
criterion_main!(benches);
