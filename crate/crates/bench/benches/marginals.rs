use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use adacvar_bench::{log_weights, SIZES};
use adacvar_core::kdpp::{approx_marginals, exact_marginals};
use adacvar_core::sim::MARGINALS_BENCH_MAX_N;

fn marginals(c: &mut Criterion) {
    let mut g = c.benchmark_group("marginals");
    for n in SIZES {
        let w = log_weights(n, 1.0, 0);
        let k = n / 10;
        g.bench_with_input(BenchmarkId::new("approx", n), &w, |b, w| {
            b.iter(|| approx_marginals(w, k).unwrap())
        });
        if n <= MARGINALS_BENCH_MAX_N {
            g.bench_with_input(BenchmarkId::new("exact", n), &w, |b, w| {
                b.iter(|| exact_marginals(w, k).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, marginals);
criterion_main!(benches);
