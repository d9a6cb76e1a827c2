use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};

use adacvar_bench::SIZES;
use adacvar_core::sampler::{LossEstimate, SamplerState};
use adacvar_core::sim::default_regret_sampler;
use adacvar_core::RiskLevel;

/// One draw plus one importance-weighted update, including the marginal
/// recomputation the next draw needs.
fn sampler_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("sampler_step");
    for n in SIZES {
        let level = RiskLevel::new(0.1, n).unwrap();
        let mut cfg = default_regret_sampler();
        cfg.horizon = Some(100_000);
        let mut s = SamplerState::new(n, &level, cfg).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        g.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| {
                let i = s.draw(rng.random()).unwrap();
                let q_i = s.distribution().unwrap().values()[i];
                let loss = if i % 10 == 0 { 1.0 } else { rng.random::<f64>() * 0.5 };
                s.update(&LossEstimate::new(i, loss, q_i).unwrap()).unwrap();
            })
        });
    }
    g.finish();
}

criterion_group!(benches, sampler_step);
criterion_main!(benches);
