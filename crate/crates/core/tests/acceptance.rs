//! Acceptance checks. Prints one PASS/FAIL line per criterion. The process
//! fails on any failing criterion except those listed in `KNOWN_FAILURES`,
//! which are still run and reported, and which fail the process if they
//! start passing. An optional argument selects criteria by label or name.

use std::path::Path;
use std::time::{Duration, Instant};

use adacvar_core::algorithms::{
    batch_gradient, train, Algorithm, BatchObjective, LrDecay, TrainConfig,
};
use adacvar_core::data::{SyntheticKind, SyntheticSpec};
use adacvar_core::experiment::{prepare, run_on, DatasetConfig, ExperimentConfig};
use adacvar_core::kdpp::{exact_marginals, solve_nu, LogWeightVector, SumTree};
use adacvar_core::learners::{finite_diff_grad, loss_and_grad, LossKind, LossSpec, ModelParams, OptimizerKind};
use adacvar_core::risk::{empirical_cvar, rockafellar_objective, LossVector, RiskLevel};
use adacvar_core::rng::{substream, Stream};
use adacvar_core::sampler::{EtaSchedule, LossEstimate, SamplerConfig, SamplerState};
use adacvar_core::sim::{default_regret_sampler, marginals_bench, regret_bench, LossModel, TailSize};
use adacvar_core::data::{gen_synthetic, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Outcome;

/// Criteria whose failure is explained in the README: on the normal dataset
/// the exact CVaR minimizer itself has the higher test CVaR.
const KNOWN_FAILURES: &[&str] = &["AC8"];

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let checks: [(&str, &str, Duration, Check); 11] = [
        ("AC1", "strong duality", secs(5), strong_duality),
        ("AC2", "exact marginals", secs(30), exact_marginals_vs_enumeration),
        ("AC3", "approximation quality", secs(60), approximation_quality),
        ("AC4", "nu solver", secs(60), nu_solver),
        ("AC5", "sublinear sampler regret", secs(600), sublinear_regret),
        ("AC6", "reductions", secs(600), reductions),
        ("AC7", "gradient checks", secs(60), gradient_checks),
        ("AC8", "directional convex result", secs(600), directional_convex),
        ("AC9", "trunc zero-gradient steps", secs(600), trunc_failure_mode),
        ("AC10", "distribution shift", secs(300), distribution_shift),
        ("AC11", "sum tree sampling", secs(600), sum_tree),
    ];
    let mut failed = 0;
    let mut unexpected = 0;
    let mut ran = 0;
    for (label, name, limit, check) in checks {
        if let Some(f) = &filter {
            if !label.eq_ignore_ascii_case(f) && !name.contains(f.as_str()) {
                continue;
            }
        }
        ran += 1;
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let pass = out.pass && took <= limit;
        let known = KNOWN_FAILURES.contains(&label);
        if !pass {
            failed += 1;
        }
        if pass == known {
            unexpected += 1;
        }
        println!(
            "{label} {name}: {}{} ({}; {:.1}s of {}s)",
            if pass { "PASS" } else { "FAIL" },
            match (pass, known) {
                (false, true) => " [known]",
                (true, true) => " [listed as known failure]",
                _ => "",
            },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of {ran} criteria passed, {unexpected} unexpected results", ran - failed);
    if unexpected > 0 {
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn strong_duality() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(3..=200);
        let k = r.random_range(1..=n);
        let level = RiskLevel::from_k(k, n).unwrap();
        let losses = LossVector::new((0..n).map(|_| r.random::<f64>()).collect()).unwrap();
        let cvar = empirical_cvar(&losses, &level).unwrap();
        // grid, then every breakpoint (the objective is piecewise linear)
        let grid = (0..=1000).map(|i| i as f64 / 1000.0);
        let best = grid
            .chain(losses.values().iter().copied())
            .map(|ell| rockafellar_objective(&losses, ell, &level))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((best - cvar).abs());
    }
    Outcome::new(worst <= 1e-9, format!("max gap {worst:.2e} over 1000 vectors"))
}

fn enumerate_marginals(w: &[f64], k: usize) -> Vec<f64> {
    let n = w.len();
    let mut num = vec![0.0; n];
    let mut z = 0.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let p: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).product();
        z += p;
        for (i, v) in num.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                *v += p;
            }
        }
    }
    num.iter().map(|v| v / z).collect()
}

fn exact_marginals_vs_enumeration() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for n in 1..=12 {
        for k in 1..=n {
            for _ in 0..50 {
                let w: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0f64).exp()).collect();
                let got = exact_marginals(&LogWeightVector::from_weights(&w).unwrap(), k).unwrap();
                let want = enumerate_marginals(&w, k);
                for (a, b) in got.values().iter().zip(&want) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    let mut worst_sum = 0.0f64;
    for n in [100, 1000, 5000] {
        for k in [1, n / 10, n / 2, n - 1] {
            let lw: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
            let m = exact_marginals(&LogWeightVector::from_log(lw).unwrap(), k).unwrap();
            worst_sum = worst_sum.max((m.values().iter().sum::<f64>() - k as f64).abs());
        }
    }
    Outcome::new(
        worst <= 1e-9 && worst_sum <= 1e-8,
        format!("max entry error {worst:.2e}, max sum error {worst_sum:.2e} up to N = 5000"),
    )
}

fn approximation_quality() -> Outcome {
    let seeds: Vec<u64> = (0..50).collect();
    let rows = marginals_bench(&[50, 500], TailSize::Alpha(0.1), 1.0, &seeds).unwrap();
    let (small, large) = (rows[0].median_tv, rows[1].median_tv);
    Outcome::new(
        large < small / 4.0 && small < 0.05,
        format!("median TV {small:.4} at N = 50, {large:.5} at N = 500 (alpha 0.1, log-weights N(0, 1))"),
    )
}

fn nu_solver() -> Outcome {
    let mut worst_closed = 0.0f64;
    for (n, k) in [(4, 2), (10, 3), (100, 7)] {
        let s = solve_nu(&LogWeightVector::ones(n), k).unwrap();
        let want = (k as f64 / (n - k) as f64).ln();
        worst_closed = worst_closed.max((s.nu.exp() - want.exp()).abs());
    }
    let mut r = rng(4);
    let mut worst_res = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(2..=500);
        let k = r.random_range(1..n);
        let sigma = r.random_range(0.0..5.0);
        let lw: Vec<f64> = (0..n).map(|_| sigma * r.random_range(-1.0..1.0)).collect();
        let s = solve_nu(&LogWeightVector::from_log(lw).unwrap(), k).unwrap();
        worst_res = worst_res.max(s.residual.abs());
    }
    Outcome::new(
        worst_closed <= 1e-8 && worst_res <= 1e-10,
        format!("closed-form error {worst_closed:.2e}, max residual {worst_res:.2e} over 1000 instances"),
    )
}

fn sublinear_regret() -> Outcome {
    let seeds: Vec<u64> = (0..20).collect();
    let model = LossModel::TopkBernoulli { p_high: 0.8, p_low: 0.4 };
    let table = regret_bench(50, 5, &[1_000, 10_000, 100_000], default_regret_sampler(), &model, &seeds).unwrap();
    let ratio = table.rows[2].median / table.rows[1].median;
    let slope = table.slope.unwrap_or(f64::INFINITY);
    let medians: Vec<String> = table.rows.iter().map(|r| format!("{:.1}", r.median)).collect();
    Outcome::new(
        ratio <= 4.5 && slope <= 0.75,
        format!("median regret [{}], ratio {ratio:.2}, slope {slope:.3}", medians.join(", ")),
    )
}

fn regression_data(n: usize, d: usize, seed: u64) -> Dataset {
    gen_synthetic(&SyntheticSpec::new(SyntheticKind::Normal, n, d), seed).unwrap().data
}

/// Linear-scan EXP3 on single items with uniform mixing.
fn reference_exp3(n: usize, gamma: f64, eta: f64, steps: usize, seed: u64, losses: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut lw = vec![0.0f64; n];
    let mut draws = substream(seed, Stream::Draws);
    let mut history = Vec::with_capacity(steps);
    for loss in losses.iter().take(steps) {
        let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = w.iter().sum();
        let q: Vec<f64> = w.iter().map(|v| (1.0 - gamma) * v / z + gamma / n as f64).collect();
        let qz: f64 = q.iter().sum();
        let q: Vec<f64> = q.iter().map(|v| v / qz).collect();
        let u: f64 = draws.random::<f64>() * q.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut i = n - 1;
        for (j, v) in q.iter().enumerate() {
            acc += v;
            if u < acc {
                i = j;
                break;
            }
        }
        lw[i] += eta * loss[i] / q[i];
        history.push(normalized(&lw));
    }
    history
}

fn normalized(lw: &[f64]) -> Vec<f64> {
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

fn reductions() -> Outcome {
    // k = N against Mean under shared draws
    let data = regression_data(200, 5, 6);
    let loss = LossSpec::new(LossKind::SquaredNormalized, 20.0).unwrap();
    let mut identical = true;
    for b in [1, 8] {
        let mut cfg = TrainConfig::new(Algorithm::AdaCvar, 1.0, 1000, 11);
        cfg.batch_size = b;
        cfg.record_iterates = true;
        let ada = train(&data, None, &loss, &cfg).unwrap();
        cfg.algorithm = Algorithm::Mean;
        let mean = train(&data, None, &loss, &cfg).unwrap();
        identical &= ada.trace.iterates == mean.trace.iterates && ada.params == mean.params;
    }

    // k = 1 against reference EXP3
    let (n, gamma, eta, steps, seed) = (20, 0.05, 0.01, 10_000, 13);
    let mut lr = substream(seed, Stream::Losses);
    let losses: Vec<Vec<f64>> = (0..steps)
        .map(|_| (0..n).map(|i| if lr.random::<f64>() < 0.2 + 0.03 * i as f64 { 1.0 } else { 0.0 }).collect())
        .collect();
    let reference = reference_exp3(n, gamma, eta, steps, seed, &losses);
    let cfg = SamplerConfig {
        schedule: EtaSchedule::Constant { eta0: eta },
        gamma,
        horizon: None,
    };
    let mut s = SamplerState::new(n, &RiskLevel::from_k(1, n).unwrap(), cfg).unwrap();
    let mut draws = substream(seed, Stream::Draws);
    let mut worst = 0.0f64;
    for (loss, want) in losses.iter().zip(&reference) {
        let q = s.distribution().unwrap().values().to_vec();
        let i = s.draw(draws.random()).unwrap();
        s.update(&LossEstimate::new(i, loss[i], q[i]).unwrap()).unwrap();
        let got = normalized(s.weights().log_weights());
        for (a, b) in got.iter().zip(want) {
            worst = worst.max((a - b).abs());
        }
    }
    Outcome::new(
        identical && worst <= 1e-12,
        format!("k = N trajectory identical: {identical}; k = 1 max weight deviation {worst:.2e} over {steps} steps"),
    )
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn gradient_checks() -> Outcome {
    let mut r = rng(7);
    let d = 5;
    let h = 1e-6;
    let mut worst = [0.0f64; 3];
    for (slot, kind) in [LossKind::SquaredNormalized, LossKind::LogisticNormalized].into_iter().enumerate() {
        let spec = LossSpec::new(kind, 100.0).unwrap();
        for _ in 0..100 {
            let params = ModelParams {
                theta: (0..d).map(|_| r.random_range(-1.0..1.0)).collect(),
                bias: r.random_range(-1.0..1.0),
            };
            let x: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
            let y = match kind {
                LossKind::SquaredNormalized => r.random_range(-3.0..3.0),
                LossKind::LogisticNormalized => if r.random::<bool>() { 1.0 } else { -1.0 },
            };
            let g = loss_and_grad(&params, &x, y, &spec).unwrap();
            let mut analytic = g.grad.clone();
            analytic.push(g.grad_bias);
            let numeric = finite_diff_grad(&params, &x, y, &spec, h).unwrap();
            worst[slot] = worst[slot].max(relative_error(&analytic, &numeric));
        }
    }
    // soft surrogate in (theta, bias, ell) on a batch
    let spec = LossSpec::new(LossKind::SquaredNormalized, 10.0).unwrap();
    let data = regression_data(64, d, 8);
    for _ in 0..100 {
        let params = ModelParams {
            theta: (0..d).map(|_| r.random_range(-0.5..0.5)).collect(),
            bias: r.random_range(-0.5..0.5),
        };
        let ell = r.random_range(0.0..0.5);
        let tau = r.random_range(0.05..1.0);
        let alpha = r.random_range(0.05..1.0);
        let idx: Vec<usize> = (0..8).map(|_| r.random_range(0..data.len())).collect();
        let obj = |p: &ModelParams, ell: f64| {
            batch_gradient(&BatchObjective::Soft { ell, alpha, tau }, p, &data, &idx, &spec)
                .unwrap()
                .objective
        };
        let g = batch_gradient(&BatchObjective::Soft { ell, alpha, tau }, &params, &data, &idx, &spec).unwrap();
        let mut analytic = g.grad.clone();
        analytic.push(g.grad_bias);
        analytic.push(g.grad_ell);
        let mut numeric = Vec::new();
        for j in 0..=d {
            let mut plus = params.clone();
            let mut minus = params.clone();
            if j < d {
                plus.theta[j] += h;
                minus.theta[j] -= h;
            } else {
                plus.bias += h;
                minus.bias -= h;
            }
            numeric.push((obj(&plus, ell) - obj(&minus, ell)) / (2.0 * h));
        }
        numeric.push((obj(&params, ell + h) - obj(&params, ell - h)) / (2.0 * h));
        worst[2] = worst[2].max(relative_error(&analytic, &numeric));
    }
    Outcome::new(
        worst.iter().all(|w| *w <= 1e-4),
        format!(
            "max relative error: squared {:.2e}, logistic {:.2e}, soft surrogate {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

/// Shared protocol: momentum SGD or Adam, rates {0.05, 0.01, 0.005}, batch
/// 64, 50 epochs with rate decay 0.1 at epochs 20 and 40; each algorithm
/// keeps the setting with the best validation score.
fn tuned_run(
    dataset: &DatasetConfig,
    raw: &Dataset,
    algorithm: Algorithm,
    seed: u64,
    by_accuracy: bool,
) -> adacvar_core::metrics::EvalMetrics {
    let mut best: Option<(f64, adacvar_core::metrics::EvalMetrics)> = None;
    for optimizer in [OptimizerKind::MomentumSgd { momentum: 0.9 }, OptimizerKind::AdaptiveMoment] {
        for lr in [0.05, 0.01, 0.005] {
            let mut c = ExperimentConfig::new(dataset.clone(), algorithm, 0.1, seed);
            c.batch_size = 64;
            c.epochs = Some(50);
            c.lr = lr;
            c.optimizer = optimizer;
            c.lr_decay = Some(LrDecay {
                factor: 0.1,
                milestones: vec![20, 40],
            });
            let r = run_on(&c, raw).unwrap();
            let v = &r.final_metrics.val;
            let score = if by_accuracy { -v.accuracy.unwrap() } else { v.cvar };
            if best.as_ref().is_none_or(|(s, _)| score < *s) {
                best = Some((score, r.final_metrics.test));
            }
        }
    }
    best.unwrap().1
}

fn directional_convex() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [SyntheticKind::Normal, SyntheticKind::Pareto] {
        let dataset = DatasetConfig::synthetic(kind, 2000, 10);
        let mut wins = 0;
        let mut gap = f64::NEG_INFINITY;
        let (mut ada_cvar, mut mean_cvar) = (0.0, 0.0);
        for seed in 0..5 {
            let raw = dataset.load(Path::new("."), seed).unwrap();
            let ada = tuned_run(&dataset, &raw, Algorithm::AdaCvar, seed, false);
            let mean = tuned_run(&dataset, &raw, Algorithm::Mean, seed, false);
            wins += usize::from(ada.cvar <= mean.cvar);
            gap = gap.max(mean.mean_loss - ada.mean_loss);
            ada_cvar += ada.cvar / 5.0;
            mean_cvar += mean.cvar / 5.0;
        }
        pass &= wins >= 4 && gap <= 0.05;
        parts.push(format!(
            "{}: Ada wins {wins}/5, test CVaR {ada_cvar:.4} vs {mean_cvar:.4}, max mean-loss excess of Mean {gap:.4}",
            dataset.label()
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn trunc_failure_mode() -> Outcome {
    let dataset = DatasetConfig::synthetic(SyntheticKind::Normal, 2000, 10);
    let raw = dataset.load(Path::new("."), 0).unwrap();
    let p = prepare(&dataset, &raw, 0).unwrap();
    // early training: the first ten epochs
    let steps = 10 * p.train.len().div_ceil(64);
    let mut fractions = Vec::new();
    for alg in [Algorithm::TruncCvar, Algorithm::AdaCvar] {
        let mut c = TrainConfig::new(alg, 0.01, steps, 0);
        c.batch_size = 64;
        c.optimizer.lr = 0.01;
        let out = train(&p.train, None, &p.loss, &c).unwrap();
        fractions.push((out.trace.zero_grad_steps, out.trace.zero_grad_steps as f64 / steps as f64));
    }
    Outcome::new(
        fractions[0].1 >= 0.3 && fractions[1].0 == 0,
        format!(
            "zero-gradient steps over the first {steps}: Trunc {:.3}, Ada {}",
            fractions[0].1, fractions[1].0
        ),
    )
}

fn distribution_shift() -> Outcome {
    // originally 70/30, so inverting the training imbalance shifts the
    // class prior between training and test data
    let mut dataset = DatasetConfig::synthetic(SyntheticKind::TwoGaussians, 10_000, 10);
    dataset.separation = Some(3.0);
    dataset.positive_fraction = Some(0.7);
    dataset.shift = serde_json::from_str(r#"{"kind": "binary-imbalance-invert", "ratio": 0.1, "target": "train"}"#).unwrap();
    let mut strictly = 0;
    let (mut ada_acc, mut mean_acc) = (0.0, 0.0);
    for seed in 0..5 {
        let raw = dataset.load(Path::new("."), seed).unwrap();
        let ada = tuned_run(&dataset, &raw, Algorithm::AdaCvar, seed, true).accuracy.unwrap();
        let mean = tuned_run(&dataset, &raw, Algorithm::Mean, seed, true).accuracy.unwrap();
        strictly += usize::from(ada > mean);
        ada_acc += ada / 5.0;
        mean_acc += mean / 5.0;
    }
    Outcome::new(
        ada_acc >= mean_acc - 0.01 && strictly >= 3,
        format!("mean test accuracy Ada {ada_acc:.4} vs Mean {mean_acc:.4}; Ada strictly better in {strictly}/5"),
    )
}

fn linear_scan(w: &[f64], u: f64) -> usize {
    let total: f64 = w.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, v) in w.iter().enumerate() {
        acc += v;
        if target < acc {
            return i;
        }
    }
    w.len() - 1
}

fn sum_tree() -> Outcome {
    let n = 512;
    let mut r = rng(11);
    let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..10.0)).collect();
    let tree = SumTree::build(&w).unwrap();
    let total: f64 = w.iter().sum();
    let draws = 1_000_000;
    let mut counts = vec![0u64; n];
    let mut disagreements = 0;
    for _ in 0..draws {
        let u: f64 = r.random();
        let i = tree.sample(u).unwrap();
        counts[i] += 1;
        if linear_scan(&w, u) != i {
            disagreements += 1;
        }
    }
    let stat: f64 = counts
        .iter()
        .zip(&w)
        .map(|(&c, &wi)| {
            let e = draws as f64 * wi / total;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let p = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(stat);
    Outcome::new(
        p > 0.001 && disagreements == 0,
        format!("chi-square {stat:.1} on {} dof, p = {p:.3}; {disagreements} disagreements with a linear scan on shared draws", n - 1),
    )
}
