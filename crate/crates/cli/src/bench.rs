//! Text rendering of the sampler benchmarks.

use std::fmt::Write;

use adacvar_core::sim::{MarginalsRow, RegretTable};

pub fn regret_text(t: &RegretTable) -> String {
    let mut s = String::new();
    writeln!(s, "N = {}, k = {}", t.n, t.k).unwrap();
    writeln!(s, "{:>10} {:>14} {:>14} {:>12}", "T", "median", "mean", "median/T").unwrap();
    for r in &t.rows {
        writeln!(
            s,
            "{:>10} {:>14.6} {:>14.6} {:>12.3e}",
            r.horizon,
            r.median,
            r.mean,
            r.median / r.horizon as f64
        )
        .unwrap();
    }
    match t.slope {
        Some(v) => writeln!(s, "log-log slope: {v:.4}").unwrap(),
        None => writeln!(s, "log-log slope: n/a").unwrap(),
    }
    s
}

pub fn marginals_text(rows: &[MarginalsRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{:>8} {:>8} {:>14} {:>14} {:>8}", "N", "k", "median TV", "max TV", "seeds").unwrap();
    for r in rows {
        writeln!(
            s,
            "{:>8} {:>8} {:>14.6e} {:>14.6e} {:>8}",
            r.n,
            r.k,
            r.median_tv,
            r.max_tv,
            r.per_seed.len()
        )
        .unwrap();
    }
    s
}
