//! Shared fixtures for the benchmarks.

use adacvar_core::kdpp::LogWeightVector;
use adacvar_core::rng::{substream, Stream};
use adacvar_core::sim::random_log_weights;

/// Log-normal weights of spread `sigma`, reproducible per `(n, seed)`.
pub fn log_weights(n: usize, sigma: f64, seed: u64) -> LogWeightVector {
    let mut rng = substream(seed ^ ((n as u64) << 32), Stream::Weights);
    random_log_weights(&mut rng, n, sigma)
}

/// Population sizes used across benchmarks.
pub const SIZES: [usize; 3] = [100, 1_000, 10_000];
