//! Inputs shared by the criterion benchmarks.

use mepf_core::{sample, ProbabilityVector};

/// Class counts of `n` Zipf(1) samples over `m` classes, zero counts
/// dropped.
pub fn zipf_counts(m: usize, n: usize, seed: u64) -> Vec<(usize, u64)> {
    let pv = ProbabilityVector::zipf(1.0, m).expect("m >= 1");
    let mut counts = vec![0u64; m];
    for y in sample(&pv, seed, n) {
        counts[y] += 1;
    }
    counts.into_iter().enumerate().filter(|&(_, c)| c > 0).collect()
}

/// A sample stream of length `n` from Zipf(1) over `m` classes.
pub fn zipf_stream(m: usize, n: usize, seed: u64) -> Vec<usize> {
    sample(&ProbabilityVector::zipf(1.0, m).expect("m >= 1"), seed, n)
}
