use super::{budget_hit, empirical_mode, Asker, EstimatorError, ModeEstimate, StopReason};
use crate::oracle::{ClassSet, QueryOracle};

/// Identifies each of `n` samples with the fixed binary code of its class
/// index (most significant bit first) and returns the empirical mode.
///
/// Bit `k` is asked with the set of classes whose bit `k` is one. A bit is
/// skipped when the prefix already forces it, and the walk stops once the
/// prefix leaves a single class, so a class costs at most `⌈log₂ m⌉`
/// queries.
pub fn exhaustive_search(oracle: &mut QueryOracle, n: usize) -> Result<ModeEstimate, EstimatorError> {
    if n == 0 {
        return Err(EstimatorError::InvalidParameter("n must be at least 1".into()));
    }
    let m = oracle.num_classes();
    let bits = usize::BITS - (m - 1).leading_zeros();
    let bit_sets: Vec<ClassSet> = (0..bits)
        .map(|k| ClassSet::from_classes(m, (0..m).filter(|y| y >> k & 1 == 1)))
        .collect();

    let mut asker = Asker::new(oracle);
    let mut counts = vec![0u64; m];
    let mut identified = 0;
    let mut stop = StopReason::SamplesExhausted;
    'samples: for j in 0..n {
        let (mut lo, mut hi) = (0usize, 1usize << bits);
        for k in (0..bits).rev() {
            if hi.min(m) - lo <= 1 {
                break;
            }
            let mid = lo + (1 << k);
            if mid >= m {
                hi = mid;
                continue;
            }
            match budget_hit(asker.ask(j, &bit_sets[k as usize]))? {
                Some(true) => lo = mid,
                Some(false) => hi = mid,
                None => {
                    stop = StopReason::QueryBudget;
                    break 'samples;
                }
            }
        }
        counts[lo] += 1;
        identified += 1;
    }

    Ok(ModeEstimate {
        class: empirical_mode(&counts)?,
        queries_used: asker.issued(),
        queries_paper: asker.issued(),
        samples_used: identified,
        rounds: identified,
        terminated: stop != StopReason::QueryBudget,
        stop,
        round_log: Vec::new(),
    })
}
