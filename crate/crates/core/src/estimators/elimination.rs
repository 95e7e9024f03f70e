use super::{budget_hit, Asker, EstimatorError, ModeEstimate, RoundRecord, Schedule, StopReason};
use crate::coding::CodeTree;
use crate::oracle::{ClassSet, QueryOracle};

/// Confidence radius `√(c·p̂_max·ln(π²·m·r²/δ)/r)` in probability units.
pub fn elimination_radius(c: f64, max_mass: f64, m: usize, r: u64, delta: f64) -> f64 {
    let r = r as f64;
    let log_term = (std::f64::consts::PI.powi(2) * m as f64 * r * r / delta).ln();
    (c * max_mass * log_term / r).sqrt()
}

/// Count-scale form of the elimination test: class with count `n` loses to
/// the leader with count `n_max` after `r` samples.
pub(crate) fn loses(n_max: u64, n: u64, c: f64, m: usize, r: u64, delta: f64) -> bool {
    let log_term = (std::f64::consts::PI.powi(2) * m as f64 * (r as f64).powi(2) / delta).ln();
    (n_max - n) as f64 > (c * n_max as f64 * log_term).sqrt()
}

/// Successive elimination on single samples.
///
/// Each sample is first tested against the eliminated set; samples outside
/// it are identified with an adaptive Huffman tree over the live classes.
/// A class is dropped once the leader's count exceeds its own by more than
/// the confidence radius. Stops when one class is left or the oracle's
/// budget runs out.
pub fn elimination(oracle: &mut QueryOracle, schedule: &Schedule) -> Result<ModeEstimate, EstimatorError> {
    schedule.validate()?;
    let m = oracle.num_classes();
    let mut live = vec![true; m];
    let mut live_count = m;
    let mut eliminated = ClassSet::new(m);
    let mut tree = CodeTree::unobserved(m)?;
    let mut counts = vec![0u64; m];
    let mut set = ClassSet::new(m);
    let mut asker = Asker::new(oracle);
    let mut skipped = 0u64;
    let mut r = 0u64;
    let mut log = Vec::new();
    let mut logged_queries = 0;

    let stop = 'run: loop {
        if live_count <= 1 {
            break StopReason::SingleSurvivor;
        }
        let j = r as usize;
        if !eliminated.is_empty() {
            match budget_hit(asker.ask(j, &eliminated))? {
                None => break StopReason::QueryBudget,
                Some(true) => {
                    r += 1;
                    continue;
                }
                Some(false) => {}
            }
        } else {
            skipped += 1;
        }
        let mut v = tree.root();
        while let Some((left, right)) = tree.children(v) {
            tree.classes_under(right, &mut set);
            match budget_hit(asker.ask(j, &set))? {
                None => break 'run StopReason::QueryBudget,
                Some(true) => v = right,
                Some(false) => v = left,
            }
        }
        r += 1;
        let y = tree.class_of(v).expect("walk ends at a leaf");
        counts[y] += 1;
        tree.observe(y)?;

        let n_max = (0..m).filter(|&c| live[c]).map(|c| counts[c]).max().unwrap_or(0);
        let dropped: Vec<usize> = (0..m)
            .filter(|&c| live[c] && loses(n_max, counts[c], schedule.c, m, r, schedule.delta))
            .collect();
        if !dropped.is_empty() {
            for &c in &dropped {
                live[c] = false;
                eliminated.insert(c);
            }
            live_count -= dropped.len();
            let observed: Vec<(usize, u64)> =
                (0..m).filter(|&c| live[c] && counts[c] > 0).map(|c| (c, counts[c])).collect();
            let unobserved: Vec<usize> = (0..m).filter(|&c| live[c] && counts[c] == 0).collect();
            tree = CodeTree::from_observed(&observed, &unobserved)?;
            log.push(RoundRecord {
                round: r as usize,
                samples: 1,
                survivors: live_count,
                queries: asker.issued() - logged_queries,
                eta: 0.0,
                mode: None,
                partition: None,
                eliminated: dropped,
            });
            logged_queries = asker.issued();
        }
    };

    let class = (0..m)
        .filter(|&c| live[c])
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
        .ok_or(EstimatorError::NoData)?;
    if stop == StopReason::QueryBudget && counts.iter().all(|&c| c == 0) {
        return Err(EstimatorError::NoData);
    }
    Ok(ModeEstimate {
        class,
        queries_used: asker.issued(),
        queries_paper: asker.issued() + skipped,
        samples_used: r as usize,
        rounds: r as usize,
        terminated: stop == StopReason::SingleSurvivor,
        stop,
        round_log: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::ProbabilityVector;

    #[test]
    fn radius_matches_reference() {
        let s = elimination_radius(24.0, 0.5, 10, 100, 0.1);
        assert!((s - 1.390_178_563_911_69).abs() < 1e-12, "{s}");
    }

    #[test]
    fn count_test_agrees_with_radius() {
        // p̂(y) + σ < p̂_max  ⇔  N_max − N > σ·r
        for (n_max, n, r) in [(60u64, 10u64, 100u64), (600, 100, 1000), (900, 400, 1000)] {
            let sigma = elimination_radius(24.0, n_max as f64 / r as f64, 5, r, 0.2);
            let by_mass = (n as f64 / r as f64) + sigma < n_max as f64 / r as f64;
            assert_eq!(by_mass, loses(n_max, n, 24.0, 5, r, 0.2));
        }
    }

    #[test]
    fn converges_on_a_clear_mode() {
        let pv = ProbabilityVector::new(&[0.7, 0.1, 0.1, 0.1]).unwrap();
        let mut o = QueryOracle::iid(&pv, 9);
        let est = elimination(&mut o, &Schedule::with_delta(0.1)).unwrap();
        assert!(est.terminated);
        assert_eq!(est.class, 0);
        assert_eq!(est.queries_used, o.query_count());
        assert!(est.queries_paper >= est.queries_used);
    }

    #[test]
    fn zero_gap_replay_hits_the_budget() {
        let samples: Vec<usize> = (0..10_000).map(|j| j % 2).collect();
        let mut o = QueryOracle::replay(2, samples).unwrap().with_budget(5_000);
        let est = elimination(&mut o, &Schedule::with_delta(0.1)).unwrap();
        assert!(!est.terminated);
        assert_eq!(est.stop, StopReason::QueryBudget);
        assert_eq!(est.queries_used, 5_000);
    }
}
