use super::rebalance::rebalance;
use super::{Asker, EstimatorError, ModeEstimate, RoundRecord, Schedule, SearchTree, StopReason};
use crate::oracle::QueryOracle;

/// Runs `max_rounds` rounds of batch rebalancing with `γ = 1` and slack
/// `ε_r`, each on `n_r` fresh samples, starting from a balanced tree over
/// all classes. Returns the last round's leading class.
///
/// Samples are only followed down the tree as far as needed to separate the
/// heavy classes, so the per-sample cost tracks the depth of the mode's
/// block rather than the entropy of the whole distribution.
pub fn truncated_search(
    oracle: &mut QueryOracle,
    schedule: &Schedule,
    max_rounds: usize,
) -> Result<ModeEstimate, EstimatorError> {
    schedule.validate()?;
    if max_rounds == 0 {
        return Err(EstimatorError::InvalidParameter("max_rounds must be at least 1".into()));
    }
    let m = oracle.num_classes();
    let all: Vec<usize> = (0..m).collect();
    let mut tree = SearchTree::balanced(&all, m);
    let mut asker = Asker::new(oracle);
    let mut next_sample = 0usize;
    let mut log = Vec::with_capacity(max_rounds);
    let mut class = None;
    let mut stop = StopReason::RoundsExhausted;

    for r in 1..=max_rounds {
        let n_r = schedule.round_size(r);
        let samples: Vec<usize> = (next_sample..next_sample + n_r).collect();
        next_sample += n_r;
        let eps = schedule.slack(r, m);
        let out = rebalance(&mut asker, &mut tree, &samples, 1.0, eps)?;
        if !out.completed {
            stop = StopReason::QueryBudget;
            break;
        }
        class = Some(out.mode);
        log.push(RoundRecord {
            round: r,
            samples: n_r,
            survivors: n_r,
            queries: out.queries,
            eta: out.eta,
            mode: Some(out.mode),
            partition: Some(out.partition),
            eliminated: Vec::new(),
        });
    }

    let class = class.ok_or(EstimatorError::NoData)?;
    Ok(ModeEstimate {
        class,
        queries_used: asker.issued(),
        queries_paper: asker.issued(),
        samples_used: next_sample,
        rounds: log.len(),
        terminated: stop != StopReason::QueryBudget,
        stop,
        round_log: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::ProbabilityVector;

    #[test]
    fn two_classes_cost_one_query_per_sample() {
        let pv = ProbabilityVector::new(&[0.7, 0.3]).unwrap();
        let mut o = QueryOracle::iid(&pv, 3);
        let est = truncated_search(&mut o, &Schedule::default(), 8).unwrap();
        for rec in &est.round_log {
            assert_eq!(rec.queries, rec.samples as u64);
        }
        assert_eq!(est.samples_used, 510);
        assert_eq!(est.queries_used, o.query_count());
    }

    #[test]
    fn finds_a_clear_mode() {
        let pv = ProbabilityVector::footnote2(16).unwrap();
        let mut o = QueryOracle::iid(&pv, 5);
        let est = truncated_search(&mut o, &Schedule::default(), 10).unwrap();
        assert_eq!(est.class, pv.mode());
        assert_eq!(est.rounds, 10);
    }
}
