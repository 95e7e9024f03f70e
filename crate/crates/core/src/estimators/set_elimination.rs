use super::elimination::loses;
use super::rebalance::rebalance;
use super::{
    budget_hit, Asker, EstimatorError, ModeEstimate, RoundRecord, Schedule, SearchTree, StopReason,
};
use crate::oracle::{ClassSet, QueryOracle};

/// Successive elimination on whole blocks of classes.
///
/// Round `r` draws `n_r` fresh samples, drops the ones that fall in the
/// eliminated set (one query each, once that set is non-empty), and runs a
/// rebalancing pass with `γ = 1/2` and slack `ε_r / p̂(live)` on the rest.
/// Every block of the resulting partition whose count trails the leader's
/// by more than the confidence radius is eliminated at once.
pub fn set_elimination(
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
    let mut eliminated = ClassSet::new(m);
    let mut live_count = m;
    let mut asker = Asker::new(oracle);
    let mut skipped = 0u64;
    let mut next_sample = 0usize;
    let mut log = Vec::new();
    let mut class = None;
    let mut stop = StopReason::RoundsExhausted;

    'rounds: for r in 1..=max_rounds {
        if live_count <= 1 {
            stop = StopReason::SingleSurvivor;
            break;
        }
        let n_r = schedule.round_size(r);
        let start_queries = asker.issued();
        let first = next_sample;
        next_sample += n_r;
        let mut survivors = Vec::with_capacity(n_r);
        if eliminated.is_empty() {
            survivors.extend(first..next_sample);
            skipped += n_r as u64;
        } else {
            for j in first..next_sample {
                match budget_hit(asker.ask(j, &eliminated))? {
                    None => {
                        stop = StopReason::QueryBudget;
                        break 'rounds;
                    }
                    Some(true) => {}
                    Some(false) => survivors.push(j),
                }
            }
        }
        if survivors.is_empty() {
            log.push(RoundRecord {
                round: r,
                samples: n_r,
                survivors: 0,
                queries: asker.issued() - start_queries,
                eta: f64::NAN,
                mode: None,
                partition: None,
                eliminated: Vec::new(),
            });
            continue;
        }

        let eps = schedule.slack(r, m) * n_r as f64 / survivors.len() as f64;
        let out = rebalance(&mut asker, &mut tree, &survivors, 0.5, eps)?;
        if !out.completed {
            stop = StopReason::QueryBudget;
            break;
        }
        class = Some(out.mode);
        let leader = out
            .partition
            .block_of(out.mode)
            .expect("leader has a block")
            .count;
        let mut keep = Vec::new();
        let mut dropped = Vec::new();
        for b in &out.partition.blocks {
            if loses(leader, b.count, schedule.c, m, n_r as u64, schedule.delta) {
                dropped.extend_from_slice(&b.classes);
            } else {
                keep.push((b.vertex, b.count));
            }
        }
        if !dropped.is_empty() {
            tree.rebuild_top(&keep);
            for &c in &dropped {
                eliminated.insert(c);
            }
            live_count -= dropped.len();
            dropped.sort_unstable();
        }
        log.push(RoundRecord {
            round: r,
            samples: n_r,
            survivors: survivors.len(),
            queries: asker.issued() - start_queries,
            eta: out.eta,
            mode: Some(out.mode),
            partition: Some(out.partition),
            eliminated: dropped,
        });
        if live_count <= 1 {
            stop = StopReason::SingleSurvivor;
            break;
        }
    }

    if live_count == 1 {
        class = tree.class_of(tree.root());
    }
    let class = class.ok_or(EstimatorError::NoData)?;
    Ok(ModeEstimate {
        class,
        queries_used: asker.issued(),
        queries_paper: asker.issued() + skipped,
        samples_used: next_sample,
        rounds: log.len(),
        terminated: stop == StopReason::SingleSurvivor,
        stop,
        round_log: log,
    })
}
