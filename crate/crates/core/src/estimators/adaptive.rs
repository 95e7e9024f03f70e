use super::{budget_hit, empirical_mode, Asker, EstimatorError, ModeEstimate, StopReason};
use crate::coding::CodeTree;
use crate::oracle::{ClassSet, QueryOracle};

/// Identifies each of `n` samples by walking an adaptive Huffman tree built
/// on the counts seen so far, then returns the empirical mode.
///
/// Unseen classes sit in a balanced subtree under the not-yet-observed
/// vertex. At every internal vertex the query is "is the sample in the
/// right subtree?".
pub fn adaptive_search(oracle: &mut QueryOracle, n: usize) -> Result<ModeEstimate, EstimatorError> {
    if n == 0 {
        return Err(EstimatorError::InvalidParameter("n must be at least 1".into()));
    }
    let m = oracle.num_classes();
    let mut tree = CodeTree::unobserved(m)?;
    let mut asker = Asker::new(oracle);
    let mut set = ClassSet::new(m);
    let mut counts = vec![0u64; m];
    let mut identified = 0;
    let mut stop = StopReason::SamplesExhausted;
    'samples: for j in 0..n {
        let mut v = tree.root();
        while let Some((l, r)) = tree.children(v) {
            tree.classes_under(r, &mut set);
            match budget_hit(asker.ask(j, &set))? {
                Some(true) => v = r,
                Some(false) => v = l,
                None => {
                    stop = StopReason::QueryBudget;
                    break 'samples;
                }
            }
        }
        let y = tree.class_of(v).expect("walk ends at a leaf");
        tree.observe(y)?;
        counts[y] += 1;
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
