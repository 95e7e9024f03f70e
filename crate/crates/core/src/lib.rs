//! Mode estimation with partial feedback.
//!
//! Samples from an unknown discrete distribution are hidden behind a
//! [`QueryOracle`] that only answers "is sample `j` in the set `S`?". The
//! estimators in [`estimators`] find the most likely class while spending
//! as few of those binary queries as possible, using adaptive prefix codes
//! from [`coding`] to decide what to ask.

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coding;
pub mod distribution;
pub mod estimators;
pub mod oracle;

pub use coding::{CodeTree, CodingError, VertexCode, VertexId};
pub use distribution::{
    entropy_bits, gap_comparison_bounds, gaps, information_projection, mode_error_bound, sample,
    theoretical_alpha, DistributionError, GapComparison, GapVector, InformationProjection,
    ProbabilityVector, Sampler,
};
pub use estimators::{
    adaptive_search, batch_tree_rebalance, elimination, empirical_mode, exhaustive_search,
    is_admissible, set_elimination, truncated_search, Algorithm, EstimatorError, ModeEstimate,
    Partition, RoundRecord, Schedule, SearchTree, StopReason,
};
pub use oracle::{parse_replay, ClassSet, OracleError, QueryOracle};
