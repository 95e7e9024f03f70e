//! Mode estimators driven purely by membership queries.
//!
//! Every estimator takes a [`QueryOracle`] and learns about samples only
//! through [`QueryOracle::query`]. The [`ModeEstimate`] it returns reports
//! the queries it issued, which always equals the oracle's own count.

mod adaptive;
mod elimination;
mod exhaustive;
mod rebalance;
mod set_elimination;
mod truncated;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::coding::CodingError;
use crate::oracle::{ClassSet, OracleError, QueryOracle};

pub use adaptive::adaptive_search;
pub use elimination::{elimination, elimination_radius};
pub use exhaustive::exhaustive_search;
pub use rebalance::{
    batch_tree_rebalance, is_admissible, Block, Partition, RebalanceOutcome, SearchTree,
};
pub use set_elimination::set_elimination;
pub use truncated::truncated_search;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("no positive counts")]
    NoData,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Coding(#[from] CodingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Exhaustive,
    Adaptive,
    Truncated,
    Elimination,
    SetElimination,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Exhaustive,
        Algorithm::Adaptive,
        Algorithm::Truncated,
        Algorithm::Elimination,
        Algorithm::SetElimination,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Exhaustive => "exhaustive",
            Algorithm::Adaptive => "adaptive",
            Algorithm::Truncated => "truncated",
            Algorithm::Elimination => "elimination",
            Algorithm::SetElimination => "set-elimination",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| EstimatorError::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

/// Why an estimator stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The fixed sample count was used up.
    SamplesExhausted,
    /// The fixed number of rounds was run.
    RoundsExhausted,
    /// A single candidate survived elimination.
    SingleSurvivor,
    /// The oracle's query budget ran out first.
    QueryBudget,
}

/// What happened in one round of a batched estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Fresh samples drawn this round.
    pub samples: usize,
    /// Samples that reached the rebalancing step.
    pub survivors: usize,
    pub queries: u64,
    /// Admissibility level the round's partition was built for.
    pub eta: f64,
    pub mode: Option<usize>,
    pub partition: Option<Partition>,
    /// Classes eliminated at the end of the round.
    pub eliminated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeEstimate {
    pub class: usize,
    pub queries_used: u64,
    /// Queries under the convention that every elimination test is charged,
    /// including the ones skipped while nothing was eliminated.
    pub queries_paper: u64,
    pub samples_used: usize,
    pub rounds: usize,
    pub terminated: bool,
    pub stop: StopReason,
    pub round_log: Vec<RoundRecord>,
}

/// Round sizes, slack and confidence parameters for the batched and
/// elimination estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub delta: f64,
    /// Confidence constant in the elimination radius.
    pub c: f64,
    /// Round `r` draws `growth^r` samples.
    pub growth: u64,
    /// Multiplier on the default slack `(1/4m)(2/3)^{r/2}`.
    pub slack_scale: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            delta: 0.1,
            c: 24.0,
            growth: 2,
            slack_scale: 1.0,
        }
    }
}

impl Schedule {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(EstimatorError::InvalidParameter(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if !(self.c > 1.0) {
            return Err(EstimatorError::InvalidParameter(format!("c must exceed 1, got {}", self.c)));
        }
        if self.growth < 2 {
            return Err(EstimatorError::InvalidParameter("growth must be at least 2".into()));
        }
        if !(self.slack_scale >= 0.0 && self.slack_scale.is_finite()) {
            return Err(EstimatorError::InvalidParameter("slack_scale must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Samples drawn in round `r ≥ 1`.
    pub fn round_size(&self, r: usize) -> usize {
        let n = (self.growth as u128).saturating_pow(r as u32);
        usize::try_from(n).unwrap_or(usize::MAX)
    }

    /// Slack `ε_r` for round `r ≥ 1` over `m` classes.
    pub fn slack(&self, r: usize, m: usize) -> f64 {
        self.slack_scale / (4.0 * m as f64) * (2.0f64 / 3.0).powf(r as f64 / 2.0)
    }
}

/// Index of the largest count, lowest index on ties.
pub fn empirical_mode(counts: &[u64]) -> Result<usize, EstimatorError> {
    let mut best: Option<(usize, u64)> = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i).ok_or(EstimatorError::NoData)
}

/// Oracle wrapper that tallies the queries an estimator issues itself.
pub(crate) struct Asker<'a> {
    oracle: &'a mut QueryOracle,
    issued: u64,
}

impl<'a> Asker<'a> {
    pub(crate) fn new(oracle: &'a mut QueryOracle) -> Self {
        Self { oracle, issued: 0 }
    }

    pub(crate) fn ask(&mut self, j: usize, set: &ClassSet) -> Result<bool, OracleError> {
        let bit = self.oracle.query(j, set)?;
        self.issued += 1;
        Ok(bit)
    }

    pub(crate) fn issued(&self) -> u64 {
        self.issued
    }
}

/// Splits a query result into "keep going" and "budget ran out".
pub(crate) fn budget_hit<T>(r: Result<T, OracleError>) -> Result<Option<T>, EstimatorError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(OracleError::BudgetExhausted { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_mode_rules() {
        assert_eq!(empirical_mode(&[5, 3, 2]).unwrap(), 0);
        assert_eq!(empirical_mode(&[2, 2, 1]).unwrap(), 0);
        assert_eq!(empirical_mode(&[0, 1, 3, 3]).unwrap(), 2);
        assert!(matches!(empirical_mode(&[0, 0, 0]), Err(EstimatorError::NoData)));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("SET_ELIMINATION".parse::<Algorithm>().unwrap(), Algorithm::SetElimination);
        assert!("greedy".parse::<Algorithm>().is_err());
    }

    #[test]
    fn schedule_defaults() {
        let s = Schedule::default();
        s.validate().unwrap();
        assert_eq!(s.round_size(1), 2);
        assert_eq!(s.round_size(10), 1024);
        assert!((s.slack(2, 4) - 1.0 / 16.0 * 2.0 / 3.0).abs() < 1e-15);
        assert!(s.slack(3, 4) < s.slack(2, 4));
        assert!(Schedule::with_delta(1.0).validate().is_err());
        assert!(Schedule { c: 1.0, ..s }.validate().is_err());
    }
}
