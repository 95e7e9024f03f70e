//! The partial-feedback channel.
//!
//! Estimators never see samples directly. They ask whether sample `j` lies
//! in a set `S` of classes and get one bit back. [`QueryOracle`] holds the
//! hidden samples, answers those questions, and counts every one of them.

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::distribution::{ProbabilityVector, Sampler};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("query set must be a non-empty proper subset of the classes")]
    DegenerateSet,
    #[error("query budget of {budget} exhausted")]
    BudgetExhausted { budget: u64 },
    #[error("sample {index} requested but the replay holds {len}")]
    ReplayExhausted { index: usize, len: usize },
    #[error("class {class} out of range for {m} classes")]
    ClassOutOfRange { class: usize, m: usize },
    #[error("line {line}: cannot parse {text:?} as a class index")]
    Parse { line: usize, text: String },
    #[error("writing trace: {0}")]
    Trace(#[from] std::io::Error),
}

/// Fixed-universe bitset over class indices, meant to be reused between
/// queries.
#[derive(Clone, PartialEq, Eq)]
pub struct ClassSet {
    words: Vec<u64>,
    universe: usize,
    len: usize,
}

impl ClassSet {
    pub fn new(universe: usize) -> Self {
        Self {
            words: vec![0; universe.div_ceil(64)],
            universe,
            len: 0,
        }
    }

    pub fn from_classes(universe: usize, classes: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::new(universe);
        for c in classes {
            s.insert(c);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
        self.len = 0;
    }

    /// Inserts `class`; panics if it lies outside the universe.
    pub fn insert(&mut self, class: usize) {
        assert!(class < self.universe, "class {class} outside universe {}", self.universe);
        let (w, b) = (class / 64, class % 64);
        if self.words[w] & (1 << b) == 0 {
            self.words[w] |= 1 << b;
            self.len += 1;
        }
    }

    pub fn remove(&mut self, class: usize) {
        if class < self.universe {
            let (w, b) = (class / 64, class % 64);
            if self.words[w] & (1 << b) != 0 {
                self.words[w] &= !(1 << b);
                self.len -= 1;
            }
        }
    }

    pub fn contains(&self, class: usize) -> bool {
        class < self.universe && self.words[class / 64] & (1 << (class % 64)) != 0
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }
}

impl fmt::Debug for ClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

enum Source {
    Iid { sampler: Sampler, rng: ChaCha8Rng },
    Replay,
}

/// Answers `1{Y_j ∈ S}` for hidden samples `Y_0, Y_1, …`.
///
/// I.i.d. samples are drawn lazily in index order, so the sample at a given
/// index depends only on the seed. A replay oracle serves a fixed sequence.
pub struct QueryOracle {
    m: usize,
    source: Source,
    samples: Vec<u32>,
    per_sample: Vec<u32>,
    total: u64,
    touched: usize,
    budget: Option<u64>,
    trace: Option<Box<dyn Write + Send>>,
}

impl fmt::Debug for QueryOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QueryOracle")
            .field("m", &self.m)
            .field("queries", &self.total)
            .field("samples_touched", &self.touched)
            .field("budget", &self.budget)
            .finish_non_exhaustive()
    }
}

impl QueryOracle {
    pub fn iid(pv: &ProbabilityVector, seed: u64) -> Self {
        Self::with_source(
            pv.num_classes(),
            Source::Iid {
                sampler: pv.sampler(),
                rng: ChaCha8Rng::seed_from_u64(seed),
            },
            Vec::new(),
        )
    }

    pub fn replay(m: usize, samples: Vec<usize>) -> Result<Self, OracleError> {
        if let Some(&class) = samples.iter().find(|&&c| c >= m) {
            return Err(OracleError::ClassOutOfRange { class, m });
        }
        Ok(Self::with_source(m, Source::Replay, samples))
    }

    fn with_source(m: usize, source: Source, samples: Vec<usize>) -> Self {
        assert!(u32::try_from(m).is_ok(), "at most 2^32 classes");
        let samples: Vec<u32> = samples.into_iter().map(|c| c as u32).collect();
        Self {
            m,
            source,
            per_sample: vec![0; samples.len()],
            samples,
            total: 0,
            touched: 0,
            budget: None,
            trace: None,
        }
    }

    /// Caps the total number of queries.
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    /// Writes one `j<TAB>sorted,set<TAB>bit` line per answered query.
    pub fn with_trace(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.trace = Some(sink);
        self
    }

    pub fn num_classes(&self) -> usize {
        self.m
    }

    pub fn query(&mut self, j: usize, set: &ClassSet) -> Result<bool, OracleError> {
        let covered = if set.universe() <= self.m {
            set.len()
        } else {
            set.iter().filter(|&c| c < self.m).count()
        };
        if set.is_empty() || covered >= self.m {
            return Err(OracleError::DegenerateSet);
        }
        if let Some(budget) = self.budget {
            if self.total >= budget {
                return Err(OracleError::BudgetExhausted { budget });
            }
        }
        self.materialize(j)?;
        let bit = set.contains(self.samples[j] as usize);
        self.total += 1;
        if self.per_sample[j] == 0 {
            self.touched += 1;
        }
        self.per_sample[j] = self.per_sample[j].checked_add(1).expect("fewer than 2^32 queries per sample");
        if let Some(out) = self.trace.as_mut() {
            let members: Vec<String> = set.iter().map(|c| c.to_string()).collect();
            writeln!(out, "{j}\t{}\t{}", members.join(","), u8::from(bit))?;
        }
        Ok(bit)
    }

    fn materialize(&mut self, j: usize) -> Result<(), OracleError> {
        match &mut self.source {
            Source::Iid { sampler, rng } => {
                while self.samples.len() <= j {
                    self.samples.push(sampler.draw(rng) as u32);
                    self.per_sample.push(0);
                }
                Ok(())
            }
            Source::Replay if j < self.samples.len() => Ok(()),
            Source::Replay => Err(OracleError::ReplayExhausted {
                index: j,
                len: self.samples.len(),
            }),
        }
    }

    /// Total queries answered so far.
    pub fn query_count(&self) -> u64 {
        self.total
    }

    /// Queries answered about sample `j`.
    pub fn queries_for(&self, j: usize) -> u64 {
        self.per_sample.get(j).map_or(0, |&q| u64::from(q))
    }

    /// Number of distinct samples queried at least once.
    pub fn samples_touched(&self) -> usize {
        self.touched
    }

    pub fn remaining_budget(&self) -> Option<u64> {
        self.budget.map(|b| b.saturating_sub(self.total))
    }

    pub fn flush_trace(&mut self) -> Result<(), OracleError> {
        if let Some(out) = self.trace.as_mut() {
            out.flush()?;
        }
        Ok(())
    }
}

/// Parses newline-separated class indices; blank lines are skipped.
pub fn parse_replay(text: &str, m: usize) -> Result<Vec<usize>, OracleError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let class: usize = t.parse().map_err(|_| OracleError::Parse {
            line: i + 1,
            text: t.to_string(),
        })?;
        if class >= m {
            return Err(OracleError::ClassOutOfRange { class, m });
        }
        out.push(class);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, Mutex};

    use super::*;

    #[derive(Clone, Default)]
    struct Shared(Arc<Mutex<Vec<u8>>>);

    impl Write for Shared {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn class_set_basics() {
        let mut s = ClassSet::new(130);
        s.insert(3);
        s.insert(129);
        s.insert(64);
        s.insert(3);
        assert_eq!(s.len(), 3);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 64, 129]);
        s.remove(64);
        s.remove(64);
        assert!(!s.contains(64));
        assert_eq!(format!("{s:?}"), "{3, 129}");
        s.clear();
        assert!(s.is_empty());
    }

    #[test]
    fn replay_answers_and_counts() {
        let mut o = QueryOracle::replay(4, vec![0, 2, 3]).unwrap();
        let s = ClassSet::from_classes(4, [2, 3]);
        assert!(!o.query(0, &s).unwrap());
        assert!(o.query(1, &s).unwrap());
        assert!(o.query(1, &ClassSet::from_classes(4, [2])).unwrap());
        assert_eq!(o.query_count(), 3);
        assert_eq!(o.queries_for(1), 2);
        assert_eq!(o.queries_for(2), 0);
        assert_eq!(o.samples_touched(), 2);
        assert!(matches!(o.query(3, &s), Err(OracleError::ReplayExhausted { index: 3, len: 3 })));
    }

    #[test]
    fn degenerate_sets_rejected_and_not_counted() {
        let mut o = QueryOracle::replay(3, vec![1]).unwrap();
        assert!(matches!(o.query(0, &ClassSet::new(3)), Err(OracleError::DegenerateSet)));
        let all = ClassSet::from_classes(3, 0..3);
        assert!(matches!(o.query(0, &all), Err(OracleError::DegenerateSet)));
        assert_eq!(o.query_count(), 0);
    }

    #[test]
    fn budget_stops_queries() {
        let mut o = QueryOracle::replay(2, vec![0, 1]).unwrap().with_budget(2);
        let s = ClassSet::from_classes(2, [1]);
        o.query(0, &s).unwrap();
        o.query(1, &s).unwrap();
        assert_eq!(o.remaining_budget(), Some(0));
        assert!(matches!(o.query(0, &s), Err(OracleError::BudgetExhausted { budget: 2 })));
        assert_eq!(o.query_count(), 2);
    }

    #[test]
    fn iid_is_deterministic_per_index() {
        let pv = ProbabilityVector::new(&[0.5, 0.3, 0.2]).unwrap();
        let s = ClassSet::from_classes(3, [0]);
        let mut a = QueryOracle::iid(&pv, 11);
        let mut b = QueryOracle::iid(&pv, 11);
        // Different access orders, same answers.
        let fwd: Vec<bool> = (0..50).map(|j| a.query(j, &s).unwrap()).collect();
        let mut back: Vec<bool> = (0..50).rev().map(|j| b.query(j, &s).unwrap()).collect();
        back.reverse();
        assert_eq!(fwd, back);
        let drawn = crate::distribution::sample(&pv, 11, 50);
        let direct: Vec<bool> = drawn.iter().map(|&y| y == 0).collect();
        assert_eq!(fwd, direct);
    }

    #[test]
    fn trace_lines() {
        let sink = Shared::default();
        let mut o = QueryOracle::replay(5, vec![4, 1])
            .unwrap()
            .with_trace(Box::new(sink.clone()));
        o.query(0, &ClassSet::from_classes(5, [4, 0])).unwrap();
        o.query(1, &ClassSet::from_classes(5, [2])).unwrap();
        let text = String::from_utf8(sink.0.lock().unwrap().clone()).unwrap();
        assert_eq!(text, "0\t0,4\t1\n1\t2\t0\n");
    }

    #[test]
    fn replay_parsing() {
        assert_eq!(parse_replay("1\n\n 0 \n2\n", 3).unwrap(), vec![1, 0, 2]);
        assert!(matches!(parse_replay("1\nx\n", 3), Err(OracleError::Parse { line: 2, .. })));
        assert!(matches!(
            parse_replay("5\n", 3),
            Err(OracleError::ClassOutOfRange { class: 5, m: 3 })
        ));
        assert!(matches!(
            QueryOracle::replay(2, vec![2]),
            Err(OracleError::ClassOutOfRange { class: 2, m: 2 })
        ));
    }
}
