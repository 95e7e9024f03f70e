//! Quick invariant and oracle suites behind `mepf check`.

use mepf_core::{
    gap_comparison_bounds, gaps, information_projection, Algorithm, CodeTree, ProbabilityVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::experiment::{oracle_for, run_estimator};
use crate::{CliError, ExperimentConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Minimum Σ count·depth over all full binary trees on the given leaves.
pub fn brute_force_cost(counts: &[u64]) -> u64 {
    let m = counts.len();
    let full = (1usize << m) - 1;
    let mut best = vec![u64::MAX; full + 1];
    let mut sum = vec![0u64; full + 1];
    for s in 1..=full {
        sum[s] = (0..m).filter(|i| s >> i & 1 == 1).map(|i| counts[i]).sum();
        if s.count_ones() == 1 {
            best[s] = 0;
            continue;
        }
        let mut a = (s - 1) & s;
        while a > 0 {
            let b = s ^ a;
            if a < b {
                best[s] = best[s].min(best[a] + best[b] + sum[s]);
            }
            a = (a - 1) & s;
        }
    }
    best[full]
}

/// Random masses with a unique mode: uniform weights, one of them boosted.
pub fn random_distribution(rng: &mut impl Rng, max_m: usize) -> ProbabilityVector {
    loop {
        let m = rng.random_range(2..=max_m);
        let mut w: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let i = rng.random_range(0..m);
        w[i] += rng.random::<f64>();
        if let Ok(pv) = ProbabilityVector::new(&w) {
            if pv.masses().iter().filter(|&&p| p == pv.mass(pv.mode())).count() == 1 {
                return pv;
            }
        }
    }
}

fn huffman_optimality() -> CheckOutcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for m in 1..=4u32 {
        for code in 0..6u64.pow(m) {
            let counts: Vec<u64> = (0..m).map(|i| code / 6u64.pow(i) % 6 + 1).collect();
            let t = CodeTree::huffman(counts.iter().copied().enumerate()).expect("positive counts");
            if t.weighted_depth() as u64 != brute_force_cost(&counts) {
                bad.push(counts);
            }
            checked += 1;
        }
    }
    CheckOutcome::new(
        "huffman-optimality",
        bad.is_empty(),
        format!("{checked} count vectors, {} mismatches {:?}", bad.len(), bad.first()),
    )
}

fn two_balanced(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..500 {
        let m = rng.random_range(2..=64);
        let counts: Vec<u64> = (0..m).map(|_| rng.random_range(1..1_000_000)).collect();
        let t = CodeTree::huffman(counts.into_iter().enumerate()).expect("positive counts");
        if !t.check_balanced(2.0).expect("non-empty tree") {
            violations += 1;
        }
    }
    CheckOutcome::new("two-balanced", violations == 0, format!("500 trees, {violations} violations"))
}

fn incremental_updates(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..100 {
        let m = rng.random_range(1..=16);
        let mut t = CodeTree::unobserved(m).expect("m >= 1");
        for _ in 0..rng.random_range(1..=200) {
            t.observe(rng.random_range(0..m)).expect("class in range");
            let rebuilt = CodeTree::from_observed(&t.observed_counts(), &t.unobserved_classes())
                .expect("valid counts");
            if t.weighted_depth() != rebuilt.weighted_depth() || t.check_invariants().is_err() {
                mismatches += 1;
            }
        }
    }
    CheckOutcome::new(
        "incremental-updates",
        mismatches == 0,
        format!("100 sequences, {mismatches} mismatched steps"),
    )
}

fn gap_identities(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut sandwich = 0;
    for _ in 0..500 {
        let pv = random_distribution(&mut rng, 32);
        let proj = information_projection(&pv);
        worst = worst.max((proj.divergence_nats - gaps(&pv).delta_sq[pv.runner_up()]).abs());
        for i in (0..pv.num_classes()).filter(|&i| i != pv.mode()) {
            if !gap_comparison_bounds(&pv, i).is_ok_and(|b| b.holds) {
                sandwich += 1;
            }
        }
    }
    CheckOutcome::new(
        "gap-identities",
        worst <= 1e-9 && sandwich == 0,
        format!("500 instances, projection error {worst:.2e}, {sandwich} sandwich violations"),
    )
}

fn accounting(config: &ExperimentConfig, pv: &ProbabilityVector) -> CheckOutcome {
    let trials = config.trials.min(20);
    let bad: Vec<String> = config
        .algorithms
        .par_iter()
        .flat_map_iter(|&a| {
            (0..trials).filter_map(move |t| {
                let mut o = oracle_for(config, pv, t);
                match run_estimator(config, pv, a, &mut o) {
                    Ok(e) if e.queries_used == o.query_count() && e.queries_paper >= e.queries_used => None,
                    Ok(e) => Some(format!("{a} trial {t}: reported {} oracle {}", e.queries_used, o.query_count())),
                    Err(_) if o.remaining_budget() == Some(0) => None,
                    Err(e) => Some(format!("{a} trial {t}: {e}")),
                }
            })
        })
        .collect();
    CheckOutcome::new(
        "query-accounting",
        bad.is_empty(),
        format!("{trials} trials per algorithm, {} failures {:?}", bad.len(), bad.first()),
    )
}

/// Error rate of each elimination estimator against `δ` plus three binomial
/// standard errors. Runs that stop on the query budget count as errors.
fn pac(config: &ExperimentConfig, pv: &ProbabilityVector) -> Vec<CheckOutcome> {
    let tolerance = config.delta + 3.0 * (config.delta * (1.0 - config.delta) / config.trials as f64).sqrt();
    [Algorithm::Elimination, Algorithm::SetElimination]
        .into_iter()
        .filter(|a| config.algorithms.contains(a))
        .map(|a| {
            let errors = (0..config.trials)
                .into_par_iter()
                .filter(|&t| {
                    let mut o = oracle_for(config, pv, t);
                    !matches!(run_estimator(config, pv, a, &mut o), Ok(e) if e.terminated && e.class == pv.mode())
                })
                .count();
            let rate = errors as f64 / config.trials as f64;
            CheckOutcome::new(
                if a == Algorithm::Elimination { "pac-elimination" } else { "pac-set-elimination" },
                rate <= tolerance,
                format!("{} trials, error rate {rate:.4} <= {tolerance:.4}", config.trials),
            )
        })
        .collect()
}

/// Runs the structural suites, then the accounting and confidence suites
/// on the configured distribution.
pub fn run_checks(config: &ExperimentConfig) -> Result<Vec<CheckOutcome>, CliError> {
    let pv = config.validate()?;
    let mut out = vec![
        huffman_optimality(),
        two_balanced(config.seed),
        incremental_updates(config.seed),
        gap_identities(config.seed),
        accounting(config, &pv),
    ];
    out.extend(pac(config, &pv));
    Ok(out)
}
