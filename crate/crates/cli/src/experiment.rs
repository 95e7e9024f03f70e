use std::io::{self, Write};
use std::time::Instant;

use mepf_core::{
    adaptive_search, elimination, exhaustive_search, set_elimination, theoretical_alpha,
    truncated_search, Algorithm, EstimatorError, ModeEstimate, ProbabilityVector, QueryOracle,
};
use rayon::prelude::*;

use crate::{CliError, ExperimentConfig};

pub const CSV_HEADER: [&str; 10] = [
    "trial_id",
    "algorithm",
    "m",
    "delta",
    "correct",
    "queries_raw",
    "queries_paper",
    "samples",
    "rounds",
    "wall_ns",
];

/// Per-trial seed, shared by every algorithm so trials are paired.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(master ^ splitmix(trial as u64))
}

/// One row of the per-trial CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub algorithm: Algorithm,
    pub m: usize,
    pub delta: f64,
    pub correct: bool,
    pub queries_raw: u64,
    pub queries_paper: u64,
    pub samples: usize,
    pub rounds: usize,
    pub wall_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub errors: usize,
    pub error_rate: f64,
    /// Binomial standard error of `error_rate`.
    pub stderr: f64,
    pub mean_queries_raw: f64,
    pub median_queries_raw: f64,
    pub mean_queries_paper: f64,
    pub median_queries_paper: f64,
    pub mean_samples: f64,
    /// Mean paper-convention queries divided by `ln(1/δ)`.
    pub empirical_alpha: f64,
    pub theoretical_alpha: f64,
    pub mean_wall_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub algorithms: Vec<AlgorithmSummary>,
    pub wall_ns: u64,
}

impl ExperimentSummary {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|s| s.algorithm == algorithm)
    }

    /// Tab-separated table, one row per algorithm.
    pub fn render(&self) -> String {
        let mut out = String::from(
            "algorithm\ttrials\terror_rate\tstderr\tmean_raw\tmedian_raw\tmean_paper\tmedian_paper\tmean_samples\talpha_emp\talpha_theory\n",
        );
        for s in &self.algorithms {
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.6}\t{:.3}\t{:.1}\t{:.3}\t{:.1}\t{:.3}\t{:.3}\t{:.3}\n",
                s.algorithm,
                s.trials,
                s.error_rate,
                s.stderr,
                s.mean_queries_raw,
                s.median_queries_raw,
                s.mean_queries_paper,
                s.median_queries_paper,
                s.mean_samples,
                s.empirical_alpha,
                s.theoretical_alpha,
            ));
        }
        out
    }
}

/// Per-trial records and their summary.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub records: Vec<TrialRecord>,
    pub summary: ExperimentSummary,
}

impl Experiment {
    pub fn csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_csv(&self.records, &mut buf).expect("writing to memory");
        buf
    }
}

/// Runs one estimator on a fresh oracle.
pub fn run_estimator(
    config: &ExperimentConfig,
    pv: &ProbabilityVector,
    algorithm: Algorithm,
    oracle: &mut QueryOracle,
) -> Result<ModeEstimate, EstimatorError> {
    let schedule = config.schedule();
    match algorithm {
        Algorithm::Exhaustive => exhaustive_search(oracle, config.resolved_n(pv)),
        Algorithm::Adaptive => adaptive_search(oracle, config.resolved_n(pv)),
        Algorithm::Truncated => truncated_search(oracle, &schedule, config.resolved_rounds(pv)),
        Algorithm::Elimination => elimination(oracle, &schedule),
        Algorithm::SetElimination => set_elimination(oracle, &schedule, config.max_rounds),
    }
}

pub fn oracle_for(config: &ExperimentConfig, pv: &ProbabilityVector, trial: usize) -> QueryOracle {
    let o = QueryOracle::iid(pv, trial_seed(config.seed, trial));
    match config.budget {
        Some(b) => o.with_budget(b),
        None => o,
    }
}

fn run_trial(
    config: &ExperimentConfig,
    pv: &ProbabilityVector,
    algorithm: Algorithm,
    trial: usize,
) -> Result<TrialRecord, CliError> {
    let mut oracle = oracle_for(config, pv, trial);
    let start = Instant::now();
    let result = run_estimator(config, pv, algorithm, &mut oracle);
    let wall = start.elapsed().as_nanos() as u64;
    let record = |correct, paper, samples, rounds| TrialRecord {
        trial_id: trial,
        algorithm,
        m: pv.num_classes(),
        delta: config.delta,
        correct,
        queries_raw: oracle.query_count(),
        queries_paper: paper,
        samples,
        rounds,
        wall_ns: if config.timing { wall } else { 0 },
    };
    match result {
        Ok(est) => Ok(record(
            est.class == pv.mode(),
            est.queries_paper,
            est.samples_used,
            est.rounds,
        )),
        // The budget ran out before any sample was identified.
        Err(EstimatorError::NoData) => {
            Ok(record(false, oracle.query_count(), oracle.samples_touched(), 0))
        }
        Err(e) => Err(CliError::InvalidConfig(e.to_string())),
    }
}

/// Runs every trial of every selected algorithm on `jobs` worker threads
/// (0 for one per core) and writes the CSV to `config.out` if set. Records
/// come back in (trial, algorithm) order whatever the scheduling.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Experiment, CliError> {
    let pv = config.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::InvalidConfig(format!("thread pool: {e}")))?;
    let cells: Vec<(usize, Algorithm)> = (0..config.trials)
        .flat_map(|t| config.algorithms.iter().map(move |&a| (t, a)))
        .collect();
    let records: Vec<TrialRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(t, a)| run_trial(config, &pv, a, t))
            .collect::<Result<_, _>>()
    })?;
    let wall_ns = start.elapsed().as_nanos() as u64;
    let summary = summarize(config, &pv, &records, wall_ns);
    let experiment = Experiment { records, summary };
    if let Some(path) = &config.out {
        std::fs::write(path, experiment.csv())?;
    }
    Ok(experiment)
}

pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.trial_id.to_string(),
            r.algorithm.name().to_string(),
            r.m.to_string(),
            r.delta.to_string(),
            u8::from(r.correct).to_string(),
            r.queries_raw.to_string(),
            r.queries_paper.to_string(),
            r.samples.to_string(),
            r.rounds.to_string(),
            r.wall_ns.to_string(),
        ])?;
    }
    w.flush()
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<TrialRecord>, CliError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(CliError::InvalidConfig(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let bad = |i: usize| CliError::InvalidConfig(format!("bad CSV field {:?}", field(i)));
        out.push(TrialRecord {
            trial_id: field(0).parse().map_err(|_| bad(0))?,
            algorithm: field(1).parse().map_err(|_| bad(1))?,
            m: field(2).parse().map_err(|_| bad(2))?,
            delta: field(3).parse().map_err(|_| bad(3))?,
            correct: field(4) == "1",
            queries_raw: field(5).parse().map_err(|_| bad(5))?,
            queries_paper: field(6).parse().map_err(|_| bad(6))?,
            samples: field(7).parse().map_err(|_| bad(7))?,
            rounds: field(8).parse().map_err(|_| bad(8))?,
            wall_ns: field(9).parse().map_err(|_| bad(9))?,
        });
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => CliError::Io(e),
        other => CliError::InvalidConfig(format!("CSV: {other:?}")),
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// Aggregates per-trial records; depends on nothing else the run produced,
/// so it can be recomputed from the CSV.
pub fn summarize(
    config: &ExperimentConfig,
    pv: &ProbabilityVector,
    records: &[TrialRecord],
    wall_ns: u64,
) -> ExperimentSummary {
    let log_inv_delta = (1.0 / config.delta).ln();
    let algorithms = config
        .algorithms
        .iter()
        .map(|&a| {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.algorithm == a).collect();
            let raw: Vec<f64> = rows.iter().map(|r| r.queries_raw as f64).collect();
            let paper: Vec<f64> = rows.iter().map(|r| r.queries_paper as f64).collect();
            let samples: Vec<f64> = rows.iter().map(|r| r.samples as f64).collect();
            let wall: Vec<f64> = rows.iter().map(|r| r.wall_ns as f64).collect();
            let errors = rows.iter().filter(|r| !r.correct).count();
            let trials = rows.len();
            let error_rate = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
            AlgorithmSummary {
                algorithm: a,
                trials,
                errors,
                error_rate,
                stderr: if trials == 0 {
                    0.0
                } else {
                    (error_rate * (1.0 - error_rate) / trials as f64).sqrt()
                },
                mean_queries_raw: mean(&raw),
                median_queries_raw: median(&raw),
                mean_queries_paper: mean(&paper),
                median_queries_paper: median(&paper),
                mean_samples: mean(&samples),
                empirical_alpha: mean(&paper) / log_inv_delta,
                theoretical_alpha: theoretical_alpha(pv, a),
                mean_wall_ns: mean(&wall),
            }
        })
        .collect();
    ExperimentSummary {
        config: config.clone(),
        algorithms,
        wall_ns,
    }
}
