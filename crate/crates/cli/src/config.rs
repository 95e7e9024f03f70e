use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use mepf_core::{Algorithm, ProbabilityVector, Schedule};

use crate::CliError;

/// A named distribution family with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    /// Explicit weights, normalized on use.
    Custom(Vec<f64>),
    Zipf { s: f64, m: usize },
    Footnote1(usize),
    Footnote2(usize),
}

impl DistSpec {
    pub fn build(&self) -> Result<ProbabilityVector, CliError> {
        let pv = match self {
            DistSpec::Custom(w) => ProbabilityVector::new(w),
            DistSpec::Zipf { s, m } => ProbabilityVector::zipf(*s, *m),
            DistSpec::Footnote1(m) => ProbabilityVector::footnote1(*m),
            DistSpec::Footnote2(m) => ProbabilityVector::footnote2(*m),
        };
        pv.map_err(|e| CliError::InvalidConfig(format!("{self}: {e}")))
    }

    pub fn num_classes(&self) -> usize {
        match self {
            DistSpec::Custom(w) => w.len(),
            DistSpec::Zipf { m, .. } | DistSpec::Footnote1(m) | DistSpec::Footnote2(m) => *m,
        }
    }

    /// Same family with `m` classes; custom weights cannot be resized.
    pub fn with_classes(&self, m: usize) -> Result<DistSpec, CliError> {
        match self {
            DistSpec::Custom(_) => Err(CliError::InvalidConfig(
                "cannot sweep m over custom masses".into(),
            )),
            DistSpec::Zipf { s, .. } => Ok(DistSpec::Zipf { s: *s, m }),
            DistSpec::Footnote1(_) => Ok(DistSpec::Footnote1(m)),
            DistSpec::Footnote2(_) => Ok(DistSpec::Footnote2(m)),
        }
    }
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistSpec::Custom(w) => {
                f.write_str("custom(")?;
                for (i, x) in w.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
            DistSpec::Zipf { s, m } => write!(f, "zipf({s},{m})"),
            DistSpec::Footnote1(m) => write!(f, "footnote1({m})"),
            DistSpec::Footnote2(m) => write!(f, "footnote2({m})"),
        }
    }
}

impl FromStr for DistSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CliError::InvalidConfig(format!("bad distribution spec {s:?}"));
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], &s[open + 1..s.len() - 1]),
            Some(_) => return Err(bad()),
            None => ("custom", s),
        };
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let float = |x: &str| x.parse::<f64>().map_err(|_| bad());
        let count = |x: &str| x.parse::<usize>().map_err(|_| bad());
        match (name.trim().to_ascii_lowercase().as_str(), args.as_slice()) {
            ("custom", w) => Ok(DistSpec::Custom(
                w.iter().map(|x| float(x)).collect::<Result<_, _>>()?,
            )),
            ("zipf", [s, m]) => Ok(DistSpec::Zipf {
                s: float(s)?,
                m: count(m)?,
            }),
            ("footnote1", [m]) => Ok(DistSpec::Footnote1(count(m)?)),
            ("footnote2", [m]) => Ok(DistSpec::Footnote2(count(m)?)),
            _ => Err(bad()),
        }
    }
}

/// Everything that determines an experiment's per-trial output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dist: DistSpec,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub seed: u64,
    pub delta: f64,
    /// Per-trial cap on oracle queries.
    pub budget: Option<u64>,
    /// Samples for the fixed-sample estimators; derived from `delta` when
    /// unset.
    pub n: Option<usize>,
    /// Rounds of the truncated search; derived from `n` when unset.
    pub rounds: Option<usize>,
    /// Round cap for set elimination.
    pub max_rounds: usize,
    pub c: f64,
    pub growth: u64,
    pub slack_scale: f64,
    /// Record per-trial wall time in the CSV (breaks byte-for-byte
    /// reproducibility).
    pub timing: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = Schedule::default();
        Self {
            dist: DistSpec::Footnote2(16),
            algorithms: Algorithm::ALL.to_vec(),
            trials: 100,
            seed: 1,
            delta: s.delta,
            budget: None,
            n: None,
            rounds: None,
            max_rounds: 40,
            c: s.c,
            growth: s.growth,
            slack_scale: s.slack_scale,
            timing: false,
            out: None,
        }
    }
}

const KEYS: [&str; 14] = [
    "dist",
    "algorithms",
    "trials",
    "seed",
    "delta",
    "budget",
    "n",
    "rounds",
    "max_rounds",
    "c",
    "growth",
    "slack_scale",
    "timing",
    "out",
];

impl ExperimentConfig {
    /// Parses flat `key = value` text. Blank lines and `#` comments are
    /// ignored; keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::InvalidConfig(format!("line {}: expected key = value", i + 1))
            })?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(CliError::InvalidConfig(format!("line {}: duplicate key {key}", i + 1)));
            }
            seen.push(key);
            cfg.set(key, value.trim())
                .map_err(|e| CliError::InvalidConfig(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        fn opt<T: FromStr>(key: &str, v: &str, none: &str) -> Result<Option<T>, String> {
            if v == none {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        match key {
            "dist" => self.dist = value.parse().map_err(|e: CliError| e.to_string())?,
            "algorithms" => self.algorithms = parse_algorithms(value).map_err(|e| e.to_string())?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "budget" => self.budget = opt(key, value, "none")?,
            "n" => self.n = opt(key, value, "auto")?,
            "rounds" => self.rounds = opt(key, value, "auto")?,
            "max_rounds" => self.max_rounds = num(key, value)?,
            "c" => self.c = num(key, value)?,
            "growth" => self.growth = num(key, value)?,
            "slack_scale" => self.slack_scale = num(key, value)?,
            "timing" => self.timing = num(key, value)?,
            "out" => self.out = if value == "none" { None } else { Some(value.into()) },
            _ => return Err(format!("unknown key {key:?} (expected one of {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` gives back `self`.
    pub fn to_text(&self) -> String {
        let algos: Vec<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        let or = |v: Option<String>, none: &str| v.unwrap_or_else(|| none.to_string());
        let lines = [
            ("dist", self.dist.to_string()),
            ("algorithms", algos.join(",")),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("delta", self.delta.to_string()),
            ("budget", or(self.budget.map(|b| b.to_string()), "none")),
            ("n", or(self.n.map(|n| n.to_string()), "auto")),
            ("rounds", or(self.rounds.map(|r| r.to_string()), "auto")),
            ("max_rounds", self.max_rounds.to_string()),
            ("c", self.c.to_string()),
            ("growth", self.growth.to_string()),
            ("slack_scale", self.slack_scale.to_string()),
            ("timing", self.timing.to_string()),
            ("out", or(self.out.as_ref().map(|p| p.display().to_string()), "none")),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            delta: self.delta,
            c: self.c,
            growth: self.growth,
            slack_scale: self.slack_scale,
        }
    }

    pub fn validate(&self) -> Result<ProbabilityVector, CliError> {
        let invalid = |msg: String| Err(CliError::InvalidConfig(msg));
        if self.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return invalid("no algorithms selected".into());
        }
        if self.n == Some(0) || self.rounds == Some(0) || self.max_rounds == 0 {
            return invalid("n, rounds and max_rounds must be positive".into());
        }
        self.schedule()
            .validate()
            .map_err(|e| CliError::InvalidConfig(e.to_string()))?;
        self.dist.build()
    }

    /// Sample count for the fixed-sample estimators: the configured `n`, or
    /// the smallest `n` with `exp(−nΔ₂²) ≤ δ`.
    pub fn resolved_n(&self, pv: &ProbabilityVector) -> usize {
        self.n.unwrap_or_else(|| {
            let gap = mepf_core::gaps(pv).delta_sq[pv.runner_up()];
            ((1.0 / self.delta).ln() / gap).ceil().max(1.0) as usize
        })
    }

    /// Rounds of the truncated search: the configured value, or the fewest
    /// rounds whose total sample count reaches [`Self::resolved_n`].
    pub fn resolved_rounds(&self, pv: &ProbabilityVector) -> usize {
        self.rounds.unwrap_or_else(|| {
            let target = self.resolved_n(pv);
            let s = self.schedule();
            let mut total = 0usize;
            let mut r = 0;
            while total < target {
                r += 1;
                total = total.saturating_add(s.round_size(r));
            }
            r.max(1)
        })
    }
}

pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>, CliError> {
    if list.trim() == "all" {
        return Ok(Algorithm::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let a: Algorithm = name
            .parse()
            .map_err(|e: mepf_core::EstimatorError| CliError::InvalidConfig(e.to_string()))?;
        if !out.contains(&a) {
            out.push(a);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dist_specs_parse_and_print() {
        for text in ["zipf(1,64)", "footnote1(32)", "footnote2(64)", "custom(0.5,0.3,0.2)"] {
            let d: DistSpec = text.parse().unwrap();
            assert_eq!(d.to_string(), text);
        }
        assert_eq!(
            "0.5, 0.3,0.2".parse::<DistSpec>().unwrap(),
            DistSpec::Custom(vec![0.5, 0.3, 0.2])
        );
        assert!("zipf(1)".parse::<DistSpec>().is_err());
        assert!("poisson(3)".parse::<DistSpec>().is_err());
    }

    #[test]
    fn text_form_round_trips() {
        let cfg = ExperimentConfig {
            dist: DistSpec::Custom(vec![0.1, 1.0 / 3.0, 0.2]),
            budget: Some(5000),
            n: Some(17),
            out: Some("runs/a.csv".into()),
            timing: true,
            ..ExperimentConfig::default()
        };
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn parse_errors() {
        assert!(ExperimentConfig::parse("trials = 3\ntrials = 4").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("trials 3").is_err());
        let cfg = ExperimentConfig::parse("# comment\n\ntrials = 0 # none\n").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::InvalidConfig(_))));
    }

    #[test]
    fn derived_sample_counts() {
        let cfg = ExperimentConfig {
            dist: DistSpec::Custom(vec![0.5, 0.3, 0.2]),
            ..ExperimentConfig::default()
        };
        let pv = cfg.validate().unwrap();
        // ln(10) / 0.0257315661 = 89.48
        assert_eq!(cfg.resolved_n(&pv), 90);
        // 2 + 4 + ... + 32 = 62 < 90 ≤ 126
        assert_eq!(cfg.resolved_rounds(&pv), 6);
    }
}
