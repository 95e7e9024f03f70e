use std::fmt;
use std::str::FromStr;

use crate::{CliError, ExperimentConfig, ExperimentSummary};

/// Parameter varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    M,
    Delta,
    N,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::M => "m",
            Axis::Delta => "delta",
            Axis::N => "n",
        }
    }

    pub fn value(self, config: &ExperimentConfig) -> Option<f64> {
        match self {
            Axis::M => Some(config.dist.num_classes() as f64),
            Axis::Delta => Some(config.delta),
            Axis::N => config.n.map(|n| n as f64),
        }
    }

    /// Returns `config` with this axis set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: &str) -> Result<ExperimentConfig, CliError> {
        let bad = || CliError::InvalidConfig(format!("bad {} value {value:?}", self.name()));
        let mut c = config.clone();
        match self {
            Axis::M => c.dist = c.dist.with_classes(value.parse().map_err(|_| bad())?)?,
            Axis::Delta => c.delta = value.parse().map_err(|_| bad())?,
            Axis::N => c.n = Some(value.parse().map_err(|_| bad())?),
        }
        Ok(c)
    }

    /// Blanks out this axis so configs that differ only along it compare
    /// equal.
    fn normalized(self, config: &ExperimentConfig) -> ExperimentConfig {
        let mut c = config.clone();
        c.out = None;
        match self {
            Axis::M => c.dist = c.dist.with_classes(0).unwrap_or(c.dist),
            Axis::Delta => c.delta = 0.0,
            Axis::N => c.n = None,
        }
        c
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "m" => Ok(Axis::M),
            "delta" => Ok(Axis::Delta),
            "n" => Ok(Axis::N),
            _ => Err(CliError::InvalidConfig(format!("unknown axis {s:?}"))),
        }
    }
}

/// Gnuplot-ready table: one row per summary, with mean paper-convention
/// queries and error rate for each algorithm. The first line is a `#`
/// header naming the columns.
pub fn emit_plot_data(summaries: &[ExperimentSummary], axis: Axis) -> Result<String, CliError> {
    if summaries.len() < 2 {
        return Err(CliError::MixedAxes(format!(
            "need at least 2 summaries, got {}",
            summaries.len()
        )));
    }
    let base = axis.normalized(&summaries[0].config);
    for s in &summaries[1..] {
        if axis.normalized(&s.config) != base {
            return Err(CliError::MixedAxes(format!(
                "summaries differ in more than {axis}"
            )));
        }
    }
    let algos = &summaries[0].config.algorithms;
    let mut out = format!("# {axis}");
    for a in algos {
        out.push_str(&format!("\t{a}_queries\t{a}_error"));
    }
    out.push('\n');
    for s in summaries {
        let x = axis
            .value(&s.config)
            .ok_or_else(|| CliError::MixedAxes(format!("{axis} is not set in every summary")))?;
        out.push_str(&x.to_string());
        for &a in algos {
            let row = s.get(a).expect("same algorithm list");
            out.push_str(&format!("\t{}\t{}", row.mean_queries_paper, row.error_rate));
        }
        out.push('\n');
    }
    Ok(out)
}
