use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mepf_cli::experiment::oracle_for;
use mepf_cli::{
    emit_plot_data, parse_algorithms, run_checks, run_estimator, run_experiment, Axis, CliError,
    DistSpec, ExperimentConfig,
};
use mepf_core::{
    entropy_bits, gaps, information_projection, sample, theoretical_alpha, CodeTree,
};

#[derive(Parser)]
#[command(name = "mepf", version, about = "Mode estimation from membership queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write the per-trial CSV.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Query trace of trial 0 for each algorithm.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Repeat the experiment along one axis, e.g. `delta=0.2,0.1,0.05`.
        #[arg(long, value_name = "AXIS=LIST")]
        sweep: Option<String>,
        /// Where to write sweep plot data (stdout if omitted).
        #[arg(long, value_name = "PATH", requires = "sweep")]
        plot: Option<PathBuf>,
    },
    /// Print the asymptotic query coefficients for a distribution.
    Alpha {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the invariant and oracle suites; exits 2 if any fails.
    Check {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render the adaptive code tree after observing samples.
    DumpTree {
        #[command(flatten)]
        config: ConfigArgs,
        /// Samples to observe.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated algorithm names, or `all`.
    #[arg(long, value_name = "LIST")]
    algo: Option<String>,
    /// zipf(S,M), footnote1(M), footnote2(M) or comma-separated masses.
    #[arg(long, value_name = "SPEC")]
    dist: Option<String>,
    /// Per-trial query budget.
    #[arg(long)]
    budget: Option<u64>,
    /// Worker threads (0 for one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    /// Config file, then `MEPF_SEED`, then flags.
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        if let Ok(seed) = std::env::var("MEPF_SEED") {
            cfg.seed = seed
                .parse()
                .map_err(|_| CliError::InvalidConfig(format!("MEPF_SEED={seed:?} is not a u64")))?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(a) = &self.algo {
            cfg.algorithms = parse_algorithms(a)?;
        }
        if let Some(d) = &self.dist {
            cfg.dist = d.parse::<DistSpec>()?;
        }
        if let Some(b) = self.budget {
            cfg.budget = Some(b);
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mepf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Run {
            config,
            trace,
            sweep,
            plot,
        } => {
            let cfg = config.resolve()?;
            if let Some(path) = &trace {
                write_traces(&cfg, path)?;
            }
            match sweep {
                None => {
                    let exp = run_experiment(&cfg, config.jobs)?;
                    print!("{}", exp.summary.render());
                }
                Some(spec) => run_sweep(&cfg, config.jobs, &spec, plot.as_deref())?,
            }
            Ok(0)
        }
        Command::Alpha { config } => {
            let cfg = config.resolve()?;
            let pv = cfg.validate()?;
            let proj = information_projection(&pv);
            println!("dist\t{}", cfg.dist);
            println!("entropy_bits\t{:.6}", entropy_bits(&pv));
            println!("delta2_sq\t{:.6}", gaps(&pv).delta_sq[pv.runner_up()]);
            println!("projection_bits\t{:.6}", proj.divergence_bits);
            for a in &cfg.algorithms {
                println!("alpha_{a}\t{:.6}", theoretical_alpha(&pv, *a));
            }
            Ok(0)
        }
        Command::Check { config } => {
            let cfg = config.resolve()?;
            let outcomes = run_checks(&cfg)?;
            for o in &outcomes {
                println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 2 })
        }
        Command::DumpTree { config, samples } => {
            let cfg = config.resolve()?;
            let pv = cfg.validate()?;
            let mut tree = CodeTree::unobserved(pv.num_classes())
                .map_err(|e| CliError::InvalidConfig(e.to_string()))?;
            for y in sample(&pv, cfg.seed, samples) {
                tree.observe(y).expect("sampled class is in range");
            }
            print!("{}", tree.render());
            Ok(0)
        }
    }
}

fn write_traces(cfg: &ExperimentConfig, path: &Path) -> Result<(), CliError> {
    let pv = cfg.validate()?;
    let mut file = File::create(path)?;
    for &a in &cfg.algorithms {
        writeln!(file, "# {a}")?;
        let sink = file.try_clone()?;
        let mut oracle = oracle_for(cfg, &pv, 0).with_trace(Box::new(sink));
        run_estimator(cfg, &pv, a, &mut oracle).map_err(|e| CliError::InvalidConfig(e.to_string()))?;
        oracle
            .flush_trace()
            .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    }
    Ok(())
}

fn run_sweep(cfg: &ExperimentConfig, jobs: usize, spec: &str, plot: Option<&Path>) -> Result<(), CliError> {
    let (axis, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::InvalidConfig(format!("sweep {spec:?} is not AXIS=LIST")))?;
    let axis: Axis = axis.parse()?;
    let mut summaries = Vec::new();
    for value in values.split(',').map(str::trim) {
        let mut point = axis.apply(cfg, value)?;
        point.out = cfg.out.as_ref().map(|p| suffixed(p, axis, value));
        let exp = run_experiment(&point, jobs)?;
        println!("# {axis} = {value}");
        print!("{}", exp.summary.render());
        summaries.push(exp.summary);
    }
    let data = emit_plot_data(&summaries, axis)?;
    match plot {
        Some(p) => std::fs::write(p, data)?,
        None => print!("{data}"),
    }
    Ok(())
}

/// `runs/out.csv` becomes `runs/out-delta0.1.csv`.
fn suffixed(path: &Path, axis: Axis, value: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}-{axis}{value}{ext}"))
}
