use std::process::Command;

use mepf_cli::{
    emit_plot_data, read_csv, run_experiment, summarize, Axis, CliError, DistSpec,
    ExperimentConfig,
};
use mepf_core::Algorithm;
use proptest::prelude::*;

fn small(dist: DistSpec, algorithms: &[Algorithm], trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        dist,
        algorithms: algorithms.to_vec(),
        trials,
        seed: 42,
        ..ExperimentConfig::default()
    }
}

fn dist_spec() -> impl Strategy<Value = DistSpec> {
    prop_oneof![
        prop::collection::vec(0.001f64..10.0, 2..10).prop_map(DistSpec::Custom),
        (0.1f64..3.0, 2usize..500).prop_map(|(s, m)| DistSpec::Zipf { s, m }),
        (4usize..500).prop_map(DistSpec::Footnote1),
        (3usize..500).prop_map(DistSpec::Footnote2),
    ]
}

proptest! {
    #[test]
    fn config_text_round_trips(
        dist in dist_spec(),
        algos in prop::sample::subsequence(Algorithm::ALL.to_vec(), 1..=5),
        trials in 1usize..10_000,
        seed in any::<u64>(),
        delta in 1e-6f64..0.999,
        budget in prop::option::of(any::<u64>()),
        n in prop::option::of(1usize..1_000_000),
        c in 1.5f64..100.0,
        timing in any::<bool>(),
    ) {
        let cfg = ExperimentConfig {
            dist,
            algorithms: algos,
            trials,
            seed,
            delta,
            budget,
            n,
            c,
            timing,
            ..ExperimentConfig::default()
        };
        let text = cfg.to_text();
        prop_assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
        prop_assert!(text.ends_with('\n') && !text.contains('\r'));
    }
}

#[test]
fn zero_trials_is_invalid() {
    let cfg = small(DistSpec::Footnote2(8), &[Algorithm::Adaptive], 0);
    assert!(matches!(run_experiment(&cfg, 1), Err(CliError::InvalidConfig(_))));
}

#[test]
fn same_config_same_csv_for_any_worker_count() {
    let cfg = small(DistSpec::Zipf { s: 1.0, m: 12 }, &Algorithm::ALL, 30);
    let a = run_experiment(&cfg, 1).unwrap().csv();
    let b = run_experiment(&cfg, 4).unwrap().csv();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(
        "trial_id,algorithm,m,delta,correct,queries_raw,queries_paper,samples,rounds,wall_ns\n"
    ));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 1 + 30 * 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn summary_is_recomputable_from_csv() {
    let cfg = small(DistSpec::Custom(vec![0.4, 0.3, 0.2, 0.1]), &Algorithm::ALL, 40);
    let exp = run_experiment(&cfg, 2).unwrap();
    let records = read_csv(exp.csv().as_slice()).unwrap();
    assert_eq!(records, exp.records);
    let pv = cfg.validate().unwrap();
    let again = summarize(&cfg, &pv, &records, exp.summary.wall_ns);
    for (a, b) in exp.summary.algorithms.iter().zip(&again.algorithms) {
        for (x, y) in [
            (a.error_rate, b.error_rate),
            (a.stderr, b.stderr),
            (a.mean_queries_raw, b.mean_queries_raw),
            (a.median_queries_raw, b.median_queries_raw),
            (a.mean_queries_paper, b.mean_queries_paper),
            (a.mean_samples, b.mean_samples),
        ] {
            assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
        assert!((0.0..=1.0).contains(&a.error_rate));
    }
}

#[test]
fn paper_counts_charge_only_the_elimination_tests() {
    let cfg = small(DistSpec::Footnote2(16), &Algorithm::ALL, 20);
    let exp = run_experiment(&cfg, 1).unwrap();
    for r in &exp.records {
        assert!(r.queries_paper >= r.queries_raw);
        match r.algorithm {
            Algorithm::Elimination | Algorithm::SetElimination => {
                assert!(r.queries_paper - r.queries_raw <= r.samples as u64)
            }
            _ => assert_eq!(r.queries_paper, r.queries_raw),
        }
    }
}

#[test]
fn plot_data_needs_a_shared_sweep() {
    let cfg = small(DistSpec::Footnote2(8), &[Algorithm::Adaptive], 5);
    let one = run_experiment(&cfg, 1).unwrap().summary;
    assert!(matches!(emit_plot_data(std::slice::from_ref(&one), Axis::Delta), Err(CliError::MixedAxes(_))));
    let mut other = cfg.clone();
    other.delta = 0.05;
    other.seed = 43;
    let two = run_experiment(&other, 1).unwrap().summary;
    assert!(matches!(emit_plot_data(&[one, two], Axis::Delta), Err(CliError::MixedAxes(_))));
}

#[test]
fn delta_sweep_costs_more_as_delta_shrinks() {
    let base = small(DistSpec::Custom(vec![0.4, 0.3, 0.2, 0.1]), &[Algorithm::Elimination], 100);
    let summaries: Vec<_> = ["0.2", "0.1", "0.05", "0.02"]
        .iter()
        .map(|d| run_experiment(&Axis::Delta.apply(&base, d).unwrap(), 1).unwrap().summary)
        .collect();
    let data = emit_plot_data(&summaries, Axis::Delta).unwrap();
    let mut lines = data.lines();
    assert_eq!(lines.next(), Some("# delta\telimination_queries\telimination_error"));
    let queries: Vec<f64> = lines.map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(queries.len(), 4);
    assert!(queries.windows(2).all(|w| w[0] <= w[1]), "{queries:?}");
}

#[test]
fn m_sweep_separates_truncated_from_adaptive() {
    let mut base = small(DistSpec::Footnote2(16), &[Algorithm::Truncated, Algorithm::Adaptive], 20);
    base.n = Some(2000);
    base.rounds = Some(10);
    let summaries: Vec<_> = ["16", "64", "256"]
        .iter()
        .map(|m| run_experiment(&Axis::M.apply(&base, m).unwrap(), 1).unwrap().summary)
        .collect();
    let data = emit_plot_data(&summaries, Axis::M).unwrap();
    let rows: Vec<Vec<f64>> = data
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(|x| x.parse().unwrap()).collect())
        .collect();
    let truncated: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let adaptive: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    assert!(adaptive.windows(2).all(|w| w[1] > w[0]), "{adaptive:?}");
    assert!(truncated.iter().all(|&q| q <= 6.0 * 2046.0), "{truncated:?}");
}

fn mepf() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mepf"));
    c.env_remove("MEPF_SEED");
    c
}

#[test]
fn exit_codes() {
    let bad = mepf().args(["run", "--trials", "0"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let bad_dist = mepf().args(["alpha", "--dist", "zipf(1)"]).output().unwrap();
    assert_eq!(bad_dist.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let unwritable = dir.path().join("missing").join("out.csv");
    let io = mepf()
        .args(["run", "--trials", "2", "--dist", "footnote2(8)", "--out"])
        .arg(&unwritable)
        .output()
        .unwrap();
    assert_eq!(io.status.code(), Some(3));
    let missing = mepf()
        .args(["run", "--config"])
        .arg(dir.path().join("nope.cfg"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "dist = footnote2(8)\ntrials = 5\nseed = 1\nalgorithms = adaptive\n").unwrap();
    let csv = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut c = mepf();
        c.args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out);
        if let Some(e) = env {
            c.env("MEPF_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        assert!(c.output().unwrap().status.success());
        std::fs::read(out).unwrap()
    };
    let from_file = csv("a", None, None);
    let from_env = csv("b", Some("2"), None);
    let flag_over_env = csv("c", Some("2"), Some("1"));
    let flag_two = csv("d", None, Some("2"));
    assert_ne!(from_file, from_env);
    assert_eq!(from_file, flag_over_env);
    assert_eq!(from_env, flag_two);
}

#[test]
fn alpha_dump_tree_and_trace() {
    let alpha = mepf().args(["alpha", "--dist", "0.5,0.3,0.2"]).output().unwrap();
    let text = String::from_utf8(alpha.stdout).unwrap();
    assert!(text.contains("delta2_sq\t0.025732"), "{text}");
    assert!(text.contains("projection_bits\t0.037123"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("alpha_")).count(), 5);

    let tree = mepf()
        .args(["dump-tree", "--dist", "footnote2(4)", "--samples", "50"])
        .output()
        .unwrap();
    let text = String::from_utf8(tree.stdout).unwrap();
    assert!(text.starts_with("node - 50\n"), "{text}");
    assert_eq!(text.lines().filter(|l| l.trim_start().starts_with("leaf")).count(), 4);

    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.tsv");
    let out = mepf()
        .args(["run", "--dist", "footnote2(8)", "--trials", "3", "--algo", "adaptive,exhaustive", "--trace"])
        .arg(&trace)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(trace).unwrap();
    assert!(text.starts_with("# adaptive\n"));
    assert!(text.contains("# exhaustive\n"));
    assert!(text.lines().filter(|l| !l.starts_with('#')).all(|l| l.split('\t').count() == 3));
}

#[test]
fn sweep_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("p.tsv");
    let out = mepf()
        .args(["run", "--dist", "footnote2(8)", "--trials", "10", "--algo", "adaptive", "--sweep", "delta=0.2,0.1", "--plot"])
        .arg(&plot)
        .arg("--out")
        .arg(dir.path().join("r.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(plot).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(dir.path().join("r-delta0.2.csv").exists());
    assert!(dir.path().join("r-delta0.1.csv").exists());
}
