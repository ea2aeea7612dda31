mod common;

use bdris::experiments::{
    emit_results, load_config, read_results, read_solution, results_csv, run_sweep, Axis, ExperimentConfig, ResultRow,
    Scheme, SweepSpec, CSV_HEADER,
};
use bdris::metaopt::MetaConfig;
use bdris::sysmodel::evaluate_rates;
use std::fs;
use std::path::Path;

fn tiny(schemes: Vec<Scheme>) -> ExperimentConfig {
    ExperimentConfig {
        seeds: vec![0, 1, 2],
        schemes,
        meta: MetaConfig {
            epochs: 2,
            inner_iterations: 2,
            outer_iterations: 2,
            ..MetaConfig::default()
        },
        random_trials: 5,
        sweep: Some(SweepSpec {
            vary: Axis::M,
            values: vec![4, 8],
        }),
        ..ExperimentConfig::default()
    }
}

/// Every column but the wall time.
fn stable(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .map(|l| {
            let mut f: Vec<String> = l.split(',').map(str::to_string).collect();
            f.remove(11);
            f
        })
        .collect()
}

fn files_under(dir: &Path) -> Vec<String> {
    let mut out = vec![];
    for sub in ["runs", "solutions"] {
        let mut names: Vec<String> = fs::read_dir(dir.join(sub))
            .unwrap()
            .map(|e| format!("{sub}/{}", e.unwrap().file_name().to_string_lossy()))
            .collect();
        names.sort();
        out.extend(names);
    }
    out
}

#[test]
fn sweep_writes_one_row_per_run_and_reruns_identically() {
    let cfg = tiny(vec![Scheme::BdRis, Scheme::DiagonalRis]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_sweep(&cfg).unwrap();
    emit_results(&first, &cfg, a.path()).unwrap();
    emit_results(&run_sweep(&cfg).unwrap(), &cfg, b.path()).unwrap();

    let text = fs::read_to_string(a.path().join("results.csv")).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let rows = read_results(a.path().join("results.csv")).unwrap();
    assert!(rows.iter().all(ResultRow::is_ok));
    let keys: Vec<_> = rows.iter().map(|r| (r.n, r.m, r.scheme, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    let other = fs::read_to_string(b.path().join("results.csv")).unwrap();
    assert_eq!(stable(&text), stable(&other));
    let files = files_under(a.path());
    assert_eq!(files, files_under(b.path()));
    assert_eq!(files.len(), 24);
    for f in &files {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(
        fs::read(a.path().join("metadata.toml")).unwrap(),
        fs::read(b.path().join("metadata.toml")).unwrap()
    );
}

#[test]
fn results_do_not_depend_on_scheme_order() {
    let fwd = run_sweep(&tiny(vec![Scheme::BdRis, Scheme::RandomPhases])).unwrap();
    let rev = run_sweep(&tiny(vec![Scheme::RandomPhases, Scheme::BdRis])).unwrap();
    assert_eq!(stable(&results_csv(&fwd)), stable(&results_csv(&rev)));
}

#[test]
fn metadata_loads_back_as_the_config() {
    let cfg = tiny(vec![Scheme::DiagonalRis]);
    let dir = tempfile::tempdir().unwrap();
    emit_results(&run_sweep(&cfg).unwrap(), &cfg, dir.path()).unwrap();
    assert_eq!(load_config(dir.path().join("metadata.toml")).unwrap(), cfg);
}

#[test]
fn stored_solutions_rescore_to_the_reported_rate() {
    let cfg = tiny(vec![Scheme::BdRis, Scheme::DiagonalRis, Scheme::RandomPhases]);
    let dir = tempfile::tempdir().unwrap();
    emit_results(&run_sweep(&cfg).unwrap(), &cfg, dir.path()).unwrap();
    for row in read_results(dir.path().join("results.csv")).unwrap() {
        let sol = read_solution(dir.path().join("solutions").join(format!("{}.toml", row.tag()))).unwrap();
        let p = cfg.problem(row.seed, row.n, row.m).unwrap();
        let r = evaluate_rates(&sol, &p.channels, p.noise_power).unwrap();
        assert!((r.total - row.best_sum_rate).abs() <= 1e-9, "{}: {} vs {}", row.tag(), r.total, row.best_sum_rate);
    }
}

#[test]
fn failed_runs_are_recorded_and_the_sweep_continues() {
    // the grid oracle refuses M = 4
    let mut cfg = tiny(vec![Scheme::DiagonalRis, Scheme::GridOracle]);
    cfg.sweep = Some(SweepSpec {
        vary: Axis::M,
        values: vec![2, 4],
    });
    cfg.oracle_levels = 4;
    let records = run_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 12);
    for r in &records {
        let expect_fail = r.row.scheme == Scheme::GridOracle && r.row.m == 4;
        assert_eq!(!r.row.is_ok(), expect_fail, "{} {}", r.row.tag(), r.row.status);
        assert_eq!(r.solution.is_none(), expect_fail);
    }
    let dir = tempfile::tempdir().unwrap();
    emit_results(&records, &cfg, dir.path()).unwrap();
    let rows = read_results(dir.path().join("results.csv")).unwrap();
    assert_eq!(rows.iter().filter(|r| r.status.starts_with("failed: ")).count(), 3);
}
