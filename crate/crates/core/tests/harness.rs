use std::fs;

use spectral_milstein::coefficients::NemytskiiPair;
use spectral_milstein::harness::{
    emit_csv, estimate_rms_error, metadata_path, write_metadata, ExperimentConfig, CSV_HEADER,
};
use spectral_milstein::problems::{preset, InitialValue, ProblemSpec};
use spectral_milstein::schemes::SchemeKind;
use spectral_milstein::Error;

fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        "reacdiff1d",
        vec![SchemeKind::Milstein, SchemeKind::ImplicitEuler],
        vec![2, 4],
        (8, 512, 8),
    );
    c.paths = 6;
    c.seed = 3;
    c
}

#[test]
fn reference_against_itself_is_zero() {
    let problem = preset("reacdiff1d").unwrap();
    let mut c = ExperimentConfig::new(
        "reacdiff1d",
        vec![SchemeKind::Milstein],
        vec![8],
        (8, 64, 8),
    );
    c.paths = 5;
    let report = estimate_rms_error(&problem, &c).unwrap();
    assert_eq!(report.rows[0].rms_error, 0.0);
    assert_eq!(report.rows[0].stderr, 0.0);
    assert_eq!(report.floor, 0.0);
}

#[test]
fn deterministic_problem_error_is_the_spectral_tail() {
    let modes = vec![
        ([1, 0], 1.0),
        ([3, 0], -0.5),
        ([6, 0], 0.3),
        ([11, 0], 0.2),
        ([16, 0], -0.1),
    ];
    let problem = ProblemSpec {
        name: "deterministic".into(),
        pair: NemytskiiPair::zero(),
        initial: InitialValue::Modes(modes.clone()),
        ..preset("reacdiff1d").unwrap()
    };
    let mut c = ExperimentConfig::new(
        "deterministic",
        vec![SchemeKind::Milstein],
        vec![2, 4, 8],
        (16, 64, 16),
    );
    c.paths = 3;
    let report = estimate_rms_error(&problem, &c).unwrap();
    for row in &report.rows {
        let tail: f64 = modes
            .iter()
            .filter(|(i, _)| i[0] > row.n)
            .map(|(i, v)| {
                let lambda = problem.kappa * (std::f64::consts::PI * i[0] as f64).powi(2);
                (v * (-lambda * problem.horizon).exp()).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        assert!(
            (row.rms_error - tail).abs() <= 1e-12,
            "N = {}: {} vs {tail}",
            row.n,
            row.rms_error
        );
    }
}

#[test]
fn csv_rows_header_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let problem = preset("reacdiff1d").unwrap();
    let c = small_config();
    let masked = |path: &std::path::Path| -> Vec<String> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let report = estimate_rms_error(&problem, &c).unwrap();
    emit_csv(&report, &a).unwrap();
    emit_csv(&estimate_rms_error(&problem, &c).unwrap(), &b).unwrap();
    let lines = masked(&a);
    assert_eq!(lines.len(), 1 + c.schemes.len() * c.ladder.len());
    assert_eq!(
        fs::read_to_string(&a).unwrap().lines().next().unwrap(),
        CSV_HEADER.join(",")
    );
    assert_eq!(lines, masked(&b));

    let mut empty = report.clone();
    empty.rows.clear();
    let e = dir.path().join("empty.csv");
    emit_csv(&empty, &e).unwrap();
    assert_eq!(
        fs::read_to_string(&e).unwrap(),
        format!("{}\n", CSV_HEADER.join(","))
    );

    let meta = metadata_path(&a);
    write_metadata(&report, &c, &meta).unwrap();
    let text = fs::read_to_string(&meta).unwrap();
    assert!(text.contains("ChaCha20"));
    assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);

    let bad = dir.path().join("missing").join("x.csv");
    assert!(matches!(emit_csv(&report, &bad), Err(Error::Write { .. })));
}

#[test]
fn reported_counts_match_instrumented_draws() {
    let problem = preset("reacdiff_cos").unwrap();
    let mut c = ExperimentConfig::new(
        "reacdiff_cos",
        vec![SchemeKind::Milstein, SchemeKind::ExponentialEuler],
        vec![2, 4],
        (4, 256, 4),
    );
    c.paths = 2;
    let report = estimate_rms_error(&problem, &c).unwrap();
    for row in &report.rows {
        assert_eq!(
            row.draws, row.random_variables,
            "{} N = {}",
            row.scheme, row.n
        );
    }
}

#[test]
fn divergent_paths_are_counted_not_dropped() {
    // Milstein on Burgers at N = 8 (M = 64) diverges on a fraction of paths
    let problem = preset("burgers").unwrap();
    let mut c = ExperimentConfig::new(
        "burgers",
        vec![SchemeKind::Milstein],
        vec![8],
        (32, 1024, 32),
    );
    c.paths = 20;
    c.seed = 1;
    let report = estimate_rms_error(&problem, &c).unwrap();
    let row = &report.rows[0];
    assert_eq!(report.reference_failures, 0);
    assert!(row.failed_paths > 0);
    assert_eq!(
        row.failed_paths,
        row.squared_errors.iter().filter(|e| e.is_none()).count()
    );
    assert_eq!(row.squared_errors.len(), 20);
    assert!(row.rms_error.is_finite());
}

#[test]
fn common_random_numbers_and_monotone_paths() {
    let problem = preset("reacdiff1d").unwrap();
    let ladder = vec![2, 4, 8, 16, 32];
    let run = |ref_m: usize| {
        let mut c = ExperimentConfig::new(
            "reacdiff1d",
            vec![SchemeKind::Milstein],
            ladder.clone(),
            (64, ref_m, 64),
        );
        c.paths = 50;
        c.seed = 7;
        estimate_rms_error(&problem, &c).unwrap()
    };
    let coarse = run(64 * 64);
    let fine = run(128 * 128);
    for (a, b) in coarse.rows.iter().zip(&fine.rows) {
        let delta = (a.rms_error - b.rms_error).abs();
        assert!(
            delta < a.stderr.min(b.stderr),
            "N = {}: delta {delta:e}, se {:e}/{:e}",
            a.n,
            a.stderr,
            b.stderr
        );
    }

    let monotone = (0..50)
        .filter(|&p| {
            let e: Vec<f64> = coarse.rows[..4]
                .iter()
                .map(|r| r.squared_errors[p].unwrap())
                .collect();
            e.windows(2).all(|w| w[1] <= w[0])
        })
        .count();
    assert!(monotone >= 45, "{monotone} of 50 paths monotone");
}
