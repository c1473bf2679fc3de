//! Acceptance criteria. Run with `cargo test --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectral_milstein::coefficients::NemytskiiPair;
use spectral_milstein::harness::{
    estimate_rms_error, log_log_slope, padded_distance, ConvergenceReport, ExperimentConfig,
};
use spectral_milstein::noise::{
    count_random_variables, EigenFamily, EigenvalueRule, MasterPath, QWienerSpec,
};
use spectral_milstein::problems::{preset, InitialValue, ProblemSpec};
use spectral_milstein::schemes::{
    iterated_integral_oracle, run_scheme, SchemeConfig, SchemeKind, Stepper,
};
use spectral_milstein::spectral::{Field, SpectralBasis, TransformKind};

// 1. exact algebra and transforms
const ROUND_TRIP_REL: f64 = 1e-12;
const SEMIGROUP_LAW_ABS: f64 = 1e-13;
const PROJECTION_ABS: f64 = 1e-13;
const HEAT_EXACT_ABS: f64 = 1e-12;

// 2. random-variable accounting
const EULER_2D_N32: u64 = 1_073_741_824;
const MILSTEIN_2D_N32: u64 = 1_048_576;

// 3. iterated-integral identity
const SINGLE_MODE_ABS: f64 = 1e-12;
const IDENTITY_SUBSTEPS: usize = 1000;
const IDENTITY_SAMPLES: usize = 10_000;
const FIRST_MOMENT_MAX_Z: f64 = 3.0;
const SECOND_MOMENT_REL: f64 = 0.05;

// 4. one-dimensional reaction-diffusion
const PATHS: usize = 100;
const RD_MILSTEIN_VS_N: (f64, f64) = (-1.8, -1.2);
const RD_MILSTEIN_VS_RV: (f64, f64) = (-0.62, -0.40);
const RD_EULER_VS_RV: (f64, f64) = (-0.50, -0.28);

// 5. and 6. two-dimensional heat, non-commuting noise
const SECOND_ORDER_VS_N: (f64, f64) = (-2.5, -1.5);
const SCALING_MIN_SLOPE: f64 = 2.5;

// 7. Burgers
const BURGERS_SEED: u64 = 2009;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(v: Option<f64>, (lo, hi): (f64, f64)) -> bool {
    v.is_some_and(|v| v >= lo && v <= hi)
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.3}"))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut round_trip = 0.0f64;
    let mut semigroup = 0.0f64;
    let mut projection = 0.0f64;
    for dim in [1usize, 2] {
        for n in [1usize, 2, 3, 7, 16, 31, 64] {
            for kind in [TransformKind::Naive, TransformKind::Fast] {
                if kind == TransformKind::Naive && n.pow(dim as u32) > 1024 {
                    continue;
                }
                let basis = SpectralBasis::with_transform(dim, n, 0.01, kind).unwrap();
                let c: Vec<f64> = (0..basis.len())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let c = Field::spectral(dim, n, c).unwrap();
                let back = basis.to_spectral(&basis.to_grid(&c).unwrap()).unwrap();
                round_trip = round_trip.max(max_abs_diff(back.values(), c.values()) / scale);

                let (s, t) = (0.37, 1.21);
                let two = basis
                    .apply_semigroup(&basis.apply_semigroup(&c, s).unwrap(), t)
                    .unwrap();
                let one = basis.apply_semigroup(&c, s + t).unwrap();
                semigroup = semigroup.max(max_abs_diff(two.values(), one.values()));

                let keep = n.div_ceil(2);
                let p = basis.project(&c, keep).unwrap();
                let pp = basis.project(&p, keep).unwrap();
                projection = projection.max(max_abs_diff(p.values(), pp.values()));
            }
        }
    }

    // deterministic heat: f = 0, b = 0, smooth initial value
    let mut heat = 0.0f64;
    for kind in [SchemeKind::Milstein, SchemeKind::ExponentialEuler] {
        let problem = ProblemSpec {
            name: "deterministic_heat".into(),
            pair: NemytskiiPair::zero(),
            initial: InitialValue::Function(Arc::new(|x: &[f64]| {
                x[0] * (1.0 - x[0]) * (3.0 * x[0]).exp()
            })),
            ..preset("reacdiff1d").unwrap()
        };
        let basis = problem.basis(32).unwrap();
        let exact = basis
            .apply_semigroup(&problem.initial_spectral(&basis).unwrap(), problem.horizon)
            .unwrap();
        for steps in [1usize, 7, 64] {
            let cfg = SchemeConfig {
                kind,
                n: 32,
                steps,
                k: 4,
                horizon: 1.0,
            };
            let path = MasterPath::generate(5, &problem.noise_with_k(4), steps, 4, 1.0).unwrap();
            let out = run_scheme(&problem, &cfg, &path).unwrap();
            heat = heat.max(max_abs_diff(out.state.values(), exact.values()));
        }
    }
    check(
        round_trip <= ROUND_TRIP_REL && semigroup <= SEMIGROUP_LAW_ABS && projection <= PROJECTION_ABS && heat <= HEAT_EXACT_ABS,
        format!(
            "DST round trip rel {round_trip:.1e}, semigroup law {semigroup:.1e}, projection {projection:.1e}, deterministic heat {heat:.1e}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let heat = preset("heat2d").unwrap();
    let spec = heat.noise_with_k(32);
    let euler = count_random_variables(32u64.pow(4), &spec);
    let milstein = count_random_variables(32u64.pow(2), &spec);
    let mut instrumented_ok = true;
    let mut checked = 0;
    for name in ["reacdiff1d", "reacdiff_cos", "heat2d", "burgers"] {
        let problem = preset(name).unwrap();
        for kind in SchemeKind::ALL {
            if kind == SchemeKind::Splitting && name != "heat2d" {
                continue;
            }
            for n in [2usize, 4] {
                let cfg = SchemeConfig::recommended(&problem, kind, n);
                let spec = problem.noise_with_k(cfg.k);
                let expected = count_random_variables(cfg.steps as u64, &spec);
                let path =
                    MasterPath::generate(3, &spec, cfg.steps, cfg.k, problem.horizon).unwrap();
                let run = run_scheme(&problem, &cfg, &path).unwrap();
                instrumented_ok &= path.draws() == expected && run.draws == expected;
                checked += 1;
            }
        }
    }
    check(
        euler == EULER_2D_N32 && milstein == MILSTEIN_2D_N32 && instrumented_ok,
        format!("2D N=32: Euler {euler}, Milstein {milstein}; instrumented draws match on {checked} configs with N in {{2, 4}}: {instrumented_ok}"),
    )
}

fn criterion_3() -> Outcome {
    let problem = preset("reacdiff1d").unwrap();
    let basis = problem.basis(8).unwrap();
    let v = basis.sample(|x| 0.3 + 0.6 * (std::f64::consts::PI * x[0]).sin());
    let h = 0.1;
    let one = QWienerSpec::new(EigenFamily::Sine, EigenvalueRule::InversePower(2.0), 1).unwrap();
    let single = iterated_integral_oracle(
        &v,
        &problem.pair,
        &one,
        &basis,
        h,
        IDENTITY_SUBSTEPS,
        1000,
        17,
    )
    .unwrap();
    let three = QWienerSpec::new(EigenFamily::Sine, EigenvalueRule::InversePower(2.0), 3).unwrap();
    let multi = iterated_integral_oracle(
        &v,
        &problem.pair,
        &three,
        &basis,
        h,
        IDENTITY_SUBSTEPS,
        IDENTITY_SAMPLES,
        23,
    )
    .unwrap();
    check(
        single.max_abs_difference <= SINGLE_MODE_ABS
            && multi.first_moment_z <= FIRST_MOMENT_MAX_Z
            && multi.second_moment_rel_error <= SECOND_MOMENT_REL,
        format!(
            "K=1 max diff {:.1e}; K=3 first moment max z {:.2}, second moment rel err {:.2e}",
            single.max_abs_difference, multi.first_moment_z, multi.second_moment_rel_error
        ),
    )
}

fn study(
    problem: &str,
    schemes: Vec<SchemeKind>,
    ladder: Vec<usize>,
    reference: (usize, usize, usize),
) -> ConvergenceReport {
    let mut config = ExperimentConfig::new(problem, schemes, ladder, reference);
    config.paths = PATHS;
    config.seed = 1;
    let problem = config.resolve_problem().unwrap();
    estimate_rms_error(&problem, &config).unwrap()
}

fn failures(report: &ConvergenceReport) -> usize {
    report.reference_failures + report.rows.iter().map(|r| r.failed_paths).sum::<usize>()
}

fn criterion_4() -> Outcome {
    let report = study(
        "reacdiff1d",
        vec![SchemeKind::Milstein, SchemeKind::ImplicitEuler],
        vec![2, 4, 8, 16, 32],
        (64, 32768, 64),
    );
    let mil = report.slopes_for(SchemeKind::Milstein).unwrap();
    let eul = report.slopes_for(SchemeKind::ImplicitEuler).unwrap();
    let stronger = match (mil.vs_random_variables, eul.vs_random_variables) {
        (Some(a), Some(b)) => a.abs() > b.abs(),
        _ => false,
    };
    check(
        within(mil.vs_n, RD_MILSTEIN_VS_N)
            && within(mil.vs_random_variables, RD_MILSTEIN_VS_RV)
            && within(eul.vs_random_variables, RD_EULER_VS_RV)
            && stronger
            && failures(&report) == 0,
        format!(
            "Milstein vs N {} vs RV {}; Euler (M=N^3) vs RV {}; P={PATHS}, failed paths {}",
            fmt(mil.vs_n),
            fmt(mil.vs_random_variables),
            fmt(eul.vs_random_variables),
            failures(&report)
        ),
    )
}

/// `||milstein - splitting||_H` after one step with increments scaled by `s`.
fn splitting_gap(s: f64) -> f64 {
    let problem = preset("heat2d").unwrap();
    let cfg = SchemeConfig::recommended(&problem, SchemeKind::Milstein, 16);
    let path = MasterPath::generate(
        7,
        &problem.noise_with_k(cfg.k),
        cfg.steps,
        cfg.k,
        problem.horizon,
    )
    .unwrap();
    let mil = Stepper::new(&problem, cfg.clone(), &path).unwrap();
    let split = Stepper::new(
        &problem,
        SchemeConfig {
            kind: SchemeKind::Splitting,
            ..cfg
        },
        &path,
    )
    .unwrap();
    let y = mil.initial().unwrap();
    let dw = mil.noise_increment(&path, 0).unwrap().scale(s);
    let quad = mil.quadrature().scale(s * s);
    let a = mil.step_with(&y, &dw, &quad).unwrap();
    let b = split.step_with(&y, &dw, &quad).unwrap();
    padded_distance(&a, &b).unwrap()
}

fn criterion_5() -> Outcome {
    let report = study(
        "heat2d",
        vec![SchemeKind::Milstein, SchemeKind::Splitting],
        vec![2, 4, 8, 16],
        (32, 1024, 32),
    );
    let mil = report.slopes_for(SchemeKind::Milstein).unwrap();
    let split = report.slopes_for(SchemeKind::Splitting).unwrap();
    let gaps: Vec<(f64, f64)> = [1.0, 0.5, 0.25]
        .iter()
        .map(|&s| (s, splitting_gap(s)))
        .collect();
    let scaling = log_log_slope(&gaps, 0.0).map(|s| s.0);
    check(
        within(mil.vs_n, SECOND_ORDER_VS_N)
            && within(split.vs_n, SECOND_ORDER_VS_N)
            && scaling.is_some_and(|s| s >= SCALING_MIN_SLOPE)
            && failures(&report) == 0,
        format!(
            "Milstein vs N {}, splitting vs N {}; one-step Milstein-splitting gap slope in s {}",
            fmt(mil.vs_n),
            fmt(split.vs_n),
            fmt(scaling)
        ),
    )
}

fn criterion_6() -> Outcome {
    let report = study(
        "reacdiff_cos",
        vec![SchemeKind::Milstein],
        vec![2, 4, 8, 16],
        (32, 1024, 32),
    );
    let mil = report.slopes_for(SchemeKind::Milstein).unwrap();
    check(
        within(mil.vs_n, SECOND_ORDER_VS_N) && failures(&report) == 0,
        format!("Milstein vs N {}; P={PATHS}", fmt(mil.vs_n)),
    )
}

fn criterion_7() -> Outcome {
    let problem = preset("burgers").unwrap();
    // coupled path fine enough for the Euler baseline at N = 64 (M = 64^3)
    let spec = problem.noise_with_k(64);
    let path =
        MasterPath::generate(BURGERS_SEED, &spec, 64usize.pow(3), 64, problem.horizon).unwrap();
    let gap = |n: usize| -> Option<f64> {
        let mil = run_scheme(
            &problem,
            &SchemeConfig::recommended(&problem, SchemeKind::Milstein, n),
            &path,
        )
        .ok()?;
        let eul = run_scheme(
            &problem,
            &SchemeConfig::recommended(&problem, SchemeKind::ExponentialEuler, n),
            &path,
        )
        .ok()?;
        padded_distance(&mil.state, &eul.state).ok()
    };
    let (g32, g64) = (gap(32), gap(64));
    let pass = match (g32, g64) {
        (Some(a), Some(b)) => a.is_finite() && b.is_finite() && b < a,
        _ => false,
    };
    check(
        pass,
        format!(
            "seed {BURGERS_SEED}: |Milstein - exponential Euler| at N=32 {}, at N=64 {}",
            g32.map_or("non-finite".into(), |v| format!("{v:.3e}")),
            g64.map_or("non-finite".into(), |v| format!("{v:.3e}"))
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 exact algebra and transforms", criterion_1),
        ("2 random-variable accounting", criterion_2),
        ("3 iterated-integral identity", criterion_3),
        ("4 reaction-diffusion 1D convergence", criterion_4),
        ("5 linear 2D Milstein and splitting", criterion_5),
        ("6 non-commuting noise convergence", criterion_6),
        ("7 Burgers pathwise comparison", criterion_7),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {name}: {} [{:.1}s]",
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
