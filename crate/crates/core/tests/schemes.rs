use spectral_milstein::coefficients::NemytskiiPair;
use spectral_milstein::noise::{EigenFamily, EigenvalueRule, MasterPath, QWienerSpec};
use spectral_milstein::problems::{preset, DriftKind, InitialValue, ProblemSpec};
use spectral_milstein::schemes::{run_scheme, SchemeConfig, SchemeKind, Stepper};
use spectral_milstein::spectral::{Field, Representation, SpectralBasis};

fn bits(f: &Field) -> Vec<u64> {
    f.values().iter().map(|v| v.to_bits()).collect()
}

/// Final state bits, or the failing step for a run that went non-finite.
fn outcome(problem: &ProblemSpec, cfg: &SchemeConfig, seed: u64) -> Result<Vec<u64>, String> {
    let spec = problem.noise_with_k(cfg.k);
    let path = MasterPath::generate(seed, &spec, cfg.steps, cfg.k, problem.horizon).unwrap();
    run_scheme(problem, cfg, &path)
        .map(|o| bits(&o.state))
        .map_err(|e| e.to_string())
}

#[test]
fn equal_seeds_reproduce_bitwise() {
    for name in ["reacdiff1d", "reacdiff_cos", "heat2d", "burgers"] {
        let problem = preset(name).unwrap();
        let cfg = SchemeConfig::recommended(&problem, SchemeKind::Milstein, 8);
        // burgers at N = 8 and seed 5 diverges; the failing step reproduces too
        assert_eq!(
            outcome(&problem, &cfg, 5),
            outcome(&problem, &cfg, 5),
            "{name}"
        );
        assert_ne!(
            outcome(&problem, &cfg, 5),
            outcome(&problem, &cfg, 6),
            "{name}"
        );
    }
}

#[test]
fn burgers_euler_smoke_run() {
    let problem = preset("burgers").unwrap();
    let cfg = SchemeConfig::recommended(&problem, SchemeKind::ExponentialEuler, 8);
    assert_eq!(cfg.steps, 512);
    let path = MasterPath::generate(2009, &problem.noise_with_k(8), cfg.steps, 8, 1.0).unwrap();
    let out = run_scheme(&problem, &cfg, &path).unwrap();
    assert!(out.state.is_finite());
}

#[test]
fn burgers_drift_conserves_energy() {
    // <v, P_N(v v_x)> = 0 for the exact Galerkin product, whatever N
    let problem = ProblemSpec {
        pair: NemytskiiPair::zero(),
        ..preset("burgers").unwrap()
    };
    assert_eq!(problem.drift, DriftKind::Burgers);
    for n in [2usize, 3, 5, 8, 17] {
        let cfg = SchemeConfig {
            kind: SchemeKind::ExponentialEuler,
            n,
            steps: 1,
            k: 1,
            horizon: 1e-3,
        };
        let stepper = Stepper::detached(&problem, cfg).unwrap();
        let basis = stepper.basis().clone();
        let c: Vec<f64> = (1..=n)
            .map(|i| ((i * 7 % 5) as f64 - 2.0) / i as f64)
            .collect();
        let y = Field::spectral(1, n, c).unwrap();
        let zero = basis.zeros(Representation::Grid);
        let w = stepper.pointwise_update(&y, &zero, &zero).unwrap();
        let drift = basis.to_spectral(&w).unwrap().sub(&y).unwrap();
        let inner: f64 = drift
            .values()
            .iter()
            .zip(y.values())
            .map(|(a, b)| a * b)
            .sum();
        assert!(inner.abs() < 1e-15, "N = {n}: {inner}");
    }
}

#[test]
fn resolvent_factor_for_first_mode() {
    let basis = SpectralBasis::new(1, 4, 0.01).unwrap();
    let f = basis.resolvent_factors(1.0).unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((f[0] - 1.0 / (1.0 + pi2 / 100.0)).abs() < 1e-15);
}

#[test]
fn euler_milstein_gap_shrinks_with_refinement() {
    let problem = ProblemSpec {
        name: "single_linear_mode".into(),
        pair: NemytskiiPair::linear_multiplicative(),
        noise: QWienerSpec::new(EigenFamily::Sine, EigenvalueRule::Explicit(vec![0.1]), 1).unwrap(),
        initial: InitialValue::Modes(vec![([1, 0], 1.0)]),
        ..preset("reacdiff1d").unwrap()
    };
    // single paths fluctuate; the mean square over coupled paths is monotone
    let spec = problem.noise_with_k(1);
    let paths: Vec<MasterPath> = (0..100)
        .map(|s| MasterPath::generate(s, &spec, 64, 1, 1.0).unwrap())
        .collect();
    let gaps: Vec<f64> = [4usize, 16, 64]
        .iter()
        .map(|&m| {
            let run = |kind, path: &MasterPath| {
                let cfg = SchemeConfig {
                    kind,
                    n: 1,
                    steps: m,
                    k: 1,
                    horizon: 1.0,
                };
                run_scheme(&problem, &cfg, path).unwrap().state
            };
            let ms: f64 = paths
                .iter()
                .map(|p| {
                    let d = run(SchemeKind::ImplicitEuler, p)
                        .sub(&run(SchemeKind::Milstein, p))
                        .unwrap();
                    d.spectral_norm().unwrap().powi(2)
                })
                .sum();
            (ms / paths.len() as f64).sqrt()
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn splitting_step_is_a_martingale_without_diffusion_operator() {
    // kappa = 0, one mode: Y_1 / Y_0 = exp(dW - quad / 2), mean one
    let problem = ProblemSpec {
        name: "geometric".into(),
        kappa: 0.0,
        pair: NemytskiiPair::linear_multiplicative(),
        noise: QWienerSpec::new(EigenFamily::Sine, EigenvalueRule::InversePower(2.0), 1).unwrap(),
        initial: InitialValue::Modes(vec![([1, 0], 1.0)]),
        ..preset("reacdiff1d").unwrap()
    };
    let cfg = SchemeConfig {
        kind: SchemeKind::Splitting,
        n: 1,
        steps: 1,
        k: 1,
        horizon: 0.5,
    };
    let samples = 100_000;
    let ratios: Vec<f64> = (0..samples)
        .map(|s| {
            let path = MasterPath::generate(s as u64, &problem.noise_with_k(1), 1, 1, 0.5).unwrap();
            run_scheme(&problem, &cfg, &path).unwrap().state.values()[0]
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / samples as f64;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    let se = (var / samples as f64).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn stepper_rejects_incompatible_paths() {
    let problem = preset("reacdiff1d").unwrap();
    let spec = problem.noise_with_k(4);
    let path = MasterPath::generate(0, &spec, 12, 4, 1.0).unwrap();
    let cfg = SchemeConfig {
        kind: SchemeKind::Milstein,
        n: 4,
        steps: 8,
        k: 4,
        horizon: 1.0,
    };
    assert!(Stepper::new(&problem, cfg.clone(), &path).is_err());
    let wide = SchemeConfig {
        steps: 4,
        k: 6,
        ..cfg
    };
    assert!(Stepper::new(&problem, wide, &path).is_err());
}
