//! Preset test problems.
//!
//! | name           | d | kappa | drift          | diffusion b      | noise                        | Euler M |
//! |----------------|---|-------|----------------|------------------|------------------------------|---------|
//! | `reacdiff1d`   | 1 | 1/100 | `1 - y`        | `(1-y)/(1+y^2)`  | sine, `mu_j = j^-2`          | `N^3`   |
//! | `reacdiff_cos` | 1 | 1/20  | `1 - y`        | `y/(1+y^2)`      | cosine, `mu_j = j^-3`, `mu_0 = 0` | `N^4` |
//! | `heat2d`       | 2 | 1/50  | `0`            | `y`              | tensor sine, `(j1+j2)^-4`    | `N^4`   |
//! | `burgers`      | 1 | 1/100 | `-y dy/dx`     | `y`              | sine, `mu_j = j^-2`          | `N^3`   |
//!
//! All run on `[0, 1]`. Milstein and splitting use `M = N^2`, `K = N`.

use std::fmt;
use std::sync::Arc;

use crate::coefficients::NemytskiiPair;
use crate::error::{Error, Result};
use crate::noise::{EigenFamily, EigenvalueRule, QWienerSpec};
use crate::schemes::SchemeKind;
use crate::spectral::{Field, SpectralBasis};

/// Closed-form initial value `x -> xi(x)`.
pub type InitialFunction = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub const PRESET_NAMES: [&str; 4] = ["reacdiff1d", "reacdiff_cos", "heat2d", "burgers"];

/// How the drift is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftKind {
    /// `F(v)(x) = f(x, v(x))` from the coefficient pair.
    Nemytskii,
    /// `F(v) = -v dv/dx`: grid `v` times the spectral derivative, on a grid
    /// of `2N + 1` nodes so that `P_N F(v)` has no aliasing error.
    Burgers,
}

/// Initial value `xi`.
#[derive(Clone)]
pub enum InitialValue {
    Zero,
    /// Exact spectral coefficients `(multi-index, value)`; 1D indices use `[j, 0]`.
    Modes(Vec<([usize; 2], f64)>),
    /// Closed form sampled on the grid and transformed.
    Function(InitialFunction),
}

impl fmt::Debug for InitialValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialValue::Zero => write!(f, "Zero"),
            InitialValue::Modes(m) => f.debug_tuple("Modes").field(m).finish(),
            InitialValue::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub kappa: f64,
    pub horizon: f64,
    pub pair: NemytskiiPair,
    pub drift: DriftKind,
    /// Noise family and eigenvalues; `k` is overridden per run.
    pub noise: QWienerSpec,
    pub initial: InitialValue,
    /// Euler baselines use `M = N^euler_time_power`.
    pub euler_time_power: u32,
}

impl ProblemSpec {
    pub fn basis(&self, n: usize) -> Result<SpectralBasis> {
        SpectralBasis::new(self.dim, n, self.kappa)
    }

    pub fn noise_with_k(&self, k: usize) -> QWienerSpec {
        self.noise.with_k(k)
    }

    /// `P_N xi` as a spectral field.
    pub fn initial_spectral(&self, basis: &SpectralBasis) -> Result<Field> {
        let n = basis.n();
        match &self.initial {
            InitialValue::Zero => Ok(basis.zeros(crate::spectral::Representation::Spectral)),
            InitialValue::Modes(modes) => {
                let mut c = vec![0.0; basis.len()];
                for &(index, value) in modes {
                    let inside = index[0] >= 1
                        && index[0] <= n
                        && (self.dim == 1 || (index[1] >= 1 && index[1] <= n));
                    if inside {
                        let flat = match self.dim {
                            1 => index[0] - 1,
                            _ => (index[0] - 1) * n + (index[1] - 1),
                        };
                        c[flat] += value;
                    }
                }
                Field::spectral(self.dim, n, c)
            }
            InitialValue::Function(f) => basis.to_spectral(&basis.sample(|x| f(x))),
        }
    }

    /// Recommended `(M, K)` for a scheme at spatial resolution `N`.
    pub fn recommended(&self, kind: SchemeKind, n: usize) -> (usize, usize) {
        let power = match kind {
            SchemeKind::Milstein | SchemeKind::Splitting => 2,
            SchemeKind::ImplicitEuler | SchemeKind::ExponentialEuler => self.euler_time_power,
        };
        (n.pow(power), n)
    }
}

fn reacdiff1d() -> ProblemSpec {
    ProblemSpec {
        name: "reacdiff1d".into(),
        dim: 1,
        kappa: 1.0 / 100.0,
        horizon: 1.0,
        pair: NemytskiiPair::new(
            "reacdiff1d",
            |_, y| 1.0 - y,
            |_, y| (1.0 - y) / (1.0 + y * y),
            |_, y| (y * y - 2.0 * y - 1.0) / (1.0 + y * y).powi(2),
        ),
        drift: DriftKind::Nemytskii,
        noise: QWienerSpec {
            family: EigenFamily::Sine,
            rule: EigenvalueRule::InversePower(2.0),
            k: 1,
        },
        initial: InitialValue::Zero,
        euler_time_power: 3,
    }
}

fn reacdiff_cos() -> ProblemSpec {
    ProblemSpec {
        name: "reacdiff_cos".into(),
        dim: 1,
        kappa: 1.0 / 20.0,
        horizon: 1.0,
        pair: NemytskiiPair::new(
            "reacdiff_cos",
            |_, y| 1.0 - y,
            |_, y| y / (1.0 + y * y),
            |_, y| (1.0 - y * y) / (1.0 + y * y).powi(2),
        ),
        drift: DriftKind::Nemytskii,
        noise: QWienerSpec {
            family: EigenFamily::CosineWithConstant,
            rule: EigenvalueRule::InversePower(3.0),
            k: 1,
        },
        initial: InitialValue::Zero,
        euler_time_power: 4,
    }
}

fn heat2d() -> ProblemSpec {
    ProblemSpec {
        name: "heat2d".into(),
        dim: 2,
        kappa: 1.0 / 50.0,
        horizon: 1.0,
        pair: NemytskiiPair::linear_multiplicative(),
        drift: DriftKind::Nemytskii,
        noise: QWienerSpec {
            family: EigenFamily::TensorSine,
            rule: EigenvalueRule::InverseSumPower(4.0),
            k: 1,
        },
        // 2 sin(pi x1) sin(pi x2) is the unit (1,1) coefficient
        initial: InitialValue::Modes(vec![([1, 1], 1.0)]),
        euler_time_power: 4,
    }
}

fn burgers() -> ProblemSpec {
    // xi = 3 sqrt(2)/5 (sin pi x + sin 2 pi x) = 3/5 (e_1 + e_2)
    ProblemSpec {
        name: "burgers".into(),
        dim: 1,
        kappa: 1.0 / 100.0,
        horizon: 1.0,
        pair: NemytskiiPair::new("burgers", |_, _| 0.0, |_, y| y, |_, _| 1.0),
        drift: DriftKind::Burgers,
        noise: QWienerSpec {
            family: EigenFamily::Sine,
            rule: EigenvalueRule::InversePower(2.0),
            k: 1,
        },
        initial: InitialValue::Modes(vec![([1, 0], 0.6), ([2, 0], 0.6)]),
        euler_time_power: 3,
    }
}

/// Looks up a preset by its config-file name.
pub fn preset(name: &str) -> Result<ProblemSpec> {
    match name {
        "reacdiff1d" => Ok(reacdiff1d()),
        "reacdiff_cos" => Ok(reacdiff_cos()),
        "heat2d" => Ok(heat2d()),
        "burgers" => Ok(burgers()),
        other => Err(Error::UnknownPreset {
            name: other.to_string(),
            available: PRESET_NAMES.join(", "),
        }),
    }
}
