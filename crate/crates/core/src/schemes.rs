//! Time-stepping schemes on the spectral Galerkin space `P_N(H)`.
//!
//! Every step has the same shape: synthesize the iterate on the grid, build
//! a pointwise update `w` there, transform back (which is the projection
//! `P_N`, the grid carries exactly `N^d` modes) and apply a diagonal linear
//! factor per mode:
//!
//! | scheme              | pointwise update `w`                                   | factor              |
//! |---------------------|--------------------------------------------------------|---------------------|
//! | `milstein`          | `y + h F(y) + b(y) dW + 1/2 b_y(y) b(y) (dW^2 - quad)` | `exp(-lambda h)`    |
//! | `exponential_euler` | `y + h F(y) + b(y) dW`                                 | `exp(-lambda h)`    |
//! | `implicit_euler`    | `y + h F(y) + b(y) dW`                                 | `1 / (1 + lambda h)`|
//! | `splitting`         | `exp(dW - quad / 2) y`                                 | `exp(-lambda h)`    |
//!
//! with `quad = h sum_{j in J_K} mu_j g_j^2`. The Milstein correction is the
//! closed form of the iterated stochastic integral for Nemytskii diffusion;
//! [`iterated_integral_oracle`] checks that identity by simulation.

use std::fmt;
use std::str::FromStr;

use crate::coefficients::NemytskiiPair;
use crate::error::{Error, Result};
use crate::noise::{quadrature_field, IncrementSampler, MasterPath, QWienerSpec};
use crate::problems::{DriftKind, ProblemSpec};
use crate::spectral::{Field, Representation, SpectralBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Milstein,
    ImplicitEuler,
    ExponentialEuler,
    Splitting,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::Milstein,
        SchemeKind::ImplicitEuler,
        SchemeKind::ExponentialEuler,
        SchemeKind::Splitting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Milstein => "milstein",
            SchemeKind::ImplicitEuler => "implicit_euler",
            SchemeKind::ExponentialEuler => "exponential_euler",
            SchemeKind::Splitting => "splitting",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

/// Resolution and horizon of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Spatial modes per axis.
    pub n: usize,
    /// Time steps.
    pub steps: usize,
    /// Noise modes per axis.
    pub k: usize,
    pub horizon: f64,
}

impl SchemeConfig {
    /// The problem's recommended `(M, K)` coupling at resolution `n`.
    pub fn recommended(problem: &ProblemSpec, kind: SchemeKind, n: usize) -> Self {
        let (steps, k) = problem.recommended(kind, n);
        Self {
            kind,
            n,
            steps,
            k,
            horizon: problem.horizon,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }
}

/// One configured scheme, ready to advance iterates.
#[derive(Debug)]
pub struct Stepper<'p> {
    problem: &'p ProblemSpec,
    config: SchemeConfig,
    basis: SpectralBasis,
    noise: QWienerSpec,
    sampler: IncrementSampler,
    quad: Field,
    h: f64,
    factors: Vec<f64>,
    /// `2N + 1` modes: the Burgers product is exact on this grid.
    padded: Option<SpectralBasis>,
}

impl<'p> Stepper<'p> {
    /// Stepper drawing its increments from `path`.
    pub fn new(problem: &'p ProblemSpec, config: SchemeConfig, path: &MasterPath) -> Result<Self> {
        Self::build(problem, config, Some(path))
    }

    /// Stepper for externally supplied increments ([`Self::step_with`]).
    pub fn detached(problem: &'p ProblemSpec, config: SchemeConfig) -> Result<Self> {
        Self::build(problem, config, None)
    }

    fn build(
        problem: &'p ProblemSpec,
        config: SchemeConfig,
        path: Option<&MasterPath>,
    ) -> Result<Self> {
        if !(config.horizon.is_finite() && config.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                config.horizon
            )));
        }
        if config.kind == SchemeKind::Splitting
            && (!problem.pair.is_linear_multiplicative() || problem.drift != DriftKind::Nemytskii)
        {
            return Err(Error::NotLinearMultiplicative(problem.name.clone()));
        }
        let basis = problem.basis(config.n)?;
        let padded = match problem.drift {
            DriftKind::Burgers if basis.dim() != 1 => {
                return Err(Error::RequiresOneDimension(basis.dim()))
            }
            DriftKind::Burgers => Some(problem.basis(2 * config.n + 1)?),
            DriftKind::Nemytskii => None,
        };
        let noise = problem.noise_with_k(config.k);
        let h = if config.steps == 0 {
            0.0
        } else {
            config.step_size()
        };
        let sampler = match path {
            Some(path) if config.steps > 0 => {
                if (path.horizon() - config.horizon).abs() > 1e-12 * config.horizon {
                    return Err(Error::InvalidParameter(format!(
                        "master path horizon {} differs from scheme horizon {}",
                        path.horizon(),
                        config.horizon
                    )));
                }
                IncrementSampler::new(&noise, &basis, path, config.steps)?
            }
            _ => IncrementSampler::for_spec(&noise, &basis)?,
        };
        let quad = quadrature_field(&noise, &basis, h)?;
        let factors = match config.kind {
            SchemeKind::ImplicitEuler => basis.resolvent_factors(h)?,
            _ => basis.semigroup_factors(h)?,
        };
        Ok(Self {
            problem,
            config,
            basis,
            noise,
            sampler,
            quad,
            h,
            factors,
            padded,
        })
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn noise(&self) -> &QWienerSpec {
        &self.noise
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// `h sum mu_j g_j^2` on the grid.
    pub fn quadrature(&self) -> &Field {
        &self.quad
    }

    pub fn sampler(&self) -> &IncrementSampler {
        &self.sampler
    }

    /// `Y_0 = P_N xi`.
    pub fn initial(&self) -> Result<Field> {
        self.problem.initial_spectral(&self.basis)
    }

    /// Grid increment `Delta W_m^{M,K}` from the master path.
    pub fn noise_increment(&self, path: &MasterPath, m: usize) -> Result<Field> {
        self.sampler.increment(&self.basis, path, m)
    }

    /// Advances `y` by step `m` using the master path.
    pub fn step(&self, y: &Field, m: usize, path: &MasterPath) -> Result<Field> {
        let dw = self.noise_increment(path, m)?;
        let next = self.step_with(y, &dw, &self.quad)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { step: m });
        }
        Ok(next)
    }

    /// Pointwise update `w` on the grid, before projection and the linear factor.
    pub fn pointwise_update(&self, y: &Field, dw: &Field, quad: &Field) -> Result<Field> {
        let grid = self.basis.to_grid(y)?;
        grid.check_same_layout(dw)?;
        grid.check_same_layout(quad)?;
        let yv = grid.values();
        let (dw, quad) = (dw.values(), quad.values());
        let pair = &self.problem.pair;
        let w: Vec<f64> = match self.config.kind {
            SchemeKind::Splitting => yv
                .iter()
                .zip(dw)
                .zip(quad)
                .map(|((&y, &w), &q)| (w - 0.5 * q).exp() * y)
                .collect(),
            kind => {
                let drift = self.drift(y, &grid)?;
                let h = self.h;
                (0..yv.len())
                    .map(|k| {
                        let x = self.basis.node(k);
                        let y = yv[k];
                        let b = pair.b(x, y);
                        let mut w = y + h * drift[k] + b * dw[k];
                        if kind == SchemeKind::Milstein {
                            let correction = 0.5 * pair.b_y(x, y) * b * (dw[k] * dw[k] - quad[k]);
                            if correction != 0.0 {
                                w += correction;
                            }
                        }
                        w
                    })
                    .collect()
            }
        };
        Field::grid(self.basis.dim(), self.basis.n(), w)
    }

    fn drift(&self, y: &Field, grid: &Field) -> Result<Vec<f64>> {
        match self.problem.drift {
            DriftKind::Nemytskii => Ok(self
                .problem
                .pair
                .eval_drift(&self.basis, grid)?
                .into_values()),
            DriftKind::Burgers => {
                // P_N(-v v_x) exactly: the product has modes up to 2N. On the
                // N-node grid aliasing pumps energy in and low N blows up.
                let padded = self
                    .padded
                    .as_ref()
                    .ok_or(Error::RequiresOneDimension(self.basis.dim()))?;
                let c = y.resize_spectral(padded.n())?;
                let v = padded.synthesize(c.values())?;
                let mut dv = vec![0.0; v.len()];
                padded.derivative_into(c.values(), &mut dv);
                let mut product: Vec<f64> = v.iter().zip(&dv).map(|(v, d)| -v * d).collect();
                padded.analyze_in_place(&mut product);
                product.truncate(self.basis.n());
                self.basis.synthesize(&product)
            }
        }
    }

    /// One step with explicit grid increment `dw` and quadrature field `quad`.
    pub fn step_with(&self, y: &Field, dw: &Field, quad: &Field) -> Result<Field> {
        let w = self.pointwise_update(y, dw, quad)?;
        let mut c = w.into_values();
        self.basis.analyze_in_place(&mut c);
        for (v, f) in c.iter_mut().zip(&self.factors) {
            *v *= f;
        }
        Field::new(
            self.basis.dim(),
            self.basis.n(),
            Representation::Spectral,
            c,
        )
    }
}

/// Result of [`run_scheme`].
#[derive(Clone, Debug)]
pub struct RunOutput {
    /// `Y_M` as spectral coefficients.
    pub state: Field,
    /// Standard normals consumed (coarse increments pulled from the path).
    pub draws: u64,
    /// `(step, state)` pairs recorded when snapshots were requested.
    pub snapshots: Vec<(usize, Field)>,
}

/// Runs `config.steps` steps from `Y_0 = P_N xi` on `path`.
pub fn run_scheme(
    problem: &ProblemSpec,
    config: &SchemeConfig,
    path: &MasterPath,
) -> Result<RunOutput> {
    run_scheme_with_snapshots(problem, config, path, None)
}

/// As [`run_scheme`], also recording every `every`-th iterate (and the last).
pub fn run_scheme_with_snapshots(
    problem: &ProblemSpec,
    config: &SchemeConfig,
    path: &MasterPath,
    every: Option<usize>,
) -> Result<RunOutput> {
    let stepper = Stepper::new(problem, config.clone(), path)?;
    let mut y = stepper.initial()?;
    let mut draws = 0u64;
    let mut snapshots = Vec::new();
    let record =
        |m: usize| every.is_some_and(|e| e > 0 && (m.is_multiple_of(e) || m == config.steps));
    if record(0) {
        snapshots.push((0, y.clone()));
    }
    for m in 0..config.steps {
        let dbeta = stepper.sampler.brownian_increments(path, m)?;
        draws += dbeta.len() as u64;
        let dw = stepper.sampler.synthesize(&stepper.basis, &dbeta)?;
        y = stepper.step_with(&y, &dw, &stepper.quad)?;
        if !y.is_finite() {
            return Err(Error::NonFinite { step: m });
        }
        if record(m + 1) {
            snapshots.push((m + 1, y.clone()));
        }
    }
    Ok(RunOutput {
        state: y,
        draws,
        snapshots,
    })
}

/// Moments of the simulated iterated integral against its closed form.
#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub samples: usize,
    pub substeps: usize,
    /// Largest `|simulated - closed|` over all samples and nodes.
    pub max_abs_difference: f64,
    /// Per node: mean of the simulated integral.
    pub mean_simulated: Vec<f64>,
    /// Per node: mean of the closed form.
    pub mean_closed: Vec<f64>,
    /// Per node: standard error of the mean difference.
    pub difference_stderr: Vec<f64>,
    /// Largest `|mean(sim - closed)| / stderr` over nodes (0 when both vanish).
    pub first_moment_z: f64,
    /// Largest `|E sim^2 - E closed^2| / E closed^2` over nodes.
    pub second_moment_rel_error: f64,
}

/// Simulates `int int B'(v)(B(v) dW_u) dW_s` over one step of length `h`
/// with `substeps` left-point sub-intervals and compares it nodewise with
/// `1/2 b_y b (dW^2 - quad)` built from the same path's total increment.
///
/// Off-diagonal terms `I_(k,j) = sum_s (beta_k(s) - beta_k(0)) dbeta_j(s)` are
/// Riemann-Ito sums; diagonal terms use the exact scalar identity
/// `I_(j,j) = (dbeta_j^2 - h) / 2`.
#[allow(clippy::too_many_arguments)]
pub fn iterated_integral_oracle(
    v: &Field,
    pair: &NemytskiiPair,
    spec: &QWienerSpec,
    basis: &SpectralBasis,
    h: f64,
    substeps: usize,
    samples: usize,
    seed: u64,
) -> Result<IdentityReport> {
    if substeps < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 substeps, got {substeps}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    v.expect(Representation::Grid)?;
    let modes = spec.active_modes(spec.k);
    let kmodes = modes.len();
    let nodes = basis.len();
    if v.len() != nodes {
        return Err(Error::SizeMismatch {
            expected: nodes,
            actual: v.len(),
        });
    }
    // c_j(x_k) = sqrt(mu_j) g_j(x_k), a(x_k) = b_y b at v
    let weights: Vec<Vec<f64>> = (0..nodes)
        .map(|k| {
            modes
                .iter()
                .map(|m| m.mu.sqrt() * spec.family.eval(m.index, basis.node(k)))
                .collect()
        })
        .collect();
    let prefactor: Vec<f64> = (0..nodes)
        .map(|k| {
            let x = basis.node(k);
            pair.b_y(x, v.values()[k]) * pair.b(x, v.values()[k])
        })
        .collect();

    let mut sum_sim = vec![0.0; nodes];
    let mut sum_closed = vec![0.0; nodes];
    let mut sum_d = vec![0.0; nodes];
    let mut sum_d2 = vec![0.0; nodes];
    let mut sum_sim2 = vec![0.0; nodes];
    let mut sum_closed2 = vec![0.0; nodes];
    let mut max_abs = 0.0f64;
    let mut levy = vec![0.0; kmodes * kmodes];
    let mut totals = vec![0.0; kmodes];

    for s in 0..samples {
        let path = MasterPath::generate(seed.wrapping_add(s as u64), spec, substeps, spec.k, h)?;
        for (j, total) in totals.iter_mut().enumerate() {
            *total = path.fine_increments(j).iter().sum();
        }
        levy.fill(0.0);
        for kk in 0..kmodes {
            let inner = path.fine_increments(kk);
            for j in 0..kmodes {
                if j == kk {
                    continue;
                }
                let outer = path.fine_increments(j);
                let mut running = 0.0;
                let mut acc = 0.0;
                for (di, dj) in inner.iter().zip(outer) {
                    acc += running * dj;
                    running += di;
                }
                levy[kk * kmodes + j] = acc;
            }
        }
        for k in 0..nodes {
            let c = &weights[k];
            let mut iterated = 0.0;
            for j in 0..kmodes {
                iterated += c[j] * c[j] * 0.5 * (totals[j] * totals[j] - h);
                for kk in 0..kmodes {
                    if kk != j {
                        iterated += c[j] * c[kk] * levy[kk * kmodes + j];
                    }
                }
            }
            let sim = prefactor[k] * iterated;
            let dw: f64 = c.iter().zip(&totals).map(|(ci, t)| ci * t).sum();
            let quad: f64 = h * c.iter().map(|ci| ci * ci).sum::<f64>();
            let closed = 0.5 * prefactor[k] * (dw * dw - quad);
            let d = sim - closed;
            max_abs = max_abs.max(d.abs());
            sum_sim[k] += sim;
            sum_closed[k] += closed;
            sum_d[k] += d;
            sum_d2[k] += d * d;
            sum_sim2[k] += sim * sim;
            sum_closed2[k] += closed * closed;
        }
    }

    let p = samples as f64;
    let mut first_moment_z = 0.0f64;
    let mut second_rel = 0.0f64;
    let mut stderr = Vec::with_capacity(nodes);
    for k in 0..nodes {
        let mean_d = sum_d[k] / p;
        let var_d = ((sum_d2[k] - p * mean_d * mean_d) / (p - 1.0)).max(0.0);
        let se = (var_d / p).sqrt();
        stderr.push(se);
        let z = if se > 0.0 {
            mean_d.abs() / se
        } else if mean_d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        first_moment_z = first_moment_z.max(z);
        let (m_sim2, m_closed2) = (sum_sim2[k] / p, sum_closed2[k] / p);
        let rel = if m_closed2 > 0.0 {
            (m_sim2 - m_closed2).abs() / m_closed2
        } else if m_sim2 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        second_rel = second_rel.max(rel);
    }
    Ok(IdentityReport {
        samples,
        substeps,
        max_abs_difference: max_abs,
        mean_simulated: sum_sim.iter().map(|s| s / p).collect(),
        mean_closed: sum_closed.iter().map(|s| s / p).collect(),
        difference_stderr: stderr,
        first_moment_z,
        second_moment_rel_error: second_rel,
    })
}
