//! Truncated Q-Wiener noise.
//!
//! A noise is `W_t = sum_{j in J_K, mu_j != 0} sqrt(mu_j) beta^j_t g_j` with
//! independent scalar Brownian motions `beta^j`. All randomness comes from a
//! [`MasterPath`]: one array of fine Brownian increments per mode, generated
//! at the finest step count of an experiment. Coarser increments are sums of
//! fine ones, so runs at different `(M, K)` see the same Brownian path.
//!
//! # Random stream layout
//!
//! Each mode owns an independent ChaCha20 stream (`rand_chacha`, seeded with
//! `seed_from_u64(seed)` and `set_stream(slot)` where `slot = j` in 1D and
//! `(j1 << 32) | j2` in 2D). Standard normals come from the ziggurat sampler
//! of `rand_distr::StandardNormal`. With `M_ref = q 2^L` (`q` odd) a mode's
//! path is built coarse-to-fine: `q` increments of length `T/q`, then `L`
//! Brownian-bridge halvings, drawing normals left to right within a level.
//! Exactly `M_ref` normals are drawn per mode, and doubling `M_ref` only
//! appends a refinement level, leaving every coarser increment unchanged up to
//! rounding.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spectral::{Field, Representation, SpectralBasis};

/// Name of the random number generator, recorded in experiment metadata.
pub const RNG_NAME: &str =
    "ChaCha20 per-mode streams (rand_chacha 0.9) + ziggurat StandardNormal (rand_distr 0.5)";

/// Eigenfunction family of the covariance operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenFamily {
    /// `g_j = sqrt(2) sin(j pi x)`, `j >= 1`.
    Sine,
    /// `g_0 = 1`, `g_j = sqrt(2) cos(j pi x)`, `j >= 0`.
    CosineWithConstant,
    /// `g_(j1,j2) = 2 sin(j1 pi x1) sin(j2 pi x2)`, `j1, j2 >= 1`.
    TensorSine,
}

impl EigenFamily {
    pub fn dim(self) -> usize {
        match self {
            EigenFamily::Sine | EigenFamily::CosineWithConstant => 1,
            EigenFamily::TensorSine => 2,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            EigenFamily::Sine => "sine",
            EigenFamily::CosineWithConstant => "cosine",
            EigenFamily::TensorSine => "tensor_sine",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "sine" => Ok(EigenFamily::Sine),
            "cosine" => Ok(EigenFamily::CosineWithConstant),
            "tensor_sine" => Ok(EigenFamily::TensorSine),
            other => Err(Error::InvalidParameter(format!(
                "unknown noise family '{other}'"
            ))),
        }
    }

    /// `g_j(x)`.
    pub fn eval(self, index: [usize; 2], x: &[f64]) -> f64 {
        match self {
            EigenFamily::Sine => SQRT_2 * (index[0] as f64 * PI * x[0]).sin(),
            EigenFamily::CosineWithConstant => {
                if index[0] == 0 {
                    1.0
                } else {
                    SQRT_2 * (index[0] as f64 * PI * x[0]).cos()
                }
            }
            EigenFamily::TensorSine => {
                2.0 * (index[0] as f64 * PI * x[0]).sin() * (index[1] as f64 * PI * x[1]).sin()
            }
        }
    }
}

/// Rule assigning the covariance eigenvalue `mu_j` to a mode.
#[derive(Clone, Debug, PartialEq)]
pub enum EigenvalueRule {
    /// `mu_j = j^{-p}`; the constant cosine mode gets `mu_0 = 0`. In 2D,
    /// `mu_(j1,j2) = (j1 j2)^{-p}`.
    InversePower(f64),
    /// `mu_(j1,j2) = (j1 + j2)^{-p}` (in 1D the same as `InversePower`).
    InverseSumPower(f64),
    /// Explicit values by mode position: 1D sine `j -> [j-1]`, cosine
    /// `j -> [j]`, 2D `(j1,j2) -> [(j1-1) * 64 + (j2-1)]` for indices below 64.
    /// Missing entries are zero.
    Explicit(Vec<f64>),
}

impl EigenvalueRule {
    pub fn name(&self) -> String {
        match self {
            EigenvalueRule::InversePower(p) => format!("inverse_power:{p}"),
            EigenvalueRule::InverseSumPower(p) => format!("inverse_sum_power:{p}"),
            EigenvalueRule::Explicit(v) => {
                let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                format!("explicit:{}", list.join(","))
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (name, arg) = text.split_once(':').ok_or_else(|| {
            Error::InvalidParameter(format!("eigenvalue rule '{text}' needs name:value"))
        })?;
        let number = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("bad number '{s}' in eigenvalue rule"))
            })
        };
        match name.trim() {
            "inverse_power" => Ok(EigenvalueRule::InversePower(number(arg)?)),
            "inverse_sum_power" => Ok(EigenvalueRule::InverseSumPower(number(arg)?)),
            "explicit" => Ok(EigenvalueRule::Explicit(
                arg.split(',').map(number).collect::<Result<_>>()?,
            )),
            other => Err(Error::InvalidParameter(format!(
                "unknown eigenvalue rule '{other}'"
            ))),
        }
    }

    fn eval(&self, family: EigenFamily, index: [usize; 2]) -> f64 {
        let [j1, j2] = index;
        match (self, family) {
            (EigenvalueRule::Explicit(values), EigenFamily::Sine) => {
                values.get(j1 - 1).copied().unwrap_or(0.0)
            }
            (EigenvalueRule::Explicit(values), EigenFamily::CosineWithConstant) => {
                values.get(j1).copied().unwrap_or(0.0)
            }
            (EigenvalueRule::Explicit(values), EigenFamily::TensorSine) => {
                if j1 <= 64 && j2 <= 64 {
                    values.get((j1 - 1) * 64 + (j2 - 1)).copied().unwrap_or(0.0)
                } else {
                    0.0
                }
            }
            (_, EigenFamily::CosineWithConstant) if j1 == 0 => 0.0,
            (EigenvalueRule::InversePower(p), EigenFamily::TensorSine) => {
                ((j1 * j2) as f64).powf(-p)
            }
            (EigenvalueRule::InverseSumPower(p), EigenFamily::TensorSine) => {
                ((j1 + j2) as f64).powf(-p)
            }
            (EigenvalueRule::InversePower(p) | EigenvalueRule::InverseSumPower(p), _) => {
                (j1 as f64).powf(-p)
            }
        }
    }
}

/// One retained noise mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseMode {
    /// `[j, 0]` in 1D, `[j1, j2]` in 2D.
    pub index: [usize; 2],
    pub mu: f64,
}

impl NoiseMode {
    /// Stream id of this mode's random numbers; independent of `K`.
    pub fn slot(&self) -> u64 {
        ((self.index[0] as u64) << 32) | self.index[1] as u64
    }
}

/// Covariance eigenpairs `(mu_j, g_j)` and the truncation `J_K`.
#[derive(Clone, Debug, PartialEq)]
pub struct QWienerSpec {
    pub family: EigenFamily,
    pub rule: EigenvalueRule,
    /// Truncation: `J_K = {1..K}` (sine), `{0..K}` (cosine) or `{1..K}^2`.
    pub k: usize,
}

impl QWienerSpec {
    pub fn new(family: EigenFamily, rule: EigenvalueRule, k: usize) -> Result<Self> {
        let spec = Self { family, rule, k };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_k(&self, k: usize) -> Self {
        Self {
            family: self.family,
            rule: self.rule.clone(),
            k,
        }
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn validate(&self) -> Result<()> {
        for mode in self.all_modes(self.k) {
            if !(mode.mu.is_finite() && mode.mu >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "covariance eigenvalue {} at mode {:?} must be finite and non-negative",
                    mode.mu, mode.index
                )));
            }
        }
        Ok(())
    }

    pub fn mu(&self, index: [usize; 2]) -> f64 {
        self.rule.eval(self.family, index)
    }

    /// Every mode of `J_k`, zero eigenvalues included, in nested order: the
    /// modes of `J_{k'}` for `k' < k` come first. In 2D this is shell order
    /// (`max(j1, j2)` ascending, lexicographic within a shell).
    pub fn all_modes(&self, k: usize) -> Vec<NoiseMode> {
        let mut indices = Vec::new();
        match self.family {
            EigenFamily::Sine => indices.extend((1..=k).map(|j| [j, 0])),
            EigenFamily::CosineWithConstant => indices.extend((0..=k).map(|j| [j, 0])),
            EigenFamily::TensorSine => {
                for s in 1..=k {
                    for j1 in 1..=s {
                        for j2 in 1..=s {
                            if j1.max(j2) == s {
                                indices.push([j1, j2]);
                            }
                        }
                    }
                }
            }
        }
        indices
            .into_iter()
            .map(|index| NoiseMode {
                index,
                mu: self.mu(index),
            })
            .collect()
    }

    /// Modes of `J_k` with `mu_j != 0`; the only ones that are ever sampled.
    pub fn active_modes(&self, k: usize) -> Vec<NoiseMode> {
        self.all_modes(k)
            .into_iter()
            .filter(|m| m.mu != 0.0)
            .collect()
    }

    /// `sum_{j in J_K} mu_j`.
    pub fn trace(&self) -> f64 {
        self.active_modes(self.k).iter().map(|m| m.mu).sum()
    }
}

/// Number of independent standard normals consumed by `steps` time steps:
/// `M * |{j in J_K : mu_j != 0}|`.
pub fn count_random_variables(steps: u64, spec: &QWienerSpec) -> u64 {
    steps * spec.active_modes(spec.k).len() as u64
}

/// Fine-resolution Brownian increments for every active mode of `J_{K_ref}`.
///
/// Generated once, then only read; cheap to share across threads.
#[derive(Clone, Debug)]
pub struct MasterPath {
    seed: u64,
    steps: usize,
    k_ref: usize,
    horizon: f64,
    family: EigenFamily,
    modes: Vec<NoiseMode>,
    position: HashMap<u64, usize>,
    increments: Vec<Vec<f64>>,
    draws: u64,
}

impl MasterPath {
    /// Draws the path for the active modes of `J_{k_ref}` of `spec`, with
    /// `steps` fine increments on `[0, horizon]`.
    pub fn generate(
        seed: u64,
        spec: &QWienerSpec,
        steps: usize,
        k_ref: usize,
        horizon: f64,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter(
                "master path needs at least one step".into(),
            ));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let modes = spec.with_k(k_ref).active_modes(k_ref);
        let mut draws = 0u64;
        let increments: Vec<Vec<f64>> = modes
            .iter()
            .map(|mode| {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                rng.set_stream(mode.slot());
                let mut normal = || {
                    draws += 1;
                    rng.sample::<f64, _>(StandardNormal)
                };
                bridge_increments(steps, horizon, &mut normal)
            })
            .collect();
        let position = modes
            .iter()
            .enumerate()
            .map(|(i, m)| (m.slot(), i))
            .collect();
        Ok(Self {
            seed,
            steps,
            k_ref,
            horizon,
            family: spec.family,
            modes,
            position,
            increments,
            draws,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `M_ref`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `K_ref`.
    pub fn k_ref(&self) -> usize {
        self.k_ref
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn modes(&self) -> &[NoiseMode] {
        &self.modes
    }

    /// Standard normals drawn while generating the path.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Fine increments of the mode at `position` (master order).
    pub fn fine_increments(&self, position: usize) -> &[f64] {
        &self.increments[position]
    }

    fn check_steps(&self, steps: usize) -> Result<usize> {
        if steps == 0 || !self.steps.is_multiple_of(steps) {
            return Err(Error::StepsDoNotDivide {
                steps,
                master_steps: self.steps,
            });
        }
        Ok(self.steps / steps)
    }

    /// Position of `mode` in the master mode list.
    pub fn position_of(&self, mode: &NoiseMode) -> Option<usize> {
        self.position.get(&mode.slot()).copied()
    }

    /// Coarse increment `beta^j((m+1)T/M) - beta^j(mT/M)` of the mode at
    /// `position`: the pairwise sum of the `M_ref / M` fine increments in the
    /// window. A window of length `2L` is summed as (first `L`) + (last `L`),
    /// so the two half-step increments add up to the full step bit for bit.
    pub fn coarse_increment(&self, position: usize, m: usize, steps: usize) -> Result<f64> {
        let ratio = self.check_steps(steps)?;
        if m >= steps {
            return Err(Error::InvalidParameter(format!(
                "step {m} out of range for {steps} steps"
            )));
        }
        Ok(pairwise_sum(
            &self.increments[position][m * ratio..(m + 1) * ratio],
        ))
    }

    /// Fine increments of one coarse step, split into `substeps` equal parts
    /// (each part summed pairwise). Requires `substeps | M_ref / M`.
    pub fn sub_increments(
        &self,
        position: usize,
        m: usize,
        steps: usize,
        substeps: usize,
    ) -> Result<Vec<f64>> {
        let ratio = self.check_steps(steps)?;
        if substeps == 0 || ratio % substeps != 0 {
            return Err(Error::InvalidParameter(format!(
                "{substeps} substeps do not divide the {ratio} fine steps per coarse step"
            )));
        }
        let window = &self.increments[position][m * ratio..(m + 1) * ratio];
        Ok(window
            .chunks_exact(ratio / substeps)
            .map(pairwise_sum)
            .collect())
    }
}

fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len => {
            let (left, right) = values.split_at(len / 2);
            pairwise_sum(left) + pairwise_sum(right)
        }
    }
}

/// Brownian increments on `steps` equal sub-intervals of `[0, horizon]`, built
/// coarse-to-fine by Brownian-bridge halving.
fn bridge_increments(steps: usize, horizon: f64, normal: &mut impl FnMut() -> f64) -> Vec<f64> {
    let levels = steps.trailing_zeros();
    let base = steps >> levels;
    let base_sd = (horizon / base as f64).sqrt();
    let mut current: Vec<f64> = (0..base).map(|_| base_sd * normal()).collect();
    let mut width = horizon / base as f64;
    for _ in 0..levels {
        let half_sd = 0.5 * width.sqrt();
        let mut next = Vec::with_capacity(current.len() * 2);
        for d in current {
            let z = half_sd * normal();
            next.push(0.5 * d + z);
            next.push(0.5 * d - z);
        }
        current = next;
        width *= 0.5;
    }
    current
}

/// `h * sum_{j in J_K, mu_j != 0} mu_j g_j(x_k)^2` on the grid.
pub fn quadrature_field(spec: &QWienerSpec, basis: &SpectralBasis, h: f64) -> Result<Field> {
    check_family(spec, basis)?;
    let modes = spec.active_modes(spec.k);
    let values = (0..basis.len())
        .map(|k| {
            let x = basis.node(k);
            h * modes
                .iter()
                .map(|mode| {
                    let g = spec.family.eval(mode.index, x);
                    mode.mu * g * g
                })
                .sum::<f64>()
        })
        .collect();
    Field::grid(basis.dim(), basis.n(), values)
}

fn check_family(spec: &QWienerSpec, basis: &SpectralBasis) -> Result<()> {
    if spec.dim() != basis.dim() {
        return Err(Error::InvalidParameter(format!(
            "{} noise needs d = {}, basis has d = {}",
            spec.family.tag(),
            spec.dim(),
            basis.dim()
        )));
    }
    spec.validate()
}

#[derive(Clone, Debug)]
enum Synthesis {
    /// Sine families with every mode inside the basis: scatter into a
    /// coefficient vector and reuse the spectral transform.
    Spectral { slots: Vec<usize> },
    /// Direct summation with a `modes x nodes` table of `g_j(x_k)`.
    Table { table: Vec<f64> },
}

/// Turns master-path increments into grid noise increments
/// `Delta W_m = sum sqrt(mu_j) Delta beta_j g_j(x_k)` for one `(M, K)` pair.
#[derive(Clone, Debug)]
pub struct IncrementSampler {
    steps: usize,
    modes: Vec<NoiseMode>,
    positions: Vec<usize>,
    sqrt_mu: Vec<f64>,
    synthesis: Synthesis,
    dim: usize,
    n: usize,
}

impl IncrementSampler {
    pub fn new(
        spec: &QWienerSpec,
        basis: &SpectralBasis,
        path: &MasterPath,
        steps: usize,
    ) -> Result<Self> {
        check_family(spec, basis)?;
        if spec.family != path.family {
            return Err(Error::InvalidParameter(format!(
                "master path was drawn for {} noise, not {}",
                path.family.tag(),
                spec.family.tag()
            )));
        }
        if spec.k > path.k_ref {
            return Err(Error::ModeBudgetExceeded {
                k: spec.k,
                k_ref: path.k_ref,
            });
        }
        path.check_steps(steps)?;
        let modes = spec.active_modes(spec.k);
        let positions = modes
            .iter()
            .map(|mode| {
                path.position_of(mode).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "mode {:?} missing from master path",
                        mode.index
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sampler = Self::for_modes(spec, basis, modes)?;
        sampler.steps = steps;
        sampler.positions = positions;
        Ok(sampler)
    }

    /// Sampler without a master path; use [`Self::synthesize`] with
    /// externally supplied `Delta beta`.
    pub fn for_spec(spec: &QWienerSpec, basis: &SpectralBasis) -> Result<Self> {
        check_family(spec, basis)?;
        Self::for_modes(spec, basis, spec.active_modes(spec.k))
    }

    fn for_modes(spec: &QWienerSpec, basis: &SpectralBasis, modes: Vec<NoiseMode>) -> Result<Self> {
        let n = basis.n();
        let fits = modes.iter().all(|m| m.index[0] <= n && m.index[1] <= n);
        let synthesis = match spec.family {
            EigenFamily::Sine | EigenFamily::TensorSine if fits => Synthesis::Spectral {
                slots: modes
                    .iter()
                    .map(|m| match spec.family {
                        EigenFamily::Sine => m.index[0] - 1,
                        _ => (m.index[0] - 1) * n + (m.index[1] - 1),
                    })
                    .collect(),
            },
            _ => {
                let mut table = Vec::with_capacity(modes.len() * basis.len());
                for mode in &modes {
                    for k in 0..basis.len() {
                        table.push(spec.family.eval(mode.index, basis.node(k)));
                    }
                }
                Synthesis::Table { table }
            }
        };
        Ok(Self {
            steps: 0,
            sqrt_mu: modes.iter().map(|m| m.mu.sqrt()).collect(),
            positions: Vec::new(),
            modes,
            synthesis,
            dim: basis.dim(),
            n,
        })
    }

    pub fn modes(&self) -> &[NoiseMode] {
        &self.modes
    }

    /// Standard normals consumed per time step.
    pub fn normals_per_step(&self) -> usize {
        self.modes.len()
    }

    /// Coarse Brownian increments `Delta beta_j` of step `m`, one per mode.
    pub fn brownian_increments(&self, path: &MasterPath, m: usize) -> Result<Vec<f64>> {
        self.positions
            .iter()
            .map(|&p| path.coarse_increment(p, m, self.steps))
            .collect()
    }

    /// Grid field `sum_j sqrt(mu_j) dbeta_j g_j`.
    pub fn synthesize(&self, basis: &SpectralBasis, dbeta: &[f64]) -> Result<Field> {
        if dbeta.len() != self.modes.len() {
            return Err(Error::SizeMismatch {
                expected: self.modes.len(),
                actual: dbeta.len(),
            });
        }
        let nodes = self.n.pow(self.dim as u32);
        let values = match &self.synthesis {
            Synthesis::Spectral { slots } => {
                let mut coefficients = vec![0.0; nodes];
                for ((&slot, s), d) in slots.iter().zip(&self.sqrt_mu).zip(dbeta) {
                    coefficients[slot] = s * d;
                }
                basis.synthesize(&coefficients)?
            }
            Synthesis::Table { table } => {
                let mut values = vec![0.0; nodes];
                for ((row, s), d) in table.chunks_exact(nodes).zip(&self.sqrt_mu).zip(dbeta) {
                    let w = s * d;
                    for (v, g) in values.iter_mut().zip(row) {
                        *v += w * g;
                    }
                }
                values
            }
        };
        Field::new(self.dim, self.n, Representation::Grid, values)
    }

    /// Grid noise increment of step `m`.
    pub fn increment(&self, basis: &SpectralBasis, path: &MasterPath, m: usize) -> Result<Field> {
        let dbeta = self.brownian_increments(path, m)?;
        self.synthesize(basis, &dbeta)
    }
}

/// `Delta W_m^{M,K}` on the grid, for the truncation `spec.k`.
pub fn sample_increment(
    path: &MasterPath,
    spec: &QWienerSpec,
    basis: &SpectralBasis,
    m: usize,
    steps: usize,
) -> Result<Field> {
    IncrementSampler::new(spec, basis, path, steps)?.increment(basis, path, m)
}
