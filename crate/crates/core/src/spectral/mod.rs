//! Eigensystem of `A = kappa * Laplacian` with homogeneous Dirichlet boundary
//! conditions on `(0,1)^d`, `d in {1, 2}`.
//!
//! Eigenpairs are `lambda_i = kappa pi^2 (i_1^2 + ... + i_d^2)` and
//! `e_i(x) = 2^{d/2} prod_a sin(i_a pi x_a)`; the semigroup `e^{At}` acts on
//! coefficients as `c_i -> exp(-lambda_i t) c_i`. Fields are sampled on the
//! interior nodes `k / (N + 1)`, `k = 1..N` per axis. With this grid the
//! discrete inner product `(N + 1)^{-d} sum_k u(x_k) v(x_k)` makes the first
//! `N^d` eigenfunctions orthonormal, so grid-to-spectral is an exact inverse of
//! spectral-to-grid (no quadrature error beyond rounding).

mod field;
mod transform;

use std::f64::consts::PI;

pub use field::{Field, Representation};
pub use transform::TransformKind;
use transform::TrigPlan;

use crate::error::{Error, Result};

/// Dirichlet-Laplacian eigenbasis truncated to `{1..N}^d`.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    dim: usize,
    n: usize,
    kappa: f64,
    eigenvalues: Vec<f64>,
    axis_nodes: Vec<f64>,
    coords: Vec<f64>,
    plan: TrigPlan,
}

impl SpectralBasis {
    pub fn new(dim: usize, n: usize, kappa: f64) -> Result<Self> {
        Self::with_transform(dim, n, kappa, TransformKind::Fast)
    }

    pub fn with_transform(dim: usize, n: usize, kappa: f64, kind: TransformKind) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("N must be positive".into()));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diffusivity must be finite and non-negative, got {kappa}"
            )));
        }
        let axis_nodes: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
        let (eigenvalues, coords) = match dim {
            1 => (
                (1..=n).map(|i| kappa * PI * PI * (i * i) as f64).collect(),
                axis_nodes.clone(),
            ),
            _ => {
                let mut ev = Vec::with_capacity(n * n);
                let mut xs = Vec::with_capacity(2 * n * n);
                for i1 in 1..=n {
                    for i2 in 1..=n {
                        ev.push(kappa * PI * PI * (i1 * i1 + i2 * i2) as f64);
                        xs.push(axis_nodes[i1 - 1]);
                        xs.push(axis_nodes[i2 - 1]);
                    }
                }
                (ev, xs)
            }
        };
        Ok(Self {
            dim,
            n,
            kappa,
            eigenvalues,
            axis_nodes,
            coords,
            plan: TrigPlan::new(n, kind),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Modes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn transform_kind(&self) -> TransformKind {
        self.plan.kind()
    }

    /// Total number of modes (and of grid nodes), `N^d`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `lambda_i` in lexicographic multi-index order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Per-axis node coordinates `k / (N + 1)`.
    pub fn axis_nodes(&self) -> &[f64] {
        &self.axis_nodes
    }

    /// Coordinates of the `k`-th grid node (lexicographic), `d` entries.
    pub fn node(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    /// 1-based multi-index of the lexicographic position `flat`.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat + 1, 0],
            _ => [flat / self.n + 1, flat % self.n + 1],
        }
    }

    /// `e_i(x) = 2^{d/2} prod_a sin(i_a pi x_a)`.
    pub fn eigenfunction(index: &[usize], x: &[f64]) -> f64 {
        index
            .iter()
            .zip(x)
            .map(|(&i, &xa)| std::f64::consts::SQRT_2 * (i as f64 * PI * xa).sin())
            .product()
    }

    pub fn zeros(&self, repr: Representation) -> Field {
        Field::zeros(self.dim, self.n, repr)
    }

    /// Samples `f` at the grid nodes.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Field {
        let values = (0..self.len()).map(|k| f(self.node(k))).collect();
        Field::new(self.dim, self.n, Representation::Grid, values).expect("layout from basis")
    }

    fn check(&self, field: &Field) -> Result<()> {
        if field.dim() != self.dim || field.n() != self.n {
            return Err(Error::BasisMismatch {
                field_dim: field.dim(),
                field_n: field.n(),
                basis_dim: self.dim,
                basis_n: self.n,
            });
        }
        Ok(())
    }

    fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                actual: values.len(),
            });
        }
        Ok(())
    }

    /// In-place coefficients to grid values.
    pub(crate) fn synthesize_in_place(&self, values: &mut [f64]) {
        self.plan.sine_sum_separable(self.dim, values);
        let scale = 2f64.powf(self.dim as f64 / 2.0);
        values.iter_mut().for_each(|v| *v *= scale);
    }

    /// In-place grid values to coefficients.
    pub(crate) fn analyze_in_place(&self, values: &mut [f64]) {
        self.plan.sine_sum_separable(self.dim, values);
        let scale = 2f64.powf(self.dim as f64 / 2.0) / ((self.n + 1) as f64).powi(self.dim as i32);
        values.iter_mut().for_each(|v| *v *= scale);
    }

    /// Grid values `v(x_k)` to coefficients `c` with `v(x_k) = sum_i c_i e_i(x_k)`.
    pub fn to_spectral(&self, v: &Field) -> Result<Field> {
        self.check(v)?;
        v.expect(Representation::Grid)?;
        let mut values = v.values().to_vec();
        self.analyze_in_place(&mut values);
        Field::spectral(self.dim, self.n, values)
    }

    /// Coefficients to grid values; exact inverse of [`Self::to_spectral`].
    pub fn to_grid(&self, c: &Field) -> Result<Field> {
        self.check(c)?;
        c.expect(Representation::Spectral)?;
        let mut values = c.values().to_vec();
        self.synthesize_in_place(&mut values);
        Field::grid(self.dim, self.n, values)
    }

    /// Slice form of [`Self::to_grid`] for callers that manage their own buffers.
    pub fn synthesize(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coefficients)?;
        let mut values = coefficients.to_vec();
        self.synthesize_in_place(&mut values);
        Ok(values)
    }

    /// `c_i -> exp(-lambda_i h) c_i`.
    pub fn apply_semigroup(&self, c: &Field, h: f64) -> Result<Field> {
        self.check(c)?;
        c.expect(Representation::Spectral)?;
        let factors = self.semigroup_factors(h)?;
        Ok(c.with_values(
            c.values()
                .iter()
                .zip(&factors)
                .map(|(a, f)| a * f)
                .collect(),
        ))
    }

    /// `exp(-lambda_i h)` for every mode.
    pub fn semigroup_factors(&self, h: f64) -> Result<Vec<f64>> {
        if h < 0.0 || h.is_nan() {
            return Err(Error::NegativeTime(h));
        }
        Ok(self.eigenvalues.iter().map(|l| (-l * h).exp()).collect())
    }

    /// `(I - hA)^{-1}`: `c_i -> c_i / (1 + lambda_i h)`.
    pub fn apply_resolvent(&self, c: &Field, h: f64) -> Result<Field> {
        self.check(c)?;
        c.expect(Representation::Spectral)?;
        let factors = self.resolvent_factors(h)?;
        Ok(c.with_values(
            c.values()
                .iter()
                .zip(&factors)
                .map(|(a, f)| a * f)
                .collect(),
        ))
    }

    pub fn resolvent_factors(&self, h: f64) -> Result<Vec<f64>> {
        if h < 0.0 || h.is_nan() {
            return Err(Error::NegativeTime(h));
        }
        Ok(self
            .eigenvalues
            .iter()
            .map(|l| 1.0 / (1.0 + l * h))
            .collect())
    }

    /// Galerkin projection `P_{N'}`: zeroes every coefficient with an index
    /// component above `n_keep`.
    pub fn project(&self, c: &Field, n_keep: usize) -> Result<Field> {
        self.check(c)?;
        c.expect(Representation::Spectral)?;
        if n_keep > self.n {
            return Err(Error::InvalidParameter(format!(
                "projection onto {n_keep} modes exceeds basis size {}",
                self.n
            )));
        }
        let values = c
            .values()
            .iter()
            .enumerate()
            .map(|(flat, &v)| {
                let idx = self.multi_index(flat);
                if idx[..self.dim].iter().all(|&i| i <= n_keep) {
                    v
                } else {
                    0.0
                }
            })
            .collect();
        Ok(c.with_values(values))
    }

    /// Grid values of `d/dx` of a 1D sine series:
    /// `v'(x_k) = sum_n c_n n pi sqrt(2) cos(n pi x_k)`.
    pub fn spectral_derivative_1d(&self, c: &Field) -> Result<Field> {
        if self.dim != 1 {
            return Err(Error::RequiresOneDimension(self.dim));
        }
        self.check(c)?;
        c.expect(Representation::Spectral)?;
        let mut out = vec![0.0; self.n];
        self.derivative_into(c.values(), &mut out);
        Field::grid(1, self.n, out)
    }

    pub(crate) fn derivative_into(&self, coefficients: &[f64], out: &mut [f64]) {
        let weighted: Vec<f64> = coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * (i + 1) as f64 * PI * std::f64::consts::SQRT_2)
            .collect();
        let mut buf = self.plan.scratch();
        self.plan.cosine_sum(&weighted, out, &mut buf);
    }

    /// `||(-A)^r v|| = (sum lambda_i^{2r} c_i^2)^{1/2}`.
    pub fn fractional_norm(&self, c: &Field, r: f64) -> Result<f64> {
        self.check(c)?;
        c.expect(Representation::Spectral)?;
        Ok(c.values()
            .iter()
            .zip(&self.eigenvalues)
            .map(|(v, l)| l.powf(2.0 * r) * v * v)
            .sum::<f64>()
            .sqrt())
    }
}
