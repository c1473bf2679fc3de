//! Nemytskii (pointwise) drift and diffusion coefficients evaluated at the
//! collocation nodes.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{Field, Representation, SpectralBasis};

/// Scalar integrand `(x, y) -> value`, `x` the node coordinates.
pub type Integrand = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Drift `f`, diffusion `b` and its analytic derivative `b_y = db/dy`.
#[derive(Clone)]
pub struct NemytskiiPair {
    name: String,
    f: Integrand,
    b: Integrand,
    b_y: Integrand,
    linear_multiplicative: bool,
}

impl fmt::Debug for NemytskiiPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NemytskiiPair")
            .field("name", &self.name)
            .field("linear_multiplicative", &self.linear_multiplicative)
            .finish()
    }
}

impl NemytskiiPair {
    pub fn new<F, B, D>(name: impl Into<String>, f: F, b: B, b_y: D) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        B: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        D: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: Arc::new(f),
            b: Arc::new(b),
            b_y: Arc::new(b_y),
            linear_multiplicative: false,
        }
    }

    /// `f = 0`, `b(x, y) = y`: the only pair the splitting-up method accepts.
    pub fn linear_multiplicative() -> Self {
        Self {
            linear_multiplicative: true,
            ..Self::new("linear_multiplicative", |_, _| 0.0, |_, y| y, |_, _| 1.0)
        }
    }

    /// `f = 0`, `b = 0`.
    pub fn zero() -> Self {
        Self::new("zero", |_, _| 0.0, |_, _| 0.0, |_, _| 0.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_linear_multiplicative(&self) -> bool {
        self.linear_multiplicative
    }

    pub fn f(&self, x: &[f64], y: f64) -> f64 {
        (self.f)(x, y)
    }

    pub fn b(&self, x: &[f64], y: f64) -> f64 {
        (self.b)(x, y)
    }

    pub fn b_y(&self, x: &[f64], y: f64) -> f64 {
        (self.b_y)(x, y)
    }

    /// Largest relative gap between the analytic `b_y` and a central
    /// difference of `b` in `y` over the given sample points.
    pub fn derivative_check(&self, points: &[(Vec<f64>, f64)]) -> f64 {
        points
            .iter()
            .map(|(x, y)| {
                let eps = 1e-6 * y.abs().max(1.0);
                let fd = (self.b(x, y + eps) - self.b(x, y - eps)) / (2.0 * eps);
                let exact = self.b_y(x, *y);
                (fd - exact).abs() / exact.abs().max(1e-3)
            })
            .fold(0.0, f64::max)
    }

    fn pointwise<G>(&self, basis: &SpectralBasis, v: &Field, g: G) -> Result<Field>
    where
        G: Fn(&[f64], f64) -> f64,
    {
        check_grid(basis, v)?;
        let values = v
            .values()
            .iter()
            .enumerate()
            .map(|(k, &y)| g(basis.node(k), y))
            .collect();
        Ok(v.with_values(values))
    }

    /// `f(x_k, v(x_k))`.
    pub fn eval_drift(&self, basis: &SpectralBasis, v: &Field) -> Result<Field> {
        self.pointwise(basis, v, |x, y| self.f(x, y))
    }

    /// `b(x_k, v(x_k))`; multiply by a noise increment to get `B(v) dW`.
    pub fn eval_diffusion_factor(&self, basis: &SpectralBasis, v: &Field) -> Result<Field> {
        self.pointwise(basis, v, |x, y| self.b(x, y))
    }

    /// `1/2 b_y(x_k, v_k) b(x_k, v_k) (dW_k^2 - quad_k)`: the iterated
    /// stochastic integral of one step in closed form.
    pub fn eval_milstein_correction(
        &self,
        basis: &SpectralBasis,
        v: &Field,
        dw: &Field,
        quad: &Field,
    ) -> Result<Field> {
        check_grid(basis, v)?;
        v.check_same_layout(dw)?;
        v.check_same_layout(quad)?;
        let values = v
            .values()
            .iter()
            .zip(dw.values())
            .zip(quad.values())
            .enumerate()
            .map(|(k, ((&y, &w), &q))| {
                let x = basis.node(k);
                0.5 * self.b_y(x, y) * self.b(x, y) * (w * w - q)
            })
            .collect();
        Ok(v.with_values(values))
    }
}

fn check_grid(basis: &SpectralBasis, v: &Field) -> Result<()> {
    v.expect(Representation::Grid)?;
    if v.dim() != basis.dim() || v.n() != basis.n() {
        return Err(Error::BasisMismatch {
            field_dim: v.dim(),
            field_n: v.n(),
            basis_dim: basis.dim(),
            basis_n: basis.n(),
        });
    }
    Ok(())
}
