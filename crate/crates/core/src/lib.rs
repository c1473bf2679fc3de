//! Spectral Galerkin integrators for semilinear parabolic SPDEs
//!
//! ```text
//! dX = (A X + F(X)) dt + B(X) dW,   X(0) = xi
//! ```
//!
//! on `(0,1)^d`, `d` in {1, 2}, with `A = kappa * Laplacian` (Dirichlet),
//! Nemytskii `F` and `B`, and a trace-class Q-Wiener process `W`.
//! Space is discretized by the first `N^d` sine modes, noise by `K^d`
//! modes, time by `M` uniform steps.
//!
//! The [`harness`] module runs strong-convergence experiments against a
//! fine Milstein reference built from the same Brownian path.

pub mod coefficients;
pub mod error;
pub mod harness;
pub mod noise;
pub mod problems;
pub mod schemes;
pub mod spectral;

pub use coefficients::NemytskiiPair;
pub use error::{Error, Result};
pub use noise::{count_random_variables, EigenFamily, EigenvalueRule, MasterPath, QWienerSpec};
pub use problems::{preset, ProblemSpec};
pub use schemes::{run_scheme, SchemeConfig, SchemeKind, Stepper};
pub use spectral::{Field, Representation, SpectralBasis};
