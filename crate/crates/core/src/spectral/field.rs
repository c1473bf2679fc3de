use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Which of the two dual representations a [`Field`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    /// Coefficients `c_i` in the Dirichlet eigenbasis, `i in {1..N}^d`.
    Spectral,
    /// Values at the interior collocation nodes `k / (N + 1)`, `k in {1..N}^d`.
    Grid,
}

impl Representation {
    fn tag(self) -> u8 {
        match self {
            Representation::Spectral => 0,
            Representation::Grid => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Representation::Spectral),
            1 => Ok(Representation::Grid),
            other => Err(Error::FieldFormat(format!(
                "unknown representation tag {other}"
            ))),
        }
    }

    pub(crate) fn name(self) -> &'static str {
        match self {
            Representation::Spectral => "spectral",
            Representation::Grid => "grid",
        }
    }
}

/// A real function on `(0,1)^d`, stored as `N^d` numbers in lexicographic
/// multi-index order (the last axis varies fastest).
///
/// Fields are immutable values; every operator returns a new field.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    dim: usize,
    n: usize,
    repr: Representation,
    values: Vec<f64>,
}

const MAGIC: &[u8; 4] = b"SPFD";

impl Field {
    pub fn new(dim: usize, n: usize, repr: Representation, values: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let expected = n.pow(dim as u32);
        if values.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            dim,
            n,
            repr,
            values,
        })
    }

    pub fn zeros(dim: usize, n: usize, repr: Representation) -> Self {
        Self {
            dim,
            n,
            repr,
            values: vec![0.0; n.pow(dim as u32)],
        }
    }

    pub fn spectral(dim: usize, n: usize, coefficients: Vec<f64>) -> Result<Self> {
        Self::new(dim, n, Representation::Spectral, coefficients)
    }

    pub fn grid(dim: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(dim, n, Representation::Grid, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Modes (or nodes) per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            dim: self.dim,
            n: self.n,
            repr: self.repr,
            values,
        }
    }

    pub(crate) fn expect(&self, repr: Representation) -> Result<()> {
        if self.repr == repr {
            Ok(())
        } else {
            Err(Error::WrongRepresentation {
                expected: repr.name(),
            })
        }
    }

    /// Coefficient at a 1-based multi-index; `None` when out of range.
    pub fn coefficient(&self, index: &[usize]) -> Option<f64> {
        if index.len() != self.dim || index.iter().any(|&i| i == 0 || i > self.n) {
            return None;
        }
        let flat = index.iter().fold(0, |acc, &i| acc * self.n + (i - 1));
        Some(self.values[flat])
    }

    /// Re-expresses a spectral field with `n_new` modes per axis, zero-padding
    /// new modes and dropping modes beyond `n_new`.
    pub fn resize_spectral(&self, n_new: usize) -> Result<Self> {
        self.expect(Representation::Spectral)?;
        let mut out = Field::zeros(self.dim, n_new, Representation::Spectral);
        let keep = self.n.min(n_new);
        match self.dim {
            1 => out.values[..keep].copy_from_slice(&self.values[..keep]),
            _ => {
                for r in 0..keep {
                    out.values[r * n_new..r * n_new + keep]
                        .copy_from_slice(&self.values[r * self.n..r * self.n + keep]);
                }
            }
        }
        Ok(out)
    }

    /// Pointwise sum of two fields with identical layout.
    pub fn add(&self, other: &Field) -> Result<Self> {
        self.check_same_layout(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.check_same_layout(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.with_values(self.values.iter().map(|v| v * factor).collect())
    }

    pub(crate) fn check_same_layout(&self, other: &Field) -> Result<()> {
        if self.dim != other.dim || self.n != other.n {
            return Err(Error::SizeMismatch {
                expected: self.values.len(),
                actual: other.values.len(),
            });
        }
        if self.repr != other.repr {
            return Err(Error::WrongRepresentation {
                expected: self.repr.name(),
            });
        }
        Ok(())
    }

    /// `sqrt(sum c_i^2)`, the `L^2` norm of a spectral field.
    pub fn spectral_norm(&self) -> Result<f64> {
        self.expect(Representation::Spectral)?;
        Ok(self.values.iter().map(|c| c * c).sum::<f64>().sqrt())
    }

    /// Discrete `L^2` norm of a grid field: root mean square over the
    /// `(N + 1)^d` cells with the boundary nodes extended by zero.
    pub fn grid_norm(&self) -> Result<f64> {
        self.expect(Representation::Grid)?;
        let cells = ((self.n + 1) as f64).powi(self.dim as i32);
        Ok((self.values.iter().map(|v| v * v).sum::<f64>() / cells).sqrt())
    }

    /// Serializes as: magic `SPFD`, `u32` d, `u32` N, `u8` representation tag
    /// (0 spectral, 1 grid), then `N^d` little-endian `f64` in lexicographic
    /// order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&[self.repr.tag()])?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::FieldFormat("bad magic".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let dim = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let n = u32::from_le_bytes(word) as usize;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let repr = Representation::from_tag(tag[0])?;
        if !(1..=2).contains(&dim) {
            return Err(Error::FieldFormat(format!("dimension {dim}")));
        }
        let len = n
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::FieldFormat("size overflow".into()))?;
        let mut values = Vec::with_capacity(len);
        let mut bytes = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut bytes)
                .map_err(|_| Error::FieldFormat("truncated payload".into()))?;
            values.push(f64::from_le_bytes(bytes));
        }
        Field::new(dim, n, repr, values)
    }
}
