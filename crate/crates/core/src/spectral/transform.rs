//! Sine and cosine synthesis sums on the interior Dirichlet grid.
//!
//! Both transforms compute, for `k = 1..=N`,
//!
//! ```text
//! S(a)_k = sum_{n=1}^{N} a_n sin(pi n k / (N + 1))
//! C(a)_k = sum_{n=1}^{N} a_n cos(pi n k / (N + 1))
//! ```
//!
//! `S` is the unnormalised DST-I; it is its own inverse up to the factor
//! `2 / (N + 1)`. The fast path zero-pads `a` into a complex buffer of length
//! `2 (N + 1)` and runs one inverse FFT: the real part of the result is `C(a)`,
//! the imaginary part is `S(a)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Which algorithm backs the per-axis sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TransformKind {
    /// Dense `N x N` table product, `O(N^2)` per axis.
    Naive,
    /// FFT of length `2 (N + 1)`, `O(N log N)` per axis.
    #[default]
    Fast,
}

#[derive(Clone)]
pub(crate) struct TrigPlan {
    n: usize,
    kind: TransformKind,
    fft: Arc<dyn Fft<f64>>,
    // sin(pi n k / (N + 1)) at [(k - 1) * N + (n - 1)]
    sin_table: Vec<f64>,
    cos_table: Vec<f64>,
}

impl fmt::Debug for TrigPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrigPlan")
            .field("n", &self.n)
            .field("kind", &self.kind)
            .finish()
    }
}

impl TrigPlan {
    pub(crate) fn new(n: usize, kind: TransformKind) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(2 * (n + 1));
        let (sin_table, cos_table) = if kind == TransformKind::Naive {
            let mut s = Vec::with_capacity(n * n);
            let mut c = Vec::with_capacity(n * n);
            for k in 1..=n {
                for m in 1..=n {
                    let arg = PI * (m * k) as f64 / (n + 1) as f64;
                    s.push(arg.sin());
                    c.push(arg.cos());
                }
            }
            (s, c)
        } else {
            (Vec::new(), Vec::new())
        };
        Self {
            n,
            kind,
            fft,
            sin_table,
            cos_table,
        }
    }

    pub(crate) fn kind(&self) -> TransformKind {
        self.kind
    }

    pub(crate) fn scratch(&self) -> Vec<Complex<f64>> {
        vec![Complex::new(0.0, 0.0); 2 * (self.n + 1)]
    }

    fn fft_sums(&self, input: &[f64], buf: &mut [Complex<f64>]) {
        let n = self.n;
        buf.fill(Complex::new(0.0, 0.0));
        for (slot, &a) in buf[1..=n].iter_mut().zip(input) {
            slot.re = a;
        }
        self.fft.process(buf);
    }

    /// `out_k = sum_n input_n sin(pi n k / (N + 1))`.
    pub(crate) fn sine_sum(&self, input: &[f64], out: &mut [f64], buf: &mut [Complex<f64>]) {
        debug_assert_eq!(input.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        match self.kind {
            TransformKind::Naive => table_product(&self.sin_table, self.n, input, out),
            TransformKind::Fast => {
                self.fft_sums(input, buf);
                for (o, z) in out.iter_mut().zip(&buf[1..=self.n]) {
                    *o = z.im;
                }
            }
        }
    }

    /// `out_k = sum_n input_n cos(pi n k / (N + 1))`.
    pub(crate) fn cosine_sum(&self, input: &[f64], out: &mut [f64], buf: &mut [Complex<f64>]) {
        debug_assert_eq!(input.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        match self.kind {
            TransformKind::Naive => table_product(&self.cos_table, self.n, input, out),
            TransformKind::Fast => {
                self.fft_sums(input, buf);
                for (o, z) in out.iter_mut().zip(&buf[1..=self.n]) {
                    *o = z.re;
                }
            }
        }
    }

    /// Applies [`Self::sine_sum`] along every axis of a `d`-dimensional
    /// lexicographically stored array, in place.
    pub(crate) fn sine_sum_separable(&self, dim: usize, data: &mut [f64]) {
        let n = self.n;
        let mut buf = self.scratch();
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        match dim {
            1 => {
                line.copy_from_slice(data);
                self.sine_sum(&line, data, &mut buf);
            }
            2 => {
                // last axis: contiguous rows
                for row in data.chunks_exact_mut(n) {
                    line.copy_from_slice(row);
                    self.sine_sum(&line, row, &mut buf);
                }
                // first axis: strided columns
                for col in 0..n {
                    for (r, l) in line.iter_mut().enumerate() {
                        *l = data[r * n + col];
                    }
                    self.sine_sum(&line, &mut out, &mut buf);
                    for (r, o) in out.iter().enumerate() {
                        data[r * n + col] = *o;
                    }
                }
            }
            _ => unreachable!("dimension validated by SpectralBasis"),
        }
    }
}

fn table_product(table: &[f64], n: usize, input: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(table.chunks_exact(n)) {
        *o = row.iter().zip(input).map(|(t, a)| t * a).sum();
    }
}
