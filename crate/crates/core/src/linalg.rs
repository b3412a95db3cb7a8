//! Small dense linear algebra on row-major `f64` buffers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

/// y += a * x
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Row-major `n x n` matrix times vector.
pub fn mat_vec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    a.chunks_exact(n).map(|row| dot(row, x)).collect()
}

/// Lower Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor a symmetric positive definite matrix given row-major.
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: a.len() });
        }
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (a[i * n + j] - a[j * n + i]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let djj = libm::sqrt(d);
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor(&self) -> &[f64] {
        &self.l
    }

    /// L z
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| dot(&self.l[i * n..i * n + i + 1], &z[..=i])).collect()
    }

    /// L^T x
    pub fn mul_upper(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let xi = x[i];
            for (o, lij) in out[..=i].iter_mut().zip(&self.l[i * n..i * n + i + 1]) {
                *o += lij * xi;
            }
        }
        out
    }

    /// Solve L y = b in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let s = b[i] - dot(&self.l[i * n..i * n + i], &b[..i]);
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solve L^T x = y in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// x^T A^{-1} x, via ||L^{-1} x||^2.
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        let mut y = x.to_vec();
        self.solve_lower_in_place(&mut y);
        dot(&y, &y)
    }

    /// log det A
    pub fn log_det(&self) -> f64 {
        let n = self.n;
        2.0 * (0..n).map(|i| libm::log(self.l[i * n + i])).sum::<f64>()
    }
}
