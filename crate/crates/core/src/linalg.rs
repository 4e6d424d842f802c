//! Jacobi-preconditioned conjugate gradients and small vector helpers.

use alloc::vec;
use alloc::vec::Vec;

use crate::fem::CsrMatrix;
use crate::{Error, Result};

/// Symmetric positive definite operator acting on flat vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y)
    }

    fn diagonal(&self) -> Vec<f64> {
        CsrMatrix::diagonal(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    /// Stop when `‖b - A x‖ ≤ tol ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { tol: 1e-8, max_iter: 1000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `y += alpha x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves `A x = b` starting from the content of `x`.
///
/// The preconditioner is the inverse of `A`'s diagonal. Iterates decrease the
/// quadratic `½xᵀAx - bᵀx` monotonically, so warm starts never increase it.
pub fn pcg<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &mut [f64], opts: CgOptions) -> Result<CgReport> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport { iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut residual = norm(&r) / b_norm;
    if residual <= opts.tol {
        return Ok(CgReport { iterations: 0, residual });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=opts.max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::InvalidInput("operator is not positive definite".into()));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        residual = norm(&r) / b_norm;
        if residual <= opts.tol {
            return Ok(CgReport { iterations: it, residual });
        }
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * di;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual })
}

/// Cholesky factor `A = L Lᵀ` of a symmetric positive definite banded matrix.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// Row `i` holds `L[i, i-bw..=i]`, left-padded with zeros.
    lower: Vec<f64>,
}

impl BandCholesky {
    /// Factors `a`, which must be symmetric with `a[i][j] = 0` for `|i-j| > bw`.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.rows();
        let bw = a.entries().map(|(r, c, _)| r.abs_diff(c)).max().unwrap_or(0);
        let w = bw + 1;
        let mut lower = vec![0.0; n * w];
        for (r, c, v) in a.entries() {
            if c <= r {
                lower[r * w + c + bw - r] = v;
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut sum = lower[i * w + j + bw - i];
                for k in jlo..j {
                    sum -= lower[i * w + k + bw - i] * lower[j * w + k + bw - j];
                }
                if j == i {
                    if !(sum > 0.0) {
                        return Err(Error::InvalidInput("matrix is not positive definite".into()));
                    }
                    lower[i * w + bw] = libm::sqrt(sum);
                } else {
                    lower[i * w + j + bw - i] = sum / lower[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, lower })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Overwrites `x` (holding `b`) with `A⁻¹ b`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let (bw, w) = (self.bw, self.bw + 1);
        for i in 0..self.n {
            let row = &self.lower[i * w..(i + 1) * w];
            let lo = i.saturating_sub(bw);
            let mut sum = x[i];
            for k in lo..i {
                sum -= row[k + bw - i] * x[k];
            }
            x[i] = sum / row[bw];
        }
        for i in (0..self.n).rev() {
            let hi = (i + bw).min(self.n - 1);
            let mut sum = x[i];
            for k in i + 1..=hi {
                sum -= self.lower[k * w + i + bw - k] * x[k];
            }
            x[i] = sum / self.lower[i * w + bw];
        }
    }
}
