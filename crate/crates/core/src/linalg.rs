//! Hermitian positive-definite solves and small matrix helpers.
//!
//! Matrices are stored as nalgebra `DMatrix`; the Cholesky factorization runs
//! in faer, single-threaded.

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Cholesky factor of a Hermitian positive-definite matrix.
///
/// If the plain factorization fails, the diagonal is loaded once with
/// `1e-12 * trace / n` before giving up. Only the lower triangle is read.
pub struct HermitianFactor {
    llt: Llt<Complex64>,
    pub jittered: bool,
}

pub const JITTER_SCALE: f64 = 1e-12;

fn to_faer(m: &DMatrix<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: &Mat<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

impl HermitianFactor {
    pub fn new(m: &DMatrix<Complex64>) -> Result<Self> {
        let mut a = to_faer(m);
        if let Ok(llt) = a.llt(Side::Lower) {
            return Ok(HermitianFactor { llt, jittered: false });
        }
        let n = m.nrows();
        let trace: f64 = (0..n).map(|i| m[(i, i)].re).sum();
        let jitter = JITTER_SCALE * trace / n as f64;
        for i in 0..n {
            a[(i, i)] += Complex64::new(jitter, 0.0);
        }
        a.llt(Side::Lower)
            .map(|llt| HermitianFactor { llt, jittered: true })
            .map_err(|_| {
                Error::Singular(format!(
                    "{n}x{n} Hermitian matrix is not positive definite even with jitter {jitter:e}"
                ))
            })
    }

    pub fn solve_vec(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let x = self.llt.solve(Mat::from_fn(b.len(), 1, |i, _| b[i]));
        DVector::from_fn(b.len(), |i, _| x[(i, 0)])
    }

    pub fn solve(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        from_faer(&self.llt.solve(to_faer(b)))
    }
}

/// Mirrors the strict lower triangle into the upper one and zeroes the
/// imaginary part of the diagonal, making `m` exactly Hermitian.
pub fn hermitize_from_lower(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for i in (j + 1)..n {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
}

pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> DVector<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues
}

pub fn max_abs_entry(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |m - m^H|` over all entries.
pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}
