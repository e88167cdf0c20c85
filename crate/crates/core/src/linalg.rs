//! Small dense linear-algebra helpers shared by the network model and the solvers.

use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Pivot tolerance used by the positive-definiteness test.
pub const PD_PIVOT_TOL: f64 = 1e-10;

/// Dense complex matrix (impedances, admittances, lifted blocks).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(pub DMatrix<Complex64>);

impl Deref for ComplexMatrix {
    type Target = DMatrix<Complex64>;
    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl DerefMut for ComplexMatrix {
    fn deref_mut(&mut self) -> &mut Self::Target {
        &mut self.0
    }
}

impl ComplexMatrix {
    pub fn from_parts(re: &DMatrix<f64>, im: &DMatrix<f64>) -> Self {
        assert_eq!(re.shape(), im.shape());
        ComplexMatrix(DMatrix::from_fn(re.nrows(), re.ncols(), |r, c| Complex64::new(re[(r, c)], im[(r, c)])))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[Complex64]) -> Self {
        ComplexMatrix(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix(DMatrix::identity(n, n))
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && (0..self.nrows()).all(|r| (0..r).all(|c| (self[(r, c)] - self[(c, r)]).norm() <= tol))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.nrows()).all(|r| (0..=r).all(|c| (self[(r, c)] - self[(c, r)].conj()).norm() <= tol))
    }

    /// Hermitian positive definiteness via Cholesky with a pivot floor of `tol`.
    pub fn is_positive_definite(&self, tol: f64) -> bool {
        self.is_hermitian(tol.max(1e-12)) && cholesky_complex(&self.0, tol).is_some()
    }

    pub fn inverse(&self) -> Result<ComplexMatrix> {
        if !self.is_square() {
            return Err(Error::Contract("inverse of a non-square matrix".into()));
        }
        self.0
            .clone()
            .try_inverse()
            .map(ComplexMatrix)
            .ok_or_else(|| Error::Singular("matrix is not invertible".into()))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.row_iter().map(|row| row.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn re(&self) -> DMatrix<f64> {
        self.map(|v| v.re)
    }

    pub fn im(&self) -> DMatrix<f64> {
        self.map(|v| v.im)
    }
}

/// Lower-triangular Cholesky factor of a Hermitian matrix, `None` when a pivot falls below `tol`.
pub fn cholesky_complex(a: &DMatrix<Complex64>, tol: f64) -> Option<DMatrix<Complex64>> {
    let n = a.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > tol) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

pub fn is_symmetric_real(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (0..m.nrows()).all(|r| (0..r).all(|c| (m[(r, c)] - m[(c, r)]).abs() <= tol))
}

pub fn is_positive_definite_real(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && cholesky_complex(&m.map(|v| Complex64::new(v, 0.0)), tol).is_some()
}

/// Symmetric real matrix from its packed "svec" form (off-diagonals scaled by sqrt 2,
/// lower triangle stored column by column).
pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for c in 0..n {
        for r in c..n {
            if r == c {
                m[(r, c)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(r, c)] = x;
                m[(c, r)] = x;
            }
            k += 1;
        }
    }
    m
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for c in 0..n {
        for r in c..n {
            if r == c {
                v.push(m[(r, c)]);
            } else {
                v.push(0.5 * (m[(r, c)] + m[(c, r)]) * std::f64::consts::SQRT_2);
            }
        }
    }
    v
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(r, c)` (any order) in the svec layout.
pub fn svec_index(n: usize, r: usize, c: usize) -> usize {
    let (r, c) = if r >= c { (r, c) } else { (c, r) };
    // columns 0..c hold n, n-1, ..., n-c+1 entries
    c * n - c * c.saturating_sub(1) / 2 + (r - c)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Indices of a maximal set of linearly independent rows, chosen greedily in order.
pub fn independent_rows(a: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for i in 0..a.nrows() {
        let row = a.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut r = row.clone();
        for _ in 0..2 {
            for q in &basis {
                r -= q * q.dot(&r);
            }
        }
        let rn = r.norm();
        if rn > 1e-10 * norm {
            basis.push(r / rn);
            keep.push(i);
        }
    }
    keep
}
