//! Brute-force dense twins of the matrix-free operator, for small instances only.
//!
//! The lifted matrix has one row per interferometric sample, in the same `(pair, m)`
//! order as [`InterferometricData`](crate::forward::InterferometricData), and one column
//! per entry of the column-major vectorization of a `K × K` matrix `X` (`col = k + l·K`).
//! Row `(i<j, m)` holds `s·conj(L_i^m[k])·L_j^m[l]`, so that `F̄·vec(X) = s (L_i^m)^H X L_j^m`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::LiftedOperator;

/// Default cap on materialized lifted-matrix entries.
pub const DENSE_BUDGET: usize = 10_000_000;

/// Largest symmetric matrix [`dense_spectral`] accepts.
pub const MAX_SPECTRAL_DIM: usize = 64;

#[derive(Debug, Clone)]
pub struct DenseLiftedMatrix {
    pub matrix: DMatrix<Complex64>,
    pub pixels: usize,
}

impl DenseLiftedMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Materializes `F̄` from the operator's measurement vectors.
pub fn build_dense(op: &LiftedOperator<f64>, budget: usize) -> Result<DenseLiftedMatrix> {
    let k = op.pixels();
    let m_count = op.freqs();
    let n = op.receivers();
    let rows = op.data_len();
    let required = rows.saturating_mul(k * k);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let vectors = op.vectors();
    let s = op.scale();
    let mut matrix = DMatrix::<Complex64>::zeros(rows, k * k);
    let mut row = 0;
    for i in 0..n {
        for j in i + 1..n {
            for m in 0..m_count {
                for l in 0..k {
                    let lj = vectors.entry(j, m, l);
                    for kk in 0..k {
                        matrix[(row, kk + l * k)] = vectors.entry(i, m, kk).conj() * lj * s;
                    }
                }
                row += 1;
            }
        }
    }
    Ok(DenseLiftedMatrix { matrix, pixels: k })
}

fn vectorize(x: &DMatrix<f64>) -> DVector<Complex64> {
    DVector::from_iterator(x.len(), x.iter().map(|v| Complex64::new(*v, 0.0)))
}

/// `F̄·vec(X)`.
pub fn dense_forward(f: &DenseLiftedMatrix, x: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if x.nrows() != f.pixels || x.ncols() != f.pixels {
        return Err(Error::DimensionMismatch {
            context: "lifted matrix side",
            expected: f.pixels,
            got: x.nrows(),
        });
    }
    Ok((&f.matrix * vectorize(x)).iter().copied().collect())
}

/// `F̄^H e`, reshaped column-major to `K × K`.
pub fn dense_adjoint(f: &DenseLiftedMatrix, e: &[Complex64]) -> Result<DMatrix<Complex64>> {
    if e.len() != f.rows() {
        return Err(Error::DimensionMismatch {
            context: "interferometric data length",
            expected: f.rows(),
            got: e.len(),
        });
    }
    let v = f.matrix.adjoint() * DVector::from_column_slice(e);
    Ok(DMatrix::from_column_slice(f.pixels, f.pixels, v.as_slice()))
}

/// `P_S(Re{F̄^H e})`, the materialized backprojection.
pub fn dense_backprojection(f: &DenseLiftedMatrix, e: &[Complex64]) -> Result<DMatrix<f64>> {
    let re = dense_adjoint(f, e)?.map(|z| z.re);
    Ok((&re + re.transpose()) * 0.5)
}

/// Full eigendecomposition of a real symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub values: Vec<f64>,
    /// Column `r` is the unit eigenvector of `values[r]`.
    pub vectors: DMatrix<f64>,
}

pub fn dense_spectral(x: &DMatrix<f64>) -> Result<DenseSpectrum> {
    let k = x.nrows();
    if k != x.ncols() {
        return Err(Error::invalid("matrix", "must be square"));
    }
    if k > MAX_SPECTRAL_DIM {
        return Err(Error::BudgetExceeded {
            required: k,
            budget: MAX_SPECTRAL_DIM,
        });
    }
    let eig = SymmetricEigen::new(x.clone());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let values = order.iter().map(|&r| eig.eigenvalues[r]).collect();
    let mut vectors = DMatrix::zeros(k, k);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(DenseSpectrum { values, vectors })
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(f: &DenseLiftedMatrix, rel_tol: f64) -> usize {
    let sv = f.matrix.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > rel_tol * top).count()
}
