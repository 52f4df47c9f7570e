//! Linear maps used as forward and sparsifying operators.
//!
//! [`LinearMap`] unifies dense matrices, sparse stencils and transform-based
//! operators behind one `apply` / `adjoint_apply` interface. Correctness is
//! always defined by the dense matrix the map represents; [`LinearMap::to_dense`]
//! materializes it.

mod dct;
mod dft;
mod sparse;

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use dct::{dct2_entry, SubsampledDct};
pub use dft::{radial_sampling_mask, FrequencyMask, SubsampledDft};
pub use sparse::SparseMatrix;

/// A real linear map `ℝ^cols → ℝ^rows`.
#[derive(Clone, Debug)]
pub enum LinearMap {
    Dense(DMatrix<f64>),
    Sparse(SparseMatrix),
    /// Row-subsampled orthonormal DCT.
    Dct(SubsampledDct),
    /// `[Re(F); Im(F)]` of a complex map acting on real vectors.
    Realified(ComplexLinearMap),
    /// `factor · inner`.
    Scaled(f64, Box<LinearMap>),
}

/// A complex linear map acting on complex vectors.
#[derive(Clone, Debug)]
pub enum ComplexLinearMap {
    Dense(DMatrix<Complex64>),
    Dft(SubsampledDft),
}

impl ComplexLinearMap {
    pub fn rows(&self) -> usize {
        match self {
            Self::Dense(m) => m.nrows(),
            Self::Dft(d) => d.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Self::Dense(m) => m.ncols(),
            Self::Dft(d) => d.cols(),
        }
    }

    pub fn apply(&self, x: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        check_len("complex apply", x.len(), self.cols())?;
        Ok(match self {
            Self::Dense(m) => m * x,
            Self::Dft(d) => d.apply(x),
        })
    }

    pub fn adjoint_apply(&self, y: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        check_len("complex adjoint", y.len(), self.rows())?;
        Ok(match self {
            Self::Dense(m) => m.ad_mul(y),
            Self::Dft(d) => d.adjoint_apply(y),
        })
    }

    fn apply_real(&self, x: &DVector<f64>) -> DVector<Complex64> {
        match self {
            Self::Dense(m) => m * x.map(|v| Complex64::new(v, 0.0)),
            Self::Dft(d) => d.apply_real(x),
        }
    }

    fn adjoint_real(&self, y: &DVector<f64>) -> DVector<f64> {
        let m = self.rows();
        let z = DVector::from_fn(m, |i, _| Complex64::new(y[i], y[i + m]));
        let back = match self {
            Self::Dense(d) => d.ad_mul(&z),
            Self::Dft(d) => d.adjoint_apply(&z),
        };
        back.map(|v| v.re)
    }
}

fn check_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch(format!("{what}: vector has length {got}, operator expects {expected}")));
    }
    Ok(())
}

impl LinearMap {
    pub fn identity(n: usize) -> Self {
        Self::Sparse(SparseMatrix::identity(n))
    }

    pub fn rows(&self) -> usize {
        match self {
            Self::Dense(m) => m.nrows(),
            Self::Sparse(s) => s.rows(),
            Self::Dct(d) => d.omega().len(),
            Self::Realified(c) => 2 * c.rows(),
            Self::Scaled(_, inner) => inner.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Self::Dense(m) => m.ncols(),
            Self::Sparse(s) => s.cols(),
            Self::Dct(d) => d.n(),
            Self::Realified(c) => c.cols(),
            Self::Scaled(_, inner) => inner.cols(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("apply", x.len(), self.cols())?;
        Ok(self.mul(x))
    }

    pub fn adjoint_apply(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("adjoint_apply", y.len(), self.rows())?;
        Ok(self.tr_mul(y))
    }

    /// Unchecked product; callers guarantee `x.len() == self.cols()`.
    pub(crate) fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.cols());
        match self {
            Self::Dense(m) => m * x,
            Self::Sparse(s) => s.mul_vec(x),
            Self::Dct(d) => d.mul_vec(x),
            Self::Realified(c) => {
                let z = c.apply_real(x);
                let m = z.len();
                DVector::from_fn(2 * m, |i, _| if i < m { z[i].re } else { z[i - m].im })
            }
            Self::Scaled(f, inner) => inner.mul(x) * *f,
        }
    }

    /// Unchecked transpose product; callers guarantee `y.len() == self.rows()`.
    pub(crate) fn tr_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(y.len(), self.rows());
        match self {
            Self::Dense(m) => m.tr_mul(y),
            Self::Sparse(s) => s.tr_mul_vec(y),
            Self::Dct(d) => d.tr_mul_vec(y),
            Self::Realified(c) => c.adjoint_real(y),
            Self::Scaled(f, inner) => inner.tr_mul(y) * *f,
        }
    }

    /// `AᵀA x`.
    pub(crate) fn gram_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Realified(ComplexLinearMap::Dft(d)) => d.real_gram(x),
            Self::Scaled(f, inner) => inner.gram_mul(x) * (f * f),
            _ => self.tr_mul(&self.mul(x)),
        }
    }

    /// Materializes the map as a dense matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Dense(m) => m.clone(),
            Self::Sparse(s) => s.to_dense(),
            Self::Dct(d) => d.matrix().clone(),
            Self::Scaled(f, inner) => inner.to_dense() * *f,
            Self::Realified(_) => {
                let n = self.cols();
                let mut out = DMatrix::zeros(self.rows(), n);
                let mut e = DVector::zeros(n);
                for j in 0..n {
                    e[j] = 1.0;
                    out.set_column(j, &self.mul(&e));
                    e[j] = 0.0;
                }
                out
            }
        }
    }

    /// Dense `AᵀA`.
    pub fn gram(&self) -> DMatrix<f64> {
        match self {
            Self::Sparse(s) => s.weighted_gram(&DVector::from_element(s.rows(), 1.0)),
            _ => {
                let d = self.to_dense();
                d.tr_mul(&d)
            }
        }
    }

    /// Dense `Aᵀ diag(w) A`.
    pub fn weighted_gram(&self, w: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Self::Sparse(s) => s.weighted_gram(w),
            _ => {
                let d = self.to_dense();
                let mut scaled = d.clone();
                for (mut row, &wk) in scaled.row_iter_mut().zip(w.iter()) {
                    row *= wk;
                }
                d.tr_mul(&scaled)
            }
        }
    }

    /// Diagonal of `Aᵀ diag(w) A`.
    pub fn weighted_diag(&self, w: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Sparse(s) => s.weighted_diag(w),
            Self::Scaled(f, inner) => inner.weighted_diag(w) * (f * f),
            _ => {
                let d = self.to_dense();
                DVector::from_fn(d.ncols(), |j, _| d.column(j).iter().zip(w.iter()).map(|(v, wk)| wk * v * v).sum())
            }
        }
    }

    /// Diagonal of `AᵀA` (squared column norms).
    pub fn column_sq_norms(&self) -> DVector<f64> {
        match self {
            Self::Sparse(s) => s.weighted_diag(&DVector::from_element(s.rows(), 1.0)),
            Self::Scaled(f, inner) => inner.column_sq_norms() * (f * f),
            Self::Realified(ComplexLinearMap::Dft(d)) => {
                // ‖column j‖² = Σ_m |F_mj|² and every unitary-DFT entry has modulus 1/n.
                DVector::from_element(d.cols(), d.rows() as f64 / (d.n() * d.n()) as f64)
            }
            _ => {
                let d = self.to_dense();
                DVector::from_fn(d.ncols(), |j, _| d.column(j).norm_squared())
            }
        }
    }
}

/// Midpoint-quadrature discretization of convolution with the kernel
/// `k(s) = exp(-s² / (2γ²)) / (2πγ²)` on `n` equispaced points of `[0, 1]`.
pub fn gaussian_blur_operator(n: usize, gamma: f64) -> LinearMap {
    assert!(n >= 2 && gamma > 0.0);
    let h = 1.0 / n as f64;
    let kernel = |s: f64| (-(s * s) / (2.0 * gamma * gamma)).exp() / (2.0 * PI * gamma * gamma);
    LinearMap::Dense(DMatrix::from_fn(n, n, |i, j| h * kernel(h * (i as f64 - j as f64))))
}

/// First differences: row `k` maps `x` to `x[k+1] - x[k]`.
pub fn difference_operator(n: usize) -> LinearMap {
    assert!(n >= 2);
    let triplets = (0..n - 1).flat_map(|k| [(k, k, -1.0), (k, k + 1, 1.0)]).collect();
    LinearMap::Sparse(SparseMatrix::from_triplets(n - 1, n, triplets))
}

/// Anisotropic first-order gradient of an `nx × ny` image vectorized column-major
/// (pixel `(i, j)` at `i + j * nx`).
///
/// Rows `0..(nx-1)*ny` hold the differences along each column (`x[i+1,j] - x[i,j]`),
/// the remaining rows the differences along each row (`x[i,j+1] - x[i,j]`).
pub fn gradient2d_operator(nx: usize, ny: usize) -> LinearMap {
    assert!(nx >= 2 && ny >= 2);
    let pix = |i: usize, j: usize| i + j * nx;
    let mut triplets = Vec::with_capacity(4 * nx * ny);
    let mut row = 0;
    for j in 0..ny {
        for i in 0..nx - 1 {
            triplets.push((row, pix(i, j), -1.0));
            triplets.push((row, pix(i + 1, j), 1.0));
            row += 1;
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            triplets.push((row, pix(i, j), -1.0));
            triplets.push((row, pix(i, j + 1), 1.0));
            row += 1;
        }
    }
    LinearMap::Sparse(SparseMatrix::from_triplets(row, nx * ny, triplets))
}

/// `P_Ω A` with `A` the orthonormal type-II DCT; `omega` is zero-based.
pub fn subsampled_dct_operator(n: usize, omega: &[usize]) -> Result<LinearMap> {
    Ok(LinearMap::Dct(SubsampledDct::new(n, omega)?))
}

/// Unitary 2-D DFT followed by selection of the frequencies in `mask`.
pub fn subsampled_dft_operator(mask: &FrequencyMask, n: usize) -> Result<ComplexLinearMap> {
    if mask.n() != n {
        return Err(Error::DimensionMismatch(format!("mask built for {0}x{0} grid, operator is {n}x{n}", mask.n())));
    }
    Ok(ComplexLinearMap::Dft(SubsampledDft::new(mask.clone())))
}

/// Equivalent real system `[Re(F); Im(F)] x = [Re(y); Im(y)]` for a complex map on real inputs.
pub fn realify(map: &ComplexLinearMap, y: &DVector<Complex64>) -> Result<(LinearMap, DVector<f64>)> {
    check_len("realify", y.len(), map.rows())?;
    let m = y.len();
    let stacked = DVector::from_fn(2 * m, |i, _| if i < m { y[i].re } else { y[i - m].im });
    Ok((LinearMap::Realified(map.clone()), stacked))
}

/// Noise covariance of one measurement vector.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseCovariance {
    /// `σ² I`.
    Isotropic(f64),
    /// General symmetric positive-definite matrix.
    Full(DMatrix<f64>),
}

/// Returns `(C⁻¹F, C⁻¹y)` where `C Cᵀ = cov` is the Cholesky factorization.
pub fn whiten(map: &LinearMap, y: &DVector<f64>, cov: &NoiseCovariance) -> Result<(LinearMap, DVector<f64>)> {
    check_len("whiten", y.len(), map.rows())?;
    match cov {
        NoiseCovariance::Isotropic(var) => {
            if !(*var > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            if *var == 1.0 {
                return Ok((map.clone(), y.clone()));
            }
            let s = 1.0 / var.sqrt();
            let scaled = match map {
                LinearMap::Dense(m) => LinearMap::Dense(m * s),
                LinearMap::Scaled(f, inner) => LinearMap::Scaled(f * s, inner.clone()),
                other => LinearMap::Scaled(s, Box::new(other.clone())),
            };
            Ok((scaled, y * s))
        }
        NoiseCovariance::Full(c) => {
            let m = map.rows();
            if c.nrows() != m || c.ncols() != m {
                return Err(Error::DimensionMismatch(format!(
                    "noise covariance is {}x{}, measurements have length {m}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if *c == DMatrix::identity(m, m) {
                return Ok((map.clone(), y.clone()));
            }
            let chol = Cholesky::new(c.clone()).ok_or(Error::NotPositiveDefinite)?;
            let l = chol.l();
            let f = l.solve_lower_triangular(&map.to_dense()).ok_or(Error::NotPositiveDefinite)?;
            let wy = l.solve_lower_triangular(y).ok_or(Error::NotPositiveDefinite)?;
            Ok((LinearMap::Dense(f), wy))
        }
    }
}
