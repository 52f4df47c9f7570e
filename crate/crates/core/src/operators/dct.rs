use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Entry `(k, j)` of the orthonormal type-II DCT matrix of size `n`.
pub fn dct2_entry(n: usize, k: usize, j: usize) -> f64 {
    let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    scale * (PI * (2 * j + 1) as f64 * k as f64 / (2 * n) as f64).cos()
}

/// Orthonormal type-II DCT restricted to the rows in `omega` (`P_Ω A`).
#[derive(Clone, Debug)]
pub struct SubsampledDct {
    n: usize,
    omega: Vec<usize>,
    rows: DMatrix<f64>,
}

impl SubsampledDct {
    /// `omega` holds zero-based, duplicate-free row indices.
    pub fn new(n: usize, omega: &[usize]) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::DimensionMismatch("row selection must be nonempty".into()));
        }
        let mut seen = vec![false; n];
        for &k in omega {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, size: n });
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::Parse(format!("duplicate row index {k} in selection")));
            }
        }
        let rows = DMatrix::from_fn(omega.len(), n, |i, j| dct2_entry(n, omega[i], j));
        Ok(Self { n, omega: omega.to_vec(), rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub(crate) fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.rows * x
    }

    pub(crate) fn tr_mul_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        self.rows.tr_mul(y)
    }
}
