use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// A set of sampled frequencies on an `n × n` grid.
///
/// Indices are column-major (`row + col * n`) in *centered* coordinates: the
/// zero frequency sits at `(n / 2, n / 2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyMask {
    n: usize,
    indices: Vec<usize>,
}

impl FrequencyMask {
    pub fn new(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&i| i >= n * n) {
            return Err(Error::IndexOutOfRange { index: bad, size: n * n });
        }
        Ok(Self { n, indices: set.into_iter().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn center(&self) -> usize {
        self.n / 2 + (self.n / 2) * self.n
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Fraction of the grid that is sampled.
    pub fn density(&self) -> f64 {
        self.len() as f64 / (self.n * self.n) as f64
    }

    /// Position of a centered index in the FFT-ordered grid.
    fn fft_position(&self, index: usize) -> usize {
        let n = self.n;
        let (row, col) = (index % n, index / n);
        let shift = |c: usize| (c + n - n / 2) % n;
        shift(row) + shift(col) * n
    }
}

/// Union of `n_lines` digital lines through the grid center at angles
/// `angle_offset + i π / n_lines`.
///
/// Each line is sampled at `n` unit-spaced points and every grid node that
/// receives nonzero bilinear-interpolation weight from a sample is marked.
/// Axis-aligned samples land exactly on nodes and mark a single node.
pub fn radial_sampling_mask(n: usize, n_lines: usize, angle_offset: f64) -> FrequencyMask {
    assert!(n >= 4, "radial mask needs n >= 4");
    assert!(n_lines >= 1, "radial mask needs at least one line");
    const SNAP: f64 = 1e-9;
    let c = (n / 2) as f64;
    let mut set = BTreeSet::new();
    set.insert(n / 2 + (n / 2) * n);
    let bracket = |v: f64| -> Vec<i64> {
        let (lo, hi) = ((v + SNAP).floor() as i64, (v - SNAP).ceil() as i64);
        if lo >= hi {
            vec![v.round() as i64]
        } else {
            vec![lo, hi]
        }
    };
    for i in 0..n_lines {
        let angle = angle_offset + i as f64 * PI / n_lines as f64;
        let (sin, cos) = angle.sin_cos();
        for j in 0..n {
            let t = j as f64 - c;
            let (row, col) = (c + t * sin, c + t * cos);
            for r in bracket(row) {
                for q in bracket(col) {
                    if (0..n as i64).contains(&r) && (0..n as i64).contains(&q) {
                        set.insert(r as usize + q as usize * n);
                    }
                }
            }
        }
    }
    FrequencyMask { n, indices: set.into_iter().collect() }
}

/// Unitary 2-D DFT of an `n × n` column-major image followed by frequency selection.
#[derive(Clone)]
pub struct SubsampledDft {
    mask: FrequencyMask,
    positions: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SubsampledDft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubsampledDft").field("n", &self.mask.n).field("samples", &self.mask.len()).finish()
    }
}

impl SubsampledDft {
    pub fn new(mask: FrequencyMask) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(mask.n);
        let inverse = planner.plan_fft_inverse(mask.n);
        let positions = mask.indices.iter().map(|&i| mask.fft_position(i)).collect();
        Self { mask, positions, forward, inverse }
    }

    pub fn mask(&self) -> &FrequencyMask {
        &self.mask
    }

    pub fn n(&self) -> usize {
        self.mask.n
    }

    pub fn rows(&self) -> usize {
        self.mask.len()
    }

    pub fn cols(&self) -> usize {
        self.mask.n * self.mask.n
    }

    fn fft2(&self, grid: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.mask.n;
        plan.process(grid);
        transpose_square(grid, n);
        plan.process(grid);
        transpose_square(grid, n);
        let scale = 1.0 / n as f64;
        grid.iter_mut().for_each(|v| *v *= scale);
    }

    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let mut grid: Vec<Complex64> = x.iter().copied().collect();
        self.fft2(&mut grid, &self.forward);
        DVector::from_iterator(self.rows(), self.positions.iter().map(|&p| grid[p]))
    }

    pub fn adjoint_apply(&self, y: &DVector<Complex64>) -> DVector<Complex64> {
        let mut grid = vec![Complex64::new(0.0, 0.0); self.cols()];
        for (&p, &v) in self.positions.iter().zip(y.iter()) {
            grid[p] = v;
        }
        self.fft2(&mut grid, &self.inverse);
        DVector::from_vec(grid)
    }

    pub fn apply_real(&self, x: &DVector<f64>) -> DVector<Complex64> {
        self.apply(&x.map(|v| Complex64::new(v, 0.0)))
    }

    /// `Re(Fᴴ Pᵀ P F x)` for a real image `x`.
    pub(crate) fn real_gram(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut grid: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut grid, &self.forward);
        let mut kept = vec![Complex64::new(0.0, 0.0); grid.len()];
        for &p in &self.positions {
            kept[p] = grid[p];
        }
        self.fft2(&mut kept, &self.inverse);
        DVector::from_iterator(kept.len(), kept.iter().map(|v| v.re))
    }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i + j * n, j + i * n);
        }
    }
}
