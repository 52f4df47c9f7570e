//! Gaussian conditional posterior of each parameter vector given `θ`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Variant;
use crate::objective::{check_positive, prior_weights};
use crate::operators::LinearMap;
use crate::quad::numerically_singular;

/// Samples drawn per independent random stream.
const BLOCK: usize = 4096;

/// `N(mean, precision⁻¹)`.
#[derive(Clone, Debug)]
pub struct ConditionalPosterior {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl ConditionalPosterior {
    pub fn from_precision(mean: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        if precision.nrows() != mean.len() || precision.ncols() != mean.len() {
            return Err(Error::DimensionMismatch("mean and precision disagree".into()));
        }
        let chol = Cholesky::new(precision.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { mean, precision, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `Γ = precision⁻¹`.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = precision`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// Precision `FᵀF + RᵀWR` and mean `precision⁻¹ Fᵀy`, with `W = D_θ⁻¹` (IAS) or `D_θ` (GSBL).
pub fn conditional_posterior(
    forward: &LinearMap,
    y: &DVector<f64>,
    sparsifier: &LinearMap,
    theta: &DVector<f64>,
    variant: Variant,
) -> Result<ConditionalPosterior> {
    if forward.cols() != sparsifier.cols() || y.len() != forward.rows() || theta.len() != sparsifier.rows() {
        return Err(Error::DimensionMismatch("posterior operators, data and theta disagree".into()));
    }
    check_positive(theta)?;
    let precision = forward.gram() + sparsifier.weighted_gram(&prior_weights(variant, theta));
    let chol = Cholesky::new(precision.clone()).ok_or(Error::NotPositiveDefinite)?;
    if numerically_singular(&precision, &chol) {
        return Err(Error::NotPositiveDefinite);
    }
    let mean = chol.solve(&forward.tr_mul(y));
    Ok(ConditionalPosterior { mean, precision, chol })
}

/// `n_samples × N` matrix of draws `μ + L⁻ᵀξ`, `ξ ~ N(0, I)`.
///
/// Block `b` of [`BLOCK`] rows uses stream `b` of a ChaCha generator seeded with `seed`,
/// so the output does not depend on the number of worker threads.
pub fn sample_posterior(post: &ConditionalPosterior, n_samples: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n_samples == 0 {
        return Err(Error::NotApplicable("at least one sample is required".into()));
    }
    let n = post.dim();
    let lt = post.chol.l().transpose();
    let n_blocks = n_samples.div_ceil(BLOCK);
    let blocks: Vec<DMatrix<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let rows = BLOCK.min(n_samples - b * BLOCK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut xi = DMatrix::<f64>::zeros(n, rows);
            for v in xi.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let mut z = lt.solve_upper_triangular(&xi).expect("Cholesky factor has a positive diagonal");
            for mut col in z.column_iter_mut() {
                col += &post.mean;
            }
            z
        })
        .collect();
    let mut out = DMatrix::zeros(n_samples, n);
    for (b, block) in blocks.iter().enumerate() {
        out.rows_mut(b * BLOCK, block.ncols()).copy_from(&block.transpose());
    }
    Ok(out)
}

/// Empirical quantile with linear interpolation between order statistics of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-column `((1 − level)/2, (1 + level)/2)` empirical quantiles of a `samples × N` matrix.
pub fn credible_intervals(samples: &DMatrix<f64>, level: f64) -> Result<Vec<(f64, f64)>> {
    if samples.nrows() == 0 {
        return Err(Error::NotApplicable("no samples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::NotApplicable(format!("credible level {level} is not in (0, 1)")));
    }
    let (plo, phi) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    Ok(samples
        .column_iter()
        .map(|c| {
            let mut v: Vec<f64> = c.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            (quantile_sorted(&v, plo), quantile_sorted(&v, phi))
        })
        .collect())
}
