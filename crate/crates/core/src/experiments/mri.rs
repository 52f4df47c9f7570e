//! Coil-by-coil parallel MRI with radial k-space sampling.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::{fmt_f64, relative_error, rng_for, shepp_logan, Method, PriorDefaults};
use crate::error::{Error, Result};
use crate::inference::{least_squares_baseline, run};
use crate::io::{write_matrix, write_table};
use crate::model::{MmvProblem, SolverConfig};
use crate::operators::{gradient2d_operator, radial_sampling_mask, realify, subsampled_dft_operator, FrequencyMask, NoiseCovariance};

#[derive(Clone, Debug, Serialize)]
pub struct MriConfig {
    pub n: usize,
    pub coils: usize,
    /// Radial line counts to sweep.
    pub lines: Vec<usize>,
    pub sigma2: f64,
    pub seed: u64,
    pub prior: PriorDefaults,
    pub solver: SolverConfig,
    pub methods: Vec<Method>,
}

impl Default for MriConfig {
    fn default() -> Self {
        Self {
            n: 64,
            coils: 4,
            lines: vec![4, 8, 12, 16, 20],
            sigma2: 1e-3,
            seed: 0,
            prior: PriorDefaults::imaging(),
            solver: SolverConfig::default(),
            methods: Method::ALL.to_vec(),
        }
    }
}

impl MriConfig {
    /// The paper-size variant on a `256 × 256` grid.
    pub fn full_scale() -> Self {
        Self { n: 256, ..Self::default() }
    }
}

/// Error of one method at one line count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MriRow {
    pub method: Method,
    pub lines: usize,
    /// Relative error of the coil-averaged image.
    pub rel_error: f64,
    /// Relative error of every coil image.
    pub coil_errors: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MriReport {
    pub config: MriConfig,
    pub truth: DMatrix<f64>,
    pub rows: Vec<MriRow>,
    /// Coil-averaged image of every method at the largest line count.
    pub images: Vec<(Method, DMatrix<f64>)>,
    /// Coil masks at the largest line count.
    pub masks: Vec<FrequencyMask>,
}

impl MriReport {
    pub fn error(&self, method: Method, lines: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method && r.lines == lines).map(|r| r.rel_error)
    }

    /// Writes `mri_errors.csv` (`algorithm,lines,rel_error`), `mri_coil_errors.csv`,
    /// `mri_truth.csv`, `mri_image_<method>.csv` and `mri_mask_<coil>.csv` (0/1 images).
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> =
            self.rows.iter().map(|r| vec![r.method.name().to_string(), r.lines.to_string(), fmt_f64(r.rel_error)]).collect();
        write_table(dir.join("mri_errors.csv"), &["algorithm", "lines", "rel_error"], &rows)?;
        let mut rows = Vec::new();
        for r in &self.rows {
            for (c, e) in r.coil_errors.iter().enumerate() {
                rows.push(vec![r.method.name().to_string(), r.lines.to_string(), (c + 1).to_string(), fmt_f64(*e)]);
            }
        }
        write_table(dir.join("mri_coil_errors.csv"), &["algorithm", "lines", "coil", "rel_error"], &rows)?;
        write_matrix(dir.join("mri_truth.csv"), &self.truth)?;
        for (m, img) in &self.images {
            write_matrix(dir.join(format!("mri_image_{}.csv", m.name().to_ascii_lowercase())), img)?;
        }
        let n = self.config.n;
        for (c, mask) in self.masks.iter().enumerate() {
            let mut img = DMatrix::zeros(n, n);
            for &i in mask.indices() {
                img[(i % n, i / n)] = 1.0;
            }
            write_matrix(dir.join(format!("mri_mask_{}.csv", c + 1)), &img)?;
        }
        Ok(())
    }
}

/// Coil `l` uses angle offset `l π / (L · n_lines)`.
pub fn coil_masks(n: usize, coils: usize, n_lines: usize) -> Vec<FrequencyMask> {
    (0..coils)
        .map(|l| radial_sampling_mask(n, n_lines, l as f64 * PI / (coils * n_lines) as f64))
        .collect()
}

/// Realified noisy radial samples of the vectorized image `x` for every coil, with a
/// shared 2-D gradient sparsifier and isotropic noise attached.
pub fn mri_problem(cfg: &MriConfig, x: &DVector<f64>, masks: &[FrequencyMask], lines: usize) -> Result<MmvProblem> {
    let xc = x.map(|v| Complex64::new(v, 0.0));
    let noise = Normal::new(0.0, cfg.sigma2.sqrt()).map_err(|e| Error::NotApplicable(e.to_string()))?;
    let mut ops = Vec::with_capacity(masks.len());
    let mut data = Vec::with_capacity(masks.len());
    for (c, mask) in masks.iter().enumerate() {
        let f = subsampled_dft_operator(mask, cfg.n)?;
        let y = f.apply(&xc)?;
        let (fr, mut yr) = realify(&f, &y)?;
        let mut rng = rng_for(cfg.seed, &[lines as u64, c as u64]);
        yr.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        ops.push(fr);
        data.push(yr);
    }
    Ok(MmvProblem::new(ops, data, gradient2d_operator(cfg.n, cfg.n))
        .with_noise(vec![NoiseCovariance::Isotropic(cfg.sigma2); masks.len()]))
}

/// Recovers the phantom from every coil's noisy radial samples with each method and
/// reports the error of the coil-averaged image.
pub fn run_parallel_mri(cfg: &MriConfig) -> Result<MriReport> {
    if cfg.coils == 0 || cfg.lines.is_empty() {
        return Err(Error::NotApplicable("need at least one coil and one line count".into()));
    }
    let truth = shepp_logan(cfg.n)?;
    let x = DVector::from_column_slice(truth.as_slice());
    let max_lines = *cfg.lines.iter().max().unwrap_or(&0);

    let mut rows = Vec::new();
    let mut images = Vec::new();
    let mut masks_out = Vec::new();
    for &lines in &cfg.lines {
        let masks = coil_masks(cfg.n, cfg.coils, lines);
        let problem = mri_problem(cfg, &x, &masks, lines)?;
        let r = &problem.sparsifier;
        let white = problem.whitened()?;

        for &method in &cfg.methods {
            let coil_images = match method {
                Method::LeastSquares => least_squares_baseline(&white, &cfg.solver)?,
                Method::Bayes(spec) => run(&white, &cfg.prior.hyper(spec, r.rows())?, &cfg.solver)?.x_hat,
            };
            let avg = coil_images.iter().fold(DVector::zeros(x.len()), |acc, c| acc + c) / cfg.coils as f64;
            let coil_errors = coil_images.iter().map(|c| relative_error(&x, c)).collect::<Result<Vec<_>>>()?;
            rows.push(MriRow { method, lines, rel_error: relative_error(&x, &avg)?, coil_errors });
            if lines == max_lines {
                images.push((method, DMatrix::from_column_slice(cfg.n, cfg.n, avg.as_slice())));
            }
        }
        if lines == max_lines {
            masks_out = masks;
        }
    }
    Ok(MriReport { config: cfg.clone(), truth, rows, images, masks: masks_out })
}
