//! Jointly sparse recovery from subsampled DCT data: average error, empirical success
//! probability and phase-transition grids.

use std::path::Path;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{derive_seed, empirical_success_probability, fmt_f64, normalized_error, PriorDefaults, TrialOutcome};
use crate::error::{Error, Result};
use crate::inference::{run, AlgorithmSpec};
use crate::io::write_table;
use crate::model::{MmvProblem, SolverConfig};
use crate::operators::{subsampled_dct_operator, LinearMap, NoiseCovariance};

/// One random instance.
#[derive(Clone, Debug)]
pub struct SparseTrial {
    pub problem: MmvProblem,
    pub truth: Vec<DVector<f64>>,
    /// Common support, ascending.
    pub support: Vec<usize>,
    /// Selected DCT rows, ascending.
    pub omega: Vec<usize>,
}

/// `L` signals with a common random support of size `s` and standard normal nonzeros,
/// observed through the same `M` random rows of the orthonormal DCT with `N(0, σ²)` noise.
pub fn generate_sparse_trial(n: usize, m: usize, s: usize, l: usize, sigma2: f64, seed: u64) -> Result<SparseTrial> {
    if s > n || m > n || m == 0 || l == 0 {
        return Err(Error::NotApplicable(format!("need s ≤ N, 1 ≤ M ≤ N, L ≥ 1 (N = {n}, M = {m}, s = {s}, L = {l})")));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::NotApplicable(format!("noise variance {sigma2} is negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut support = sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let truth: Vec<DVector<f64>> = (0..l)
        .map(|_| {
            let mut x = DVector::zeros(n);
            for &i in &support {
                x[i] = StandardNormal.sample(&mut rng);
            }
            x
        })
        .collect();
    let mut omega = sample(&mut rng, n, m).into_vec();
    omega.sort_unstable();
    let f = subsampled_dct_operator(n, &omega)?;
    let noise = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::NotApplicable(e.to_string()))?;
    let measurements = truth.iter().map(|x| f.mul(x) + DVector::from_fn(m, |_, _| noise.sample(&mut rng))).collect();
    let mut problem = MmvProblem::new(vec![f; l], measurements, LinearMap::identity(n));
    if sigma2 > 0.0 {
        problem = problem.with_noise(vec![NoiseCovariance::Isotropic(sigma2); l]);
    }
    Ok(SparseTrial { problem, truth, support, omega })
}

fn run_trial(trial: &SparseTrial, algorithms: &[AlgorithmSpec], prior: &PriorDefaults, solver: &SolverConfig) -> Result<Vec<f64>> {
    let k = trial.problem.sparse_dim();
    algorithms
        .iter()
        .map(|&spec| {
            let res = run(&trial.problem, &prior.hyper(spec, k)?, solver)?;
            normalized_error(&trial.truth, &res.x_hat)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SuccessConfig {
    pub n: usize,
    pub s: usize,
    pub trials: usize,
    pub sigma2: f64,
    pub eps_tol: f64,
    pub m_grid: Vec<usize>,
    pub l_values: Vec<usize>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub seed: u64,
    pub prior: PriorDefaults,
    pub solver: SolverConfig,
}

impl Default for SuccessConfig {
    fn default() -> Self {
        Self {
            n: 100,
            s: 20,
            trials: 10,
            sigma2: 1e-6,
            eps_tol: 1e-2,
            m_grid: (1..=10).map(|i| 10 * i).collect(),
            l_values: vec![4, 8, 16],
            algorithms: AlgorithmSpec::ALL.to_vec(),
            seed: 0,
            prior: PriorDefaults::signals(),
            solver: SolverConfig::default(),
        }
    }
}

/// Aggregate for one `(algorithm, L, M)` condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuccessRow {
    pub algorithm: AlgorithmSpec,
    pub l: usize,
    pub m: usize,
    pub avg_error: f64,
    pub esp: f64,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Clone, Debug)]
pub struct SuccessReport {
    pub config: SuccessConfig,
    pub rows: Vec<SuccessRow>,
}

impl SuccessReport {
    pub fn row(&self, spec: AlgorithmSpec, l: usize, m: usize) -> Option<&SuccessRow> {
        self.rows.iter().find(|r| r.algorithm == spec && r.l == l && r.m == m)
    }

    /// Smallest `M` on the grid at which `spec` reaches ESP = 1 for the given `L`.
    pub fn min_m_full_success(&self, spec: AlgorithmSpec, l: usize) -> Option<usize> {
        self.rows.iter().filter(|r| r.algorithm == spec && r.l == l && r.esp == 1.0).map(|r| r.m).min()
    }

    /// Writes `success.csv` with columns `algorithm,L,M,avg_error,esp`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| vec![r.algorithm.name().to_string(), r.l.to_string(), r.m.to_string(), fmt_f64(r.avg_error), fmt_f64(r.esp)])
            .collect();
        write_table(dir.join("success.csv"), &["algorithm", "L", "M", "avg_error", "esp"], &rows)
    }
}

/// Sweeps `M` for every `L`, running all algorithms on the same `T` instances per condition.
pub fn run_success_analysis(cfg: &SuccessConfig) -> Result<SuccessReport> {
    let jobs: Vec<(usize, usize, usize)> = cfg
        .l_values
        .iter()
        .flat_map(|&l| cfg.m_grid.iter().flat_map(move |&m| (0..cfg.trials).map(move |t| (l, m, t))))
        .collect();
    let errors = jobs
        .par_iter()
        .map(|&(l, m, t)| {
            let seed = derive_seed(cfg.seed, &[l as u64, m as u64, t as u64]);
            let trial = generate_sparse_trial(cfg.n, m, cfg.s, l, cfg.sigma2, seed)?;
            run_trial(&trial, &cfg.algorithms, &cfg.prior, &cfg.solver)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for &l in &cfg.l_values {
        for (a, &spec) in cfg.algorithms.iter().enumerate() {
            for &m in &cfg.m_grid {
                let outcomes: Vec<TrialOutcome> = jobs
                    .iter()
                    .zip(&errors)
                    .filter(|((jl, jm, _), _)| *jl == l && *jm == m)
                    .map(|(_, e)| TrialOutcome::new(e[a], cfg.eps_tol))
                    .collect();
                rows.push(aggregate(spec, l, m, outcomes));
            }
        }
    }
    Ok(SuccessReport { config: cfg.clone(), rows })
}

fn aggregate(algorithm: AlgorithmSpec, l: usize, m: usize, outcomes: Vec<TrialOutcome>) -> SuccessRow {
    let avg_error = outcomes.iter().map(|o| o.error).sum::<f64>() / outcomes.len().max(1) as f64;
    SuccessRow { algorithm, l, m, avg_error, esp: empirical_success_probability(&outcomes), outcomes }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseConfig {
    pub n: usize,
    pub stride: usize,
    pub trials: usize,
    pub l: usize,
    pub sigma2: f64,
    pub eps_tol: f64,
    pub algorithms: Vec<AlgorithmSpec>,
    pub seed: u64,
    pub prior: PriorDefaults,
    pub solver: SolverConfig,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            n: 100,
            stride: 5,
            trials: 10,
            l: 4,
            sigma2: 1e-6,
            eps_tol: 1e-2,
            algorithms: vec![AlgorithmSpec::IAS, AlgorithmSpec::MMV_IAS],
            seed: 0,
            prior: PriorDefaults::signals(),
            solver: SolverConfig::default(),
        }
    }
}

impl PhaseConfig {
    /// `1, stride, 2·stride, …, n`.
    pub fn grid(&self) -> Vec<usize> {
        let mut g = vec![1];
        g.extend((1..=self.n / self.stride.max(1)).map(|i| i * self.stride.max(1)).filter(|&v| v > 1));
        if *g.last().unwrap_or(&0) != self.n {
            g.push(self.n);
        }
        g
    }
}

/// Aggregate for one `(algorithm, s, M)` cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseCell {
    pub algorithm: AlgorithmSpec,
    pub s: usize,
    pub m: usize,
    pub avg_error: f64,
    pub esp: f64,
}

/// ESP over the `(s, M)` grid.
#[derive(Clone, Debug)]
pub struct PhaseReport {
    pub config: PhaseConfig,
    pub grid: Vec<usize>,
    pub cells: Vec<PhaseCell>,
}

impl PhaseReport {
    pub fn esp(&self, spec: AlgorithmSpec, s: usize, m: usize) -> Option<f64> {
        self.cells.iter().find(|c| c.algorithm == spec && c.s == s && c.m == m).map(|c| c.esp)
    }

    /// Writes `phase.csv` (`algorithm,L,s,M,avg_error,esp`) and one ESP matrix per algorithm,
    /// `phase_esp_<algorithm>.csv`, with rows indexed by `s` and columns by `M`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.algorithm.name().to_string(),
                    self.config.l.to_string(),
                    c.s.to_string(),
                    c.m.to_string(),
                    fmt_f64(c.avg_error),
                    fmt_f64(c.esp),
                ]
            })
            .collect();
        write_table(dir.join("phase.csv"), &["algorithm", "L", "s", "M", "avg_error", "esp"], &rows)?;
        for &spec in &self.config.algorithms {
            let mut header = vec!["s".to_string()];
            header.extend(self.grid.iter().map(|m| m.to_string()));
            let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<String>> = self
                .grid
                .iter()
                .map(|&s| {
                    let mut row = vec![s.to_string()];
                    row.extend(self.grid.iter().map(|&m| fmt_f64(self.esp(spec, s, m).unwrap_or(f64::NAN))));
                    row
                })
                .collect();
            let name = spec.name().to_ascii_lowercase();
            write_table(dir.join(format!("phase_esp_{name}.csv")), &header_ref, &rows)?;
        }
        Ok(())
    }
}

pub fn run_phase_transition(cfg: &PhaseConfig) -> Result<PhaseReport> {
    let grid = cfg.grid();
    let jobs: Vec<(usize, usize, usize)> =
        grid.iter().flat_map(|&s| grid.iter().flat_map(move |&m| (0..cfg.trials).map(move |t| (s, m, t)))).collect();
    let errors = jobs
        .par_iter()
        .map(|&(s, m, t)| {
            let seed = derive_seed(cfg.seed, &[s as u64, m as u64, t as u64]);
            let trial = generate_sparse_trial(cfg.n, m, s, cfg.l, cfg.sigma2, seed)?;
            run_trial(&trial, &cfg.algorithms, &cfg.prior, &cfg.solver)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for (a, &spec) in cfg.algorithms.iter().enumerate() {
        for &s in &grid {
            for &m in &grid {
                let outcomes: Vec<TrialOutcome> = jobs
                    .iter()
                    .zip(&errors)
                    .filter(|((js, jm, _), _)| *js == s && *jm == m)
                    .map(|(_, e)| TrialOutcome::new(e[a], cfg.eps_tol))
                    .collect();
                let row = aggregate(spec, s, m, outcomes);
                cells.push(PhaseCell { algorithm: spec, s, m, avg_error: row.avg_error, esp: row.esp });
            }
        }
    }
    Ok(PhaseReport { config: cfg.clone(), grid, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_shapes() {
        let t = generate_sparse_trial(30, 12, 5, 3, 1e-4, 9).unwrap();
        assert_eq!(t.problem.len(), 3);
        for (x, y) in t.truth.iter().zip(&t.problem.measurements) {
            assert_eq!(y.len(), 12);
            let supp: Vec<usize> = (0..30).filter(|&i| x[i] != 0.0).collect();
            assert_eq!(supp, t.support);
        }
    }

    #[test]
    fn noiseless_full_sampling() {
        let t = generate_sparse_trial(16, 16, 4, 2, 0.0, 1).unwrap();
        for (x, y) in t.truth.iter().zip(&t.problem.measurements) {
            assert!((t.problem.forward_ops[0].mul(x) - y).norm() < 1e-15);
        }
        assert!(t.problem.noise_cov.is_none());
    }

    #[test]
    fn phase_grid() {
        let c = PhaseConfig { n: 20, stride: 5, ..Default::default() };
        assert_eq!(c.grid(), vec![1, 5, 10, 15, 20]);
        let c = PhaseConfig { n: 12, stride: 5, ..Default::default() };
        assert_eq!(c.grid(), vec![1, 5, 10, 12]);
    }
}
