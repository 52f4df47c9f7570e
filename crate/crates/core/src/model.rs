//! Problem, hyper-model and solver configuration types.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{whiten, LinearMap, NoiseCovariance};

/// `L` linear inverse problems `y_l = F_l x_l + e_l` sharing a sparsifying operator `R`.
#[derive(Clone, Debug)]
pub struct MmvProblem {
    pub forward_ops: Vec<LinearMap>,
    pub measurements: Vec<DVector<f64>>,
    pub sparsifier: LinearMap,
    /// Per-signal noise covariance; `None` means identity.
    pub noise_cov: Option<Vec<NoiseCovariance>>,
}

impl MmvProblem {
    pub fn new(forward_ops: Vec<LinearMap>, measurements: Vec<DVector<f64>>, sparsifier: LinearMap) -> Self {
        Self { forward_ops, measurements, sparsifier, noise_cov: None }
    }

    pub fn with_noise(mut self, noise_cov: Vec<NoiseCovariance>) -> Self {
        self.noise_cov = Some(noise_cov);
        self
    }

    /// Number of measurement vectors `L`.
    pub fn len(&self) -> usize {
        self.forward_ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward_ops.is_empty()
    }

    /// Signal dimension `N`.
    pub fn signal_dim(&self) -> usize {
        self.sparsifier.cols()
    }

    /// Number of sparsified coefficients `K`.
    pub fn sparse_dim(&self) -> usize {
        self.sparsifier.rows()
    }

    pub fn check_dimensions(&self) -> Result<()> {
        let l = self.forward_ops.len();
        if l == 0 {
            return Err(Error::DimensionMismatch("at least one measurement vector is required".into()));
        }
        if self.measurements.len() != l {
            return Err(Error::DimensionMismatch(format!(
                "{l} forward operators but {} measurement vectors",
                self.measurements.len()
            )));
        }
        let n = self.sparsifier.cols();
        for (i, (f, y)) in self.forward_ops.iter().zip(&self.measurements).enumerate() {
            if f.cols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "forward operator {} is {}x{} but the sparsifier has {n} columns",
                    i + 1,
                    f.rows(),
                    f.cols()
                )));
            }
            if y.len() != f.rows() {
                return Err(Error::DimensionMismatch(format!(
                    "measurement vector {} has length {} but forward operator {} has {} rows",
                    i + 1,
                    y.len(),
                    i + 1,
                    f.rows()
                )));
            }
        }
        if let Some(covs) = &self.noise_cov {
            if covs.len() != l {
                return Err(Error::DimensionMismatch(format!("{} noise covariances for {l} measurement vectors", covs.len())));
            }
        }
        Ok(())
    }

    /// Whitens every `(F_l, y_l)` pair so the noise has identity covariance.
    pub fn whitened(&self) -> Result<MmvProblem> {
        self.check_dimensions()?;
        let Some(covs) = &self.noise_cov else {
            return Ok(self.clone());
        };
        let mut forward_ops = Vec::with_capacity(self.len());
        let mut measurements = Vec::with_capacity(self.len());
        for ((f, y), cov) in self.forward_ops.iter().zip(&self.measurements).zip(covs) {
            let (wf, wy) = whiten(f, y, cov)?;
            forward_ops.push(wf);
            measurements.push(wy);
        }
        Ok(MmvProblem { forward_ops, measurements, sparsifier: self.sparsifier.clone(), noise_cov: None })
    }

    /// The `l`-th signal as a stand-alone single-vector problem.
    pub fn single(&self, l: usize) -> MmvProblem {
        MmvProblem {
            forward_ops: vec![self.forward_ops[l].clone()],
            measurements: vec![self.measurements[l].clone()],
            sparsifier: self.sparsifier.clone(),
            noise_cov: self.noise_cov.as_ref().map(|c| vec![c[l].clone()]),
        }
    }
}

/// Which hierarchical prior is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Conditionally Gaussian prior with variances `θ` and a generalized gamma hyper-prior.
    Ias,
    /// Conditionally Gaussian prior with precisions `θ` and a gamma hyper-prior.
    Gsbl,
}

/// Whether the `L` signals share one hyper-parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coupling {
    Separate,
    Joint,
}

/// Hyper-prior parameters `(r, β, ϑ)` together with the algorithm selection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperModelConfig {
    pub variant: Variant,
    pub coupling: Coupling,
    pub r: f64,
    pub beta: f64,
    pub vartheta: DVector<f64>,
}

impl HyperModelConfig {
    pub fn new(variant: Variant, coupling: Coupling, r: f64, beta: f64, vartheta: DVector<f64>) -> Result<Self> {
        let cfg = Self { variant, coupling, r, beta, vartheta };
        cfg.check_parameters()?;
        if variant == Variant::Gsbl && r != 1.0 {
            warn!("r = {r} is ignored by the GSBL hyper-prior (gamma shape is fixed)");
        }
        Ok(cfg)
    }

    /// Broadcasts a scalar `ϑ` to all `k` components.
    pub fn with_scalar_vartheta(variant: Variant, coupling: Coupling, r: f64, beta: f64, vartheta: f64, k: usize) -> Result<Self> {
        Self::new(variant, coupling, r, beta, DVector::from_element(k, vartheta))
    }

    /// IAS hyper-model with the given `(r, β, ϑ)`.
    pub fn ias(coupling: Coupling, r: f64, beta: f64, vartheta: f64, k: usize) -> Result<Self> {
        Self::with_scalar_vartheta(Variant::Ias, coupling, r, beta, vartheta, k)
    }

    /// GSBL hyper-model with the given `(β, ϑ)`.
    pub fn gsbl(coupling: Coupling, beta: f64, vartheta: f64, k: usize) -> Result<Self> {
        Self::with_scalar_vartheta(Variant::Gsbl, coupling, 1.0, beta, vartheta, k)
    }

    /// The same prior with a different coupling.
    pub fn with_coupling(&self, coupling: Coupling) -> Self {
        Self { coupling, ..self.clone() }
    }

    /// Shape exponent of the generalized gamma hyper-prior; GSBL always uses 1.
    pub fn effective_r(&self) -> f64 {
        match self.variant {
            Variant::Ias => self.r,
            Variant::Gsbl => 1.0,
        }
    }

    /// Number of signals that share one `θ` under this coupling.
    pub fn pooled_count(&self, l: usize) -> usize {
        match self.coupling {
            Coupling::Joint => l,
            Coupling::Separate => 1,
        }
    }

    fn check_parameters(&self) -> Result<()> {
        if self.variant == Variant::Ias && (self.r == 0.0 || !self.r.is_finite()) {
            return Err(Error::InvalidHyperParameter(format!("r must be a nonzero finite number, got {}", self.r)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidHyperParameter(format!("beta must be positive, got {}", self.beta)));
        }
        if let Some((k, v)) = self.vartheta.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidHyperParameter(format!("vartheta[{k}] must be positive, got {v}")));
        }
        Ok(())
    }

    /// Checks the sign conditions that keep the closed-form updates positive for `l` pooled signals.
    pub fn check_for(&self, l: usize) -> Result<()> {
        self.check_parameters()?;
        match self.variant {
            Variant::Ias => {
                let e = eta(self.r, self.beta, l);
                if self.r == 1.0 && !(e > 0.0) {
                    return Err(Error::InvalidHyperParameter(format!(
                        "r = 1 requires eta = r*beta - (L/2 + 1) > 0, got {e} (beta = {}, L = {l})",
                        self.beta
                    )));
                }
                if self.r == -1.0 && !(e < 0.0) {
                    return Err(Error::InvalidHyperParameter(format!("r = -1 requires eta < 0, got {e}")));
                }
                if self.r < 0.0 && !(e < 0.0) {
                    return Err(Error::InvalidHyperParameter(format!("r < 0 requires eta < 0 for a positive update, got {e}")));
                }
            }
            Variant::Gsbl => {
                let shape = l as f64 / 2.0 - 1.0 + self.beta;
                if !(shape > 0.0) {
                    return Err(Error::InvalidHyperParameter(format!("GSBL requires L/2 - 1 + beta > 0, got {shape}")));
                }
            }
        }
        Ok(())
    }
}

/// `η = rβ − (L/2 + 1)`.
pub fn eta(r: f64, beta: f64, l: usize) -> f64 {
    r * beta - (l as f64 / 2.0 + 1.0)
}

/// Checks that the problem and hyper-model are mutually consistent.
pub fn validate(problem: &MmvProblem, hyper: &HyperModelConfig) -> Result<()> {
    problem.check_dimensions()?;
    if hyper.vartheta.len() != problem.sparse_dim() {
        return Err(Error::DimensionMismatch(format!(
            "vartheta has length {} but the sparsifier has {} rows",
            hyper.vartheta.len(),
            problem.sparse_dim()
        )));
    }
    hyper.check_for(hyper.pooled_count(problem.len()))
}

/// Linear solver used for the `x`-subproblems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerSolver {
    /// Direct factorization for `N ≤ 512`, PCG otherwise.
    Auto,
    Pcg,
    Direct,
}

impl fmt::Display for InnerSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Auto => "auto",
            Self::Pcg => "pcg",
            Self::Direct => "direct",
        })
    }
}

impl FromStr for InnerSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "pcg" => Ok(Self::Pcg),
            "direct" => Ok(Self::Direct),
            other => Err(Error::Parse(format!("unknown inner solver `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub inner_solver: InnerSolver,
    pub inner_tol: f64,
    pub inner_maxit: usize,
    pub outer_maxit: usize,
    /// Threshold on the relative change of the `x_l` between outer iterations.
    pub convergence_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            inner_solver: InnerSolver::Auto,
            inner_tol: 1e-8,
            inner_maxit: 5000,
            outer_maxit: 200,
            convergence_tol: 1e-4,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub const DIRECT_MAX_DIM: usize = 512;

    pub fn validate(&self) -> Result<()> {
        if !(self.inner_tol > 0.0) || !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidSolverConfig("tolerances must be positive".into()));
        }
        if self.inner_maxit == 0 || self.outer_maxit == 0 {
            return Err(Error::InvalidSolverConfig("iteration limits must be at least 1".into()));
        }
        Ok(())
    }

    /// Resolves `Auto` for a problem of dimension `n`.
    pub fn resolved_solver(&self, n: usize) -> InnerSolver {
        match self.inner_solver {
            InnerSolver::Auto if n <= Self::DIRECT_MAX_DIM => InnerSolver::Direct,
            InnerSolver::Auto => InnerSolver::Pcg,
            s => s,
        }
    }
}

/// State of the block-coordinate descent after an outer iteration.
#[derive(Clone, Debug)]
pub struct IterationState {
    pub x: Vec<DVector<f64>>,
    pub theta: DVector<f64>,
    pub iteration: usize,
    pub objective_trace: Vec<f64>,
}

/// Output of one estimation run.
#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub x_hat: Vec<DVector<f64>>,
    /// One vector for joint coupling, one per signal for separate coupling.
    pub theta_hat: Vec<DVector<f64>>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after every outer iteration, one trace per independent run.
    pub objective_trace: Vec<Vec<f64>>,
    /// Objective after every half step (x-update, then θ-update), one trace per run.
    pub half_step_trace: Vec<Vec<f64>>,
    /// Number of inner solves that hit the iteration cap.
    pub inner_failures: usize,
    pub wall_time: f64,
}
