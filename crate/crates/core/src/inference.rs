//! Block-coordinate descent drivers (IAS, GSBL and their joint MMV counterparts)
//! and the least-squares baseline.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DVector, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate, Coupling, HyperModelConfig, IterationState, MmvProblem, RecoveryResult, SolverConfig, Variant};
use crate::objective::{objective, prior_weights, ObjectiveContext};
use crate::operators::LinearMap;
use crate::quad::QuadraticSolver;
use crate::theta::{theta_update_gsbl, theta_update_ias, SparsityMoment};

/// Prior variant and coupling of one of the four algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub variant: Variant,
    pub coupling: Coupling,
}

impl AlgorithmSpec {
    pub const IAS: Self = Self { variant: Variant::Ias, coupling: Coupling::Separate };
    pub const GSBL: Self = Self { variant: Variant::Gsbl, coupling: Coupling::Separate };
    pub const MMV_IAS: Self = Self { variant: Variant::Ias, coupling: Coupling::Joint };
    pub const MMV_GSBL: Self = Self { variant: Variant::Gsbl, coupling: Coupling::Joint };
    pub const ALL: [Self; 4] = [Self::IAS, Self::GSBL, Self::MMV_IAS, Self::MMV_GSBL];

    pub fn name(&self) -> &'static str {
        match (self.variant, self.coupling) {
            (Variant::Ias, Coupling::Separate) => "IAS",
            (Variant::Gsbl, Coupling::Separate) => "GSBL",
            (Variant::Ias, Coupling::Joint) => "MMV-IAS",
            (Variant::Gsbl, Coupling::Joint) => "MMV-GSBL",
        }
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ias" => Ok(Self::IAS),
            "gsbl" => Ok(Self::GSBL),
            "mmv-ias" => Ok(Self::MMV_IAS),
            "mmv-gsbl" => Ok(Self::MMV_GSBL),
            other => Err(Error::Parse(format!("unknown algorithm '{other}' (expected ias, gsbl, mmv-ias or mmv-gsbl)"))),
        }
    }
}

impl HyperModelConfig {
    pub fn spec(&self) -> AlgorithmSpec {
        AlgorithmSpec { variant: self.variant, coupling: self.coupling }
    }
}

/// `max_l ‖x_new_l − x_prev_l‖ / max(‖x_prev_l‖, ε) < tol`.
pub fn converged(x_prev: &[DVector<f64>], x_new: &[DVector<f64>], tol: f64) -> bool {
    x_prev.iter().zip(x_new).all(|(p, n)| (n - p).norm() / p.norm().max(f64::EPSILON) < tol)
}

/// Runs the algorithm selected by `hyper.variant` and `hyper.coupling`.
///
/// A noise covariance on the problem is whitened away first. Separate coupling solves the
/// `L` signals independently (in parallel), each with its own `θ`.
pub fn run(problem: &MmvProblem, hyper: &HyperModelConfig, cfg: &SolverConfig) -> Result<RecoveryResult> {
    run_impl(problem, hyper, cfg, None)
}

/// Like [`run`], calling `observer(run_index, state)` after every outer iteration.
///
/// Separate-coupling runs are executed sequentially so the observer sees them in order.
pub fn run_with_observer(
    problem: &MmvProblem,
    hyper: &HyperModelConfig,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(usize, &IterationState),
) -> Result<RecoveryResult> {
    run_impl(problem, hyper, cfg, Some(observer))
}

fn run_impl(
    problem: &MmvProblem,
    hyper: &HyperModelConfig,
    cfg: &SolverConfig,
    mut observer: Option<&mut dyn FnMut(usize, &IterationState)>,
) -> Result<RecoveryResult> {
    let start = Instant::now();
    cfg.validate()?;
    let problem = problem.whitened()?;
    validate(&problem, hyper)?;

    let outcomes = match hyper.coupling {
        Coupling::Joint => vec![run_joint(&problem, hyper, cfg, observer.map(|o| (0, o)))?],
        Coupling::Separate => {
            let joint = hyper.with_coupling(Coupling::Joint);
            let singles: Vec<MmvProblem> = (0..problem.len()).map(|l| problem.single(l)).collect();
            match observer.as_mut() {
                Some(obs) => singles
                    .iter()
                    .enumerate()
                    .map(|(l, p)| run_joint(p, &joint, cfg, Some((l, &mut **obs))))
                    .collect::<Result<Vec<_>>>()?,
                None => singles.par_iter().map(|p| run_joint(p, &joint, cfg, None)).collect::<Result<Vec<_>>>()?,
            }
        }
    };

    let mut result = RecoveryResult {
        x_hat: Vec::with_capacity(problem.len()),
        theta_hat: Vec::with_capacity(outcomes.len()),
        converged: true,
        iterations: 0,
        objective_trace: Vec::with_capacity(outcomes.len()),
        half_step_trace: Vec::with_capacity(outcomes.len()),
        inner_failures: 0,
        wall_time: 0.0,
    };
    for o in outcomes {
        result.x_hat.extend(o.x);
        result.theta_hat.push(o.theta);
        result.converged &= o.converged;
        result.iterations = result.iterations.max(o.iterations);
        result.objective_trace.push(o.trace);
        result.half_step_trace.push(o.half_trace);
        result.inner_failures += o.inner_failures;
    }
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}

struct JointOutcome {
    x: Vec<DVector<f64>>,
    theta: DVector<f64>,
    converged: bool,
    iterations: usize,
    trace: Vec<f64>,
    half_trace: Vec<f64>,
    inner_failures: usize,
}

fn run_joint(
    problem: &MmvProblem,
    hyper: &HyperModelConfig,
    cfg: &SolverConfig,
    mut observer: Option<(usize, &mut dyn FnMut(usize, &IterationState))>,
) -> Result<JointOutcome> {
    let ctx = ObjectiveContext::new(problem, hyper)?;
    let l = problem.len();
    let k = problem.sparse_dim();
    let solvers: Vec<QuadraticSolver<'_>> = problem
        .forward_ops
        .iter()
        .zip(&problem.measurements)
        .map(|(f, y)| QuadraticSolver::new(f, y, &problem.sparsifier, cfg))
        .collect();

    let mut theta = DVector::from_element(k, 1.0);
    let mut x_prev: Option<Vec<DVector<f64>>> = None;
    let mut out = JointOutcome {
        x: Vec::new(),
        theta: theta.clone(),
        converged: false,
        iterations: 0,
        trace: Vec::with_capacity(cfg.outer_maxit),
        half_trace: Vec::with_capacity(2 * cfg.outer_maxit),
        inner_failures: 0,
    };

    for it in 1..=cfg.outer_maxit {
        let weights = prior_weights(hyper.variant, &theta);
        let sols = solvers
            .par_iter()
            .enumerate()
            .map(|(i, s)| s.solve(&weights, x_prev.as_ref().map(|x| &x[i])))
            .collect::<Result<Vec<_>>>()?;
        out.inner_failures += sols.iter().filter(|s| !s.converged).count();
        let x: Vec<DVector<f64>> = sols.into_iter().map(|s| s.x).collect();
        out.half_trace.push(objective(&ctx, &x, &theta)?);

        let rx: Vec<DVector<f64>> = x.iter().map(|xl| problem.sparsifier.mul(xl)).collect();
        let s = SparsityMoment::from_sparsified(k, &rx);
        theta = match hyper.variant {
            Variant::Ias => theta_update_ias(&s, hyper, l)?,
            Variant::Gsbl => theta_update_gsbl(&s, hyper.beta, &hyper.vartheta, l)?,
        };
        let g = objective(&ctx, &x, &theta)?;
        out.half_trace.push(g);
        out.trace.push(g);
        out.iterations = it;

        if let Some((idx, obs)) = observer.as_mut() {
            let state = IterationState { x: x.clone(), theta: theta.clone(), iteration: it, objective_trace: out.trace.clone() };
            obs(*idx, &state);
        }
        let done = x_prev.as_deref().is_some_and(|p| converged(p, &x, cfg.convergence_tol));
        x_prev = Some(x);
        if done {
            out.converged = true;
            break;
        }
    }
    out.x = x_prev.unwrap_or_default();
    out.theta = theta;
    Ok(out)
}

/// Minimum-norm least-squares solution `F_l⁺ y_l` for every signal (after whitening).
///
/// Uses an SVD pseudoinverse up to [`SolverConfig::DIRECT_MAX_DIM`] unknowns and CGLS
/// started from zero beyond that.
pub fn least_squares_baseline(problem: &MmvProblem, cfg: &SolverConfig) -> Result<Vec<DVector<f64>>> {
    let problem = problem.whitened()?;
    problem
        .forward_ops
        .par_iter()
        .zip(problem.measurements.par_iter())
        .map(|(f, y)| {
            if f.cols() <= SolverConfig::DIRECT_MAX_DIM {
                pseudo_inverse_solve(f, y)
            } else {
                Ok(cgls(f, y, cfg.inner_tol, cfg.inner_maxit))
            }
        })
        .collect()
}

fn pseudo_inverse_solve(f: &LinearMap, y: &DVector<f64>) -> Result<DVector<f64>> {
    let dense = f.to_dense();
    let dim = dense.nrows().max(dense.ncols());
    let svd = SVD::new(dense, true, true);
    let thresh = dim as f64 * f64::EPSILON * svd.singular_values.max();
    svd.solve(y, thresh).map_err(|e| Error::NotApplicable(e.to_string()))
}

/// Conjugate gradients on the normal equations, from `x = 0`.
pub fn cgls(f: &LinearMap, y: &DVector<f64>, tol: f64, maxit: usize) -> DVector<f64> {
    let mut x = DVector::zeros(f.cols());
    let mut r = y.clone();
    let mut s = f.tr_mul(&r);
    let target = tol * s.norm();
    let mut p = s.clone();
    let mut gamma = s.norm_squared();
    for _ in 0..maxit {
        if gamma.sqrt() <= target || gamma == 0.0 {
            break;
        }
        let q = f.mul(&p);
        let qq = q.norm_squared();
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        s = f.tr_mul(&r);
        let gamma_new = s.norm_squared();
        p.axpy(1.0, &s, gamma_new / gamma);
        gamma = gamma_new;
    }
    x
}
