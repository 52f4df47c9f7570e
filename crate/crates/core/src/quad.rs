//! Weighted least-squares `x`-subproblems.
//!
//! Each subproblem minimizes `‖F x − y‖² + ‖W^{1/2} R x‖²` with a positive diagonal
//! `W` (`D_θ^{-1}` for IAS, `D_θ` for GSBL) by solving the normal equations
//! `(FᵀF + RᵀWR) x = Fᵀy`.

use nalgebra::{Cholesky, DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::model::{InnerSolver, SolverConfig};
use crate::operators::LinearMap;

#[derive(Clone, Debug)]
pub struct QuadraticSubproblem<'a> {
    pub forward: &'a LinearMap,
    pub data: &'a DVector<f64>,
    pub sparsifier: &'a LinearMap,
    pub weights: DVector<f64>,
}

/// Solution of one subproblem.
#[derive(Clone, Debug)]
pub struct QuadSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// `‖A x − b‖ / ‖b‖` (absolute when `b = 0`).
    pub residual: f64,
    /// `false` when PCG exhausted its iteration budget; `x` is then the best iterate.
    pub converged: bool,
}

/// Solves a single subproblem.
pub fn solve_quadratic(sub: &QuadraticSubproblem<'_>, cfg: &SolverConfig) -> Result<QuadSolution> {
    if sub.forward.cols() != sub.sparsifier.cols() || sub.data.len() != sub.forward.rows() {
        return Err(Error::DimensionMismatch("subproblem operators and data disagree".into()));
    }
    QuadraticSolver::new(sub.forward, sub.data, sub.sparsifier, cfg).solve(&sub.weights, None)
}

/// Reusable solver for a fixed `(F, y, R)` and varying weights; caches `FᵀF` or its diagonal.
#[derive(Clone, Debug)]
pub struct QuadraticSolver<'a> {
    forward: &'a LinearMap,
    sparsifier: &'a LinearMap,
    rhs: DVector<f64>,
    method: InnerSolver,
    tol: f64,
    maxit: usize,
    gram: Option<DMatrix<f64>>,
    gram_diag: DVector<f64>,
}

impl<'a> QuadraticSolver<'a> {
    pub fn new(forward: &'a LinearMap, data: &DVector<f64>, sparsifier: &'a LinearMap, cfg: &SolverConfig) -> Self {
        let method = cfg.resolved_solver(forward.cols());
        let rhs = forward.tr_mul(data);
        let (gram, gram_diag) = match method {
            InnerSolver::Direct => {
                let g = forward.gram();
                let d = g.diagonal();
                (Some(g), d)
            }
            _ => (None, forward.column_sq_norms()),
        };
        Self { forward, sparsifier, rhs, method, tol: cfg.inner_tol, maxit: cfg.inner_maxit, gram, gram_diag }
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn method(&self) -> InnerSolver {
        self.method
    }

    /// `(FᵀF + RᵀWR) x`.
    pub fn apply_normal(&self, weights: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let rx = self.sparsifier.mul(x);
        self.forward.gram_mul(x) + self.sparsifier.tr_mul(&rx.component_mul(weights))
    }

    /// Dense `FᵀF + RᵀWR`.
    pub fn normal_matrix(&self, weights: &DVector<f64>) -> DMatrix<f64> {
        let g = match &self.gram {
            Some(g) => g.clone(),
            None => self.forward.gram(),
        };
        g + self.sparsifier.weighted_gram(weights)
    }

    pub fn solve(&self, weights: &DVector<f64>, warm_start: Option<&DVector<f64>>) -> Result<QuadSolution> {
        if weights.len() != self.sparsifier.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for a sparsifier with {} rows",
                weights.len(),
                self.sparsifier.rows()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::NonFiniteValue("subproblem weights"));
        }
        match self.method {
            InnerSolver::Direct | InnerSolver::Auto => self.solve_direct(weights),
            InnerSolver::Pcg => {
                let precond = &self.gram_diag + self.sparsifier.weighted_diag(weights);
                let out = pcg(|v| self.apply_normal(weights, v), &self.rhs, &precond, self.tol, self.maxit, warm_start)?;
                Ok(QuadSolution { x: out.x, iterations: out.iterations, residual: out.residual, converged: out.converged })
            }
        }
    }

    fn solve_direct(&self, weights: &DVector<f64>) -> Result<QuadSolution> {
        let a = self.normal_matrix(weights);
        let chol = Cholesky::new(a.clone()).ok_or(Error::SingularSystem)?;
        if numerically_singular(&a, &chol) {
            return Err(Error::SingularSystem);
        }
        let x = chol.solve(&self.rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        let bnorm = self.rhs.norm();
        let res = (&a * &x - &self.rhs).norm();
        let residual = if bnorm > 0.0 { res / bnorm } else { res };
        Ok(QuadSolution { x, iterations: 1, residual, converged: true })
    }
}

/// Flags factorizations whose smallest squared pivot is at rounding level relative to the
/// largest diagonal entry.
pub(crate) fn numerically_singular(a: &DMatrix<f64>, chol: &Cholesky<f64, nalgebra::Dyn>) -> bool {
    let l = chol.l_dirty();
    let min_pivot = (0..a.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    let max_diag = a.diagonal().max();
    min_pivot <= a.nrows() as f64 * f64::EPSILON * max_diag
}

/// Result of [`pcg`].
#[derive(Clone, Debug)]
pub struct PcgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients with a diagonal (Jacobi) preconditioner.
///
/// Stops when `‖b − A x‖ ≤ tol ‖b‖` (absolute `tol` when `b = 0`). When the budget is
/// exhausted the iterate with the smallest residual is returned with `converged = false`.
pub fn pcg(
    apply_a: impl Fn(&DVector<f64>) -> DVector<f64>,
    b: &DVector<f64>,
    precond: &DVector<f64>,
    tol: f64,
    maxit: usize,
    x0: Option<&DVector<f64>>,
) -> Result<PcgOutcome> {
    let n = b.len();
    if precond.len() != n || x0.is_some_and(|x| x.len() != n) {
        return Err(Error::DimensionMismatch("pcg vectors disagree in length".into()));
    }
    if precond.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::NonFiniteValue("pcg preconditioner"));
    }
    let bnorm = b.norm();
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    let mut r = if x0.is_some() { b - apply_a(&x) } else { b.clone() };
    let mut rel = r.norm() / scale;
    if rel <= tol {
        return Ok(PcgOutcome { x, iterations: 0, residual: rel, converged: true });
    }
    let mut z = r.component_div(precond);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let (mut best_x, mut best_rel) = (x.clone(), rel);

    for it in 1..=maxit {
        let ap = apply_a(&p);
        let pap = p.dot(&ap);
        if !pap.is_finite() || pap <= 0.0 {
            if rel.is_finite() && it > 1 {
                return Ok(PcgOutcome { x: best_x, iterations: it - 1, residual: best_rel, converged: false });
            }
            return Err(Error::NonFiniteValue("pcg breakdown"));
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        rel = r.norm() / scale;
        if !rel.is_finite() {
            return Err(Error::NonFiniteValue("pcg residual"));
        }
        if rel <= tol {
            return Ok(PcgOutcome { x, iterations: it, residual: rel, converged: true });
        }
        if rel < best_rel {
            best_rel = rel;
            best_x.copy_from(&x);
        }
        z = r.component_div(precond);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.axpy(1.0, &z, beta);
    }
    Ok(PcgOutcome { x: best_x, iterations: maxit, residual: best_rel, converged: false })
}

/// `true` iff `ker(F) ∩ ker(R) = {0}`, i.e. `[F; R]` has full column rank.
pub fn check_common_kernel(forward: &LinearMap, sparsifier: &LinearMap) -> bool {
    let n = forward.cols();
    if sparsifier.cols() != n {
        return false;
    }
    let (f, r) = (forward.to_dense(), sparsifier.to_dense());
    let mut stacked = DMatrix::zeros(f.nrows() + r.nrows(), n);
    stacked.rows_mut(0, f.nrows()).copy_from(&f);
    stacked.rows_mut(f.nrows(), r.nrows()).copy_from(&r);
    numerical_rank(stacked) == n
}

/// Rank with threshold `max(rows, cols) · ε · σ_max`.
pub fn numerical_rank(m: DMatrix<f64>) -> usize {
    let dim = m.nrows().max(m.ncols());
    let sv = SVD::new(m, false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let thresh = dim as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > thresh).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{difference_operator, LinearMap};

    #[test]
    fn scalar_subproblem() {
        let f = LinearMap::identity(1);
        let r = LinearMap::identity(1);
        let y = DVector::from_element(1, 2.0);
        for solver in [InnerSolver::Direct, InnerSolver::Pcg] {
            let cfg = SolverConfig { inner_solver: solver, ..Default::default() };
            let sub = QuadraticSubproblem { forward: &f, data: &y, sparsifier: &r, weights: DVector::from_element(1, 1.0) };
            let sol = solve_quadratic(&sub, &cfg).unwrap();
            assert!((sol.x[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pcg_identity_one_step() {
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let out = pcg(|v| v.clone(), &b, &DVector::from_element(3, 1.0), 1e-12, 10, None).unwrap();
        assert_eq!(out.iterations, 1);
        assert!((out.x - b).norm() < 1e-15);
    }

    #[test]
    fn pcg_jacobi_diagonal_one_step() {
        let d = DVector::from_vec(vec![1.0, 10.0, 1e3, 0.5]);
        let b = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]);
        let out = pcg(|v| v.component_mul(&d), &b, &d, 1e-12, 10, None).unwrap();
        assert_eq!(out.iterations, 1);
        assert!((out.x - b.component_div(&d)).norm() < 1e-14);
    }

    #[test]
    fn pcg_zero_rhs() {
        let out = pcg(|v| v * 2.0, &DVector::zeros(3), &DVector::from_element(3, 1.0), 1e-10, 5, None).unwrap();
        assert!(out.converged);
        assert_eq!(out.x, DVector::zeros(3));
    }

    #[test]
    fn pcg_budget_flagged() {
        let m = DMatrix::from_fn(30, 30, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let a = m.tr_mul(&m) + DMatrix::identity(30, 30) * 1e-6;
        let b = DVector::from_element(30, 1.0);
        let out = pcg(|v| &a * v, &b, &a.diagonal(), 1e-14, 2, None).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn common_kernel_examples() {
        let n = 6;
        assert!(check_common_kernel(&LinearMap::identity(n), &difference_operator(n)));
        assert!(!check_common_kernel(&difference_operator(n), &difference_operator(n)));
        let avg = LinearMap::Dense(DMatrix::from_element(1, n, 1.0 / n as f64));
        assert!(check_common_kernel(&avg, &difference_operator(n)));
    }

    #[test]
    fn singular_system_detected() {
        let n = 5;
        let f = difference_operator(n);
        let r = difference_operator(n);
        let y = DVector::zeros(n - 1);
        let cfg = SolverConfig { inner_solver: InnerSolver::Direct, ..Default::default() };
        let sub = QuadraticSubproblem { forward: &f, data: &y, sparsifier: &r, weights: DVector::from_element(n - 1, 1.0) };
        assert!(matches!(solve_quadratic(&sub, &cfg), Err(Error::SingularSystem)));
    }
}
