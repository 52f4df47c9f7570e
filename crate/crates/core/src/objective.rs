//! Negative log-posterior objectives, their derivatives and convexity analysis.
//!
//! For the IAS model (variances `θ`, generalized gamma hyper-prior)
//!
//! ```text
//! G(x, θ) = ½ Σ_l (‖F_l x_l − y_l‖² + ‖D_θ^{-1/2} R x_l‖²) + Σ_k (θ_k/ϑ_k)^r − η Σ_k log θ_k
//! ```
//!
//! with `η = rβ − (L/2 + 1)`, and for the GSBL model (precisions `θ`, gamma hyper-prior)
//!
//! ```text
//! G(x, θ) = ½ Σ_l (‖F_l x_l − y_l‖² + ‖D_θ^{1/2} R x_l‖²) + Σ_k θ_k/ϑ_k + (1 − L/2 − β) Σ_k log θ_k.
//! ```
//!
//! Additive constants independent of `(x, θ)` are dropped.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{eta, validate, HyperModelConfig, MmvProblem, Variant};

/// A validated `(problem, hyper-model)` pair; the problem is assumed whitened.
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveContext<'a> {
    pub problem: &'a MmvProblem,
    pub hyper: &'a HyperModelConfig,
}

impl<'a> ObjectiveContext<'a> {
    pub fn new(problem: &'a MmvProblem, hyper: &'a HyperModelConfig) -> Result<Self> {
        problem.check_dimensions()?;
        if hyper.vartheta.len() != problem.sparse_dim() {
            return Err(Error::DimensionMismatch(format!(
                "vartheta has length {} but the sparsifier has {} rows",
                hyper.vartheta.len(),
                problem.sparse_dim()
            )));
        }
        Ok(Self { problem, hyper })
    }

    /// Like [`ObjectiveContext::new`] but also enforces the hyper-parameter sign conditions.
    pub fn validated(problem: &'a MmvProblem, hyper: &'a HyperModelConfig) -> Result<Self> {
        validate(problem, hyper)?;
        Ok(Self { problem, hyper })
    }

    pub fn l(&self) -> usize {
        self.problem.len()
    }

    pub fn eta(&self) -> f64 {
        eta(self.hyper.r, self.hyper.beta, self.l())
    }

    /// Coefficient of `Σ log θ_k` in the GSBL objective.
    fn gsbl_log_coefficient(&self) -> f64 {
        -(self.l() as f64) / 2.0 + 1.0 - self.hyper.beta
    }

    fn check_args(&self, x: &[DVector<f64>], theta: &DVector<f64>) -> Result<()> {
        let p = self.problem;
        if x.len() != p.len() {
            return Err(Error::DimensionMismatch(format!("{} parameter vectors for L = {}", x.len(), p.len())));
        }
        if let Some(bad) = x.iter().find(|xl| xl.len() != p.signal_dim()) {
            return Err(Error::DimensionMismatch(format!("parameter vector of length {} for N = {}", bad.len(), p.signal_dim())));
        }
        if theta.len() != p.sparse_dim() {
            return Err(Error::DimensionMismatch(format!("theta of length {} for K = {}", theta.len(), p.sparse_dim())));
        }
        check_positive(theta)
    }

    fn residual(&self, l: usize, xl: &DVector<f64>) -> DVector<f64> {
        self.problem.forward_ops[l].mul(xl) - &self.problem.measurements[l]
    }
}

pub(crate) fn check_positive(theta: &DVector<f64>) -> Result<()> {
    match theta.iter().position(|&t| !(t > 0.0)) {
        Some(k) => Err(Error::NonPositiveTheta(k)),
        None => Ok(()),
    }
}

/// Prior weights on `R x`: `1/θ` for IAS, `θ` for GSBL.
pub fn prior_weights(variant: Variant, theta: &DVector<f64>) -> DVector<f64> {
    match variant {
        Variant::Ias => theta.map(|t| 1.0 / t),
        Variant::Gsbl => theta.clone(),
    }
}

/// `s_k = Σ_l [R x_l]_k² / 2`.
pub fn sparsity_moment(ctx: &ObjectiveContext<'_>, x: &[DVector<f64>]) -> DVector<f64> {
    let mut s = DVector::zeros(ctx.problem.sparse_dim());
    for xl in x {
        let rx = ctx.problem.sparsifier.mul(xl);
        s += rx.map(|v| 0.5 * v * v);
    }
    s
}

fn data_and_prior_terms(ctx: &ObjectiveContext<'_>, x: &[DVector<f64>], weights: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for (l, xl) in x.iter().enumerate() {
        let rx = ctx.problem.sparsifier.mul(xl);
        let prior: f64 = rx.iter().zip(weights.iter()).map(|(v, w)| w * v * v).sum();
        total += 0.5 * (ctx.residual(l, xl).norm_squared() + prior);
    }
    total
}

/// IAS objective.
pub fn objective_ias(ctx: &ObjectiveContext<'_>, x: &[DVector<f64>], theta: &DVector<f64>) -> Result<f64> {
    ctx.check_args(x, theta)?;
    let r = ctx.hyper.r;
    let e = ctx.eta();
    let hyper: f64 = theta.iter().zip(ctx.hyper.vartheta.iter()).map(|(t, v)| (t / v).powf(r) - e * t.ln()).sum();
    Ok(data_and_prior_terms(ctx, x, &prior_weights(Variant::Ias, theta)) + hyper)
}

/// GSBL objective.
pub fn objective_gsbl(ctx: &ObjectiveContext<'_>, x: &[DVector<f64>], theta: &DVector<f64>) -> Result<f64> {
    ctx.check_args(x, theta)?;
    let c = ctx.gsbl_log_coefficient();
    let hyper: f64 = theta.iter().zip(ctx.hyper.vartheta.iter()).map(|(t, v)| t / v + c * t.ln()).sum();
    Ok(data_and_prior_terms(ctx, x, &prior_weights(Variant::Gsbl, theta)) + hyper)
}

/// Objective of the variant configured in `ctx.hyper`.
pub fn objective(ctx: &ObjectiveContext<'_>, x: &[DVector<f64>], theta: &DVector<f64>) -> Result<f64> {
    match ctx.hyper.variant {
        Variant::Ias => objective_ias(ctx, x, theta),
        Variant::Gsbl => objective_gsbl(ctx, x, theta),
    }
}

#[derive(Clone, Debug)]
pub struct Gradient {
    pub x: Vec<DVector<f64>>,
    pub theta: DVector<f64>,
}

fn gradient_x(ctx: &ObjectiveContext<'_>, x: &[DVector<f64>], weights: &DVector<f64>) -> Vec<DVector<f64>> {
    let p = ctx.problem;
    x.iter()
        .enumerate()
        .map(|(l, xl)| {
            let data = p.forward_ops[l].tr_mul(&ctx.residual(l, xl));
            let rx = p.sparsifier.mul(xl);
            data + p.sparsifier.tr_mul(&rx.component_mul(weights))
        })
        .collect()
}

/// Gradient of [`objective_ias`].
pub fn gradient_ias(ctx: &ObjectiveContext<'_>, x: &[DVector<f64>], theta: &DVector<f64>) -> Result<Gradient> {
    ctx.check_args(x, theta)?;
    let (r, e) = (ctx.hyper.r, ctx.eta());
    let s = sparsity_moment(ctx, x);
    let grad_theta = DVector::from_fn(theta.len(), |k, _| {
        let (t, v) = (theta[k], ctx.hyper.vartheta[k]);
        -s[k] / (t * t) + t.powf(r - 1.0) * r / v.powf(r) - e / t
    });
    Ok(Gradient { x: gradient_x(ctx, x, &prior_weights(Variant::Ias, theta)), theta: grad_theta })
}

/// Gradient of [`objective_gsbl`].
pub fn gradient_gsbl(ctx: &ObjectiveContext<'_>, x: &[DVector<f64>], theta: &DVector<f64>) -> Result<Gradient> {
    ctx.check_args(x, theta)?;
    let c = ctx.gsbl_log_coefficient();
    let s = sparsity_moment(ctx, x);
    let grad_theta = DVector::from_fn(theta.len(), |k, _| s[k] + 1.0 / ctx.hyper.vartheta[k] + c / theta[k]);
    Ok(Gradient { x: gradient_x(ctx, x, &prior_weights(Variant::Gsbl, theta)), theta: grad_theta })
}

/// Hyper-prior part of the IAS Hessian quadratic form: `Σ_k θ_k^{-2} w_k² (θ_k^r r(r−1)/ϑ_k^r + η)`.
///
/// This is also the lower bound on the full quadratic form.
pub fn hessian_lower_bound(ctx: &ObjectiveContext<'_>, theta: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let (r, e) = (ctx.hyper.r, ctx.eta());
    (0..theta.len())
        .map(|k| {
            let (t, v) = (theta[k], ctx.hyper.vartheta[k]);
            w[k] * w[k] / (t * t) * ((t / v).powf(r) * r * (r - 1.0) + e)
        })
        .sum()
}

/// Exact `uᵀ ∇²G u` of the IAS objective at `(x, θ)` for `u = [v_{1:L}; w]`:
///
/// ```text
/// Σ_l ‖F_l v_l‖² + Σ_l Σ_k θ_k^{-3} (θ_k [R v_l]_k − w_k [R x_l]_k)² + Σ_k θ_k^{-2} w_k² (θ_k^r r(r−1)/ϑ_k^r + η)
/// ```
pub fn hessian_quadratic_form(
    ctx: &ObjectiveContext<'_>,
    x: &[DVector<f64>],
    theta: &DVector<f64>,
    v: &[DVector<f64>],
    w: &DVector<f64>,
) -> Result<f64> {
    ctx.check_args(x, theta)?;
    check_direction(ctx, v, w)?;
    let p = ctx.problem;
    let mut total = 0.0;
    for (l, (xl, vl)) in x.iter().zip(v).enumerate() {
        total += p.forward_ops[l].mul(vl).norm_squared();
        let rx = p.sparsifier.mul(xl);
        let rv = p.sparsifier.mul(vl);
        for k in 0..theta.len() {
            let t = theta[k];
            let d = t * rv[k] - w[k] * rx[k];
            total += d * d / (t * t * t);
        }
    }
    Ok(total + hessian_lower_bound(ctx, theta, w))
}

/// Exact `uᵀ ∇²G u` of the GSBL objective.
pub fn hessian_quadratic_form_gsbl(
    ctx: &ObjectiveContext<'_>,
    x: &[DVector<f64>],
    theta: &DVector<f64>,
    v: &[DVector<f64>],
    w: &DVector<f64>,
) -> Result<f64> {
    ctx.check_args(x, theta)?;
    check_direction(ctx, v, w)?;
    let p = ctx.problem;
    let c = ctx.gsbl_log_coefficient();
    let mut total = 0.0;
    for (l, (xl, vl)) in x.iter().zip(v).enumerate() {
        total += p.forward_ops[l].mul(vl).norm_squared();
        let rx = p.sparsifier.mul(xl);
        let rv = p.sparsifier.mul(vl);
        for k in 0..theta.len() {
            total += theta[k] * rv[k] * rv[k] + 2.0 * w[k] * rx[k] * rv[k];
        }
    }
    let hyper: f64 = (0..theta.len()).map(|k| -c * w[k] * w[k] / (theta[k] * theta[k])).sum();
    Ok(total + hyper)
}

fn check_direction(ctx: &ObjectiveContext<'_>, v: &[DVector<f64>], w: &DVector<f64>) -> Result<()> {
    let p = ctx.problem;
    if v.len() != p.len() || v.iter().any(|vl| vl.len() != p.signal_dim()) || w.len() != p.sparse_dim() {
        return Err(Error::DimensionMismatch("direction u = [v; w] does not match the problem".into()));
    }
    Ok(())
}

/// Convexity guarantee for the IAS objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convexity {
    /// `r ≥ 1` and `η > 0`.
    GloballyConvex,
    /// Case `0 < r < 1, η > 0` or `r < 0`, and every `θ_k` satisfies the pointwise condition.
    ConvexAtTheta,
    NotGuaranteed,
}

fn local_case_applies(r: f64, e: f64) -> bool {
    (r > 0.0 && r < 1.0 && e > 0.0) || r < 0.0
}

/// Classifies the IAS objective for `l` pooled signals at hyper-parameters `theta`.
pub fn convexity_check(hyper: &HyperModelConfig, l: usize, theta: &DVector<f64>) -> Convexity {
    if hyper.variant != Variant::Ias {
        return Convexity::NotGuaranteed;
    }
    let (r, e) = (hyper.r, eta(hyper.r, hyper.beta, l));
    if r >= 1.0 && e > 0.0 {
        return Convexity::GloballyConvex;
    }
    if !local_case_applies(r, e) || theta.len() != hyper.vartheta.len() {
        return Convexity::NotGuaranteed;
    }
    let pointwise = theta
        .iter()
        .zip(hyper.vartheta.iter())
        .all(|(&t, &v)| t > 0.0 && (t / v).powf(r) * r * (r - 1.0) > -e);
    if pointwise {
        Convexity::ConvexAtTheta
    } else {
        Convexity::NotGuaranteed
    }
}

/// Per-component bound `ϑ_k (η / (r|r−1|))^{1/r}` below which the objective is convex.
///
/// Infinite when `r < 0` and `η ≥ 0` (the pointwise condition then holds for every `θ`).
pub fn convexity_threshold(hyper: &HyperModelConfig, l: usize) -> Result<DVector<f64>> {
    let (r, e) = (hyper.r, eta(hyper.r, hyper.beta, l));
    if hyper.variant != Variant::Ias {
        return Err(Error::NotApplicable("convexity threshold is defined for the IAS model only".into()));
    }
    if r >= 1.0 && e > 0.0 {
        return Err(Error::NotApplicable("objective is globally convex".into()));
    }
    if !local_case_applies(r, e) {
        return Err(Error::NotApplicable(format!("no convexity guarantee for r = {r}, eta = {e}")));
    }
    if r < 0.0 && e >= 0.0 {
        return Ok(DVector::from_element(hyper.vartheta.len(), f64::INFINITY));
    }
    let factor = (e / (r * (r - 1.0).abs())).powf(1.0 / r);
    Ok(hyper.vartheta.map(|v| v * factor))
}
