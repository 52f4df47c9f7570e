//! Hyper-parameter updates with `x_{1:L}` held fixed.
//!
//! For IAS each `θ_k` minimizes `s_k/θ + (θ/ϑ_k)^r − η log θ`, whose stationarity
//! condition, multiplied by `θ²`, is the scalar equation
//!
//! ```text
//! φ(θ) = (r/ϑ^r) θ^{r+1} − η θ − s = 0.
//! ```
//!
//! `r = 1` and `r = −1` have closed forms; other exponents use a bracketed Newton
//! iteration. In every regime that admits a positive root (`r > 0` with `η > 0` or
//! `s > 0`, and `r < 0` with `η < 0`) the positive root is unique, so no root
//! selection is needed.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{eta, HyperModelConfig};

/// `s_k = Σ_l [R x_l]_k² / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsityMoment(DVector<f64>);

impl SparsityMoment {
    pub fn new(s: DVector<f64>) -> Result<Self> {
        if let Some(k) = s.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Parse(format!("sparsity moment component {k} must be finite and nonnegative")));
        }
        Ok(Self(s))
    }

    /// Pools `Σ_l [r_l]_k² / 2` over the given sparsified vectors `r_l = R x_l`.
    pub fn from_sparsified<'a>(k: usize, rx: impl IntoIterator<Item = &'a DVector<f64>>) -> Self {
        let mut s = DVector::zeros(k);
        for r in rx {
            s += r.map(|v| 0.5 * v * v);
        }
        Self(s)
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// IAS update for `l` pooled signals: closed forms for `r = ±1`, numeric root otherwise.
pub fn theta_update_ias(s: &SparsityMoment, hyper: &HyperModelConfig, l: usize) -> Result<DVector<f64>> {
    check_len(s, &hyper.vartheta)?;
    let (r, e) = (hyper.r, eta(hyper.r, hyper.beta, l));
    let vt = &hyper.vartheta;
    let s = s.values();
    if r == 1.0 {
        if !(e > 0.0) {
            return Err(Error::InvalidEta { r, eta: e });
        }
        return Ok(DVector::from_fn(s.len(), |k, _| closed_form_r_plus_one(s[k], vt[k], e)));
    }
    if r == -1.0 {
        if !(e < 0.0) {
            return Err(Error::InvalidEta { r, eta: e });
        }
        return Ok(DVector::from_fn(s.len(), |k, _| closed_form_r_minus_one(s[k], vt[k], e)));
    }
    let mut theta = DVector::zeros(s.len());
    for k in 0..s.len() {
        theta[k] = solve_stationarity(s[k], r, vt[k], e)?;
    }
    Ok(theta)
}

/// `θ = (ϑ/2)(η + √(η² + 4s/ϑ))`.
pub fn closed_form_r_plus_one(s: f64, vartheta: f64, eta: f64) -> f64 {
    0.5 * vartheta * (eta + (eta * eta + 4.0 * s / vartheta).sqrt())
}

/// `θ = (s + ϑ)/(−η)`, with one compensated Newton correction so the result is
/// rounded to nearest.
pub fn closed_form_r_minus_one(s: f64, vartheta: f64, eta: f64) -> f64 {
    let theta = (s + vartheta) / -eta;
    theta + phi_r_minus_one(theta, s, vartheta, eta) / eta
}

/// `a + b = hi + lo` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let hi = a + b;
    let bb = hi - a;
    (hi, (a - (hi - bb)) + (b - bb))
}

/// `φ(θ) = −ϑ − ηθ − s` for `r = −1`, free of cancellation error.
fn phi_r_minus_one(theta: f64, s: f64, vartheta: f64, eta: f64) -> f64 {
    let (hi, lo) = two_sum(s, vartheta);
    (-eta).mul_add(theta, -hi) - lo
}

/// `φ(θ) = r θ (θ/ϑ)^r − η θ − s`.
fn phi(theta: f64, s: f64, r: f64, vartheta: f64, eta: f64) -> f64 {
    if r == -1.0 {
        return phi_r_minus_one(theta, s, vartheta, eta);
    }
    (r * (theta / vartheta).powf(r)).mul_add(theta, (-eta).mul_add(theta, -s))
}

/// GSBL update `θ_k = (L/2 − 1 + β)/(s_k + 1/ϑ_k)`.
pub fn theta_update_gsbl(s: &SparsityMoment, beta: f64, vartheta: &DVector<f64>, l: usize) -> Result<DVector<f64>> {
    check_len(s, vartheta)?;
    let shape = l as f64 / 2.0 - 1.0 + beta;
    if !(shape > 0.0) {
        return Err(Error::InvalidShape(shape));
    }
    let s = s.values();
    Ok(DVector::from_fn(s.len(), |k, _| shape / (s[k] + 1.0 / vartheta[k])))
}

fn check_len(s: &SparsityMoment, vartheta: &DVector<f64>) -> Result<()> {
    if s.len() != vartheta.len() {
        return Err(Error::DimensionMismatch(format!("sparsity moment has {} components, vartheta {}", s.len(), vartheta.len())));
    }
    Ok(())
}

/// Derivative of the scalar IAS objective in `θ`:
/// `−s/θ² + θ^{r−1} r/ϑ^r − η/θ`, evaluated as `φ(θ)/θ²`.
pub fn ias_stationarity_residual(theta: f64, s: f64, r: f64, vartheta: f64, eta: f64) -> f64 {
    phi(theta, s, r, vartheta, eta) / (theta * theta)
}

/// Scale of the terms in [`ias_stationarity_residual`], for relative tolerances.
pub fn ias_stationarity_scale(theta: f64, s: f64, r: f64, vartheta: f64, eta: f64) -> f64 {
    (s / (theta * theta)).abs() + (theta.powf(r - 1.0) * r / vartheta.powf(r)).abs() + (eta / theta).abs()
}

/// Derivative of the scalar GSBL objective in `θ`: `s + 1/ϑ + (1 − L/2 − β)/θ`.
pub fn gsbl_stationarity_residual(theta: f64, s: f64, beta: f64, vartheta: f64, l: usize) -> f64 {
    s + 1.0 / vartheta + (1.0 - l as f64 / 2.0 - beta) / theta
}

/// Positive root of `(r/ϑ^r) θ^{r+1} − η θ − s = 0`.
pub fn solve_stationarity(s: f64, r: f64, vartheta: f64, eta: f64) -> Result<f64> {
    let no_root = || Error::NoPositiveRoot { s, r, eta };
    if r == 0.0 || !r.is_finite() || !(vartheta > 0.0) || !(s >= 0.0) || !s.is_finite() || !eta.is_finite() {
        return Err(no_root());
    }
    let admits_root = if r > 0.0 { eta > 0.0 || s > 0.0 } else { eta < 0.0 };
    if !admits_root {
        return Err(no_root());
    }

    // Work with u = θ/ϑ: ψ(u) = r u^{r+1} − η u − s/ϑ, negative near 0 and positive for large u.
    let sv = s / vartheta;
    let psi = |u: f64| r * u.powf(r + 1.0) - eta * u - sv;
    let dpsi = |u: f64| r * (r + 1.0) * u.powf(r) - eta;

    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    let mut guard = 0;
    while psi(hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2100 || !hi.is_finite() {
            return Err(no_root());
        }
    }
    guard = 0;
    while psi(lo) >= 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 2100 || lo == 0.0 {
            return Err(no_root());
        }
    }

    let mut u = if lo == hi { lo } else { (lo * hi).sqrt() };
    for _ in 0..200 {
        let f = psi(u);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let d = dpsi(u);
        let newton = u - f / d;
        let next = if d.is_finite() && d != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - u).abs();
        u = next;
        if step <= 4.0 * f64::EPSILON * u || hi - lo <= 4.0 * f64::EPSILON * u {
            break;
        }
    }
    // One extra Newton polish step from the final iterate.
    let d = dpsi(u);
    if d.is_finite() && d != 0.0 {
        let polished = u - psi(u) / d;
        if polished > 0.0 && psi(polished).abs() <= psi(u).abs() {
            u = polished;
        }
    }
    let theta = u * vartheta;
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::NonFiniteValue("stationarity root"));
    }
    Ok(theta)
}
