//! Seeded problem generators, error metrics and drivers for the deblurring,
//! sparse-recovery and parallel-MRI experiments.

mod deblur;
mod mri;
mod phantom;
mod sparse;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::AlgorithmSpec;
use crate::model::{HyperModelConfig, Variant};

pub use deblur::{deblurring_problem, generate_piecewise_signals, run_deblurring, DeblurConfig, DeblurRecovery, DeblurReport, PiecewiseSignals};
pub use mri::{coil_masks, mri_problem, run_parallel_mri, MriConfig, MriReport, MriRow};
pub use phantom::shepp_logan;
pub use sparse::{
    generate_sparse_trial, run_phase_transition, run_success_analysis, PhaseCell, PhaseConfig, PhaseReport, SparseTrial,
    SuccessConfig, SuccessReport, SuccessRow,
};

/// Hyper-prior parameters for the IAS and GSBL variants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PriorDefaults {
    pub r: f64,
    pub beta: f64,
    pub vartheta: f64,
    pub gsbl_beta: f64,
    pub gsbl_vartheta: f64,
}

impl PriorDefaults {
    /// Signal recovery: `(r, β, ϑ) = (−1, 1, 1e−4)`, GSBL `(β, ϑ) = (1, 1e4)`.
    pub const fn signals() -> Self {
        Self { r: -1.0, beta: 1.0, vartheta: 1e-4, gsbl_beta: 1.0, gsbl_vartheta: 1e4 }
    }

    /// Imaging: `(r, β, ϑ) = (−1, 1, 1e−3)`, GSBL `(β, ϑ) = (1, 1e3)`.
    pub const fn imaging() -> Self {
        Self { r: -1.0, beta: 1.0, vartheta: 1e-3, gsbl_beta: 1.0, gsbl_vartheta: 1e3 }
    }

    pub fn hyper(&self, spec: AlgorithmSpec, k: usize) -> Result<HyperModelConfig> {
        match spec.variant {
            Variant::Ias => HyperModelConfig::ias(spec.coupling, self.r, self.beta, self.vartheta, k),
            Variant::Gsbl => HyperModelConfig::gsbl(spec.coupling, self.gsbl_beta, self.gsbl_vartheta, k),
        }
    }
}

/// A reconstruction method: least squares or one of the four Bayesian algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    LeastSquares,
    Bayes(AlgorithmSpec),
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::LeastSquares,
        Method::Bayes(AlgorithmSpec::IAS),
        Method::Bayes(AlgorithmSpec::GSBL),
        Method::Bayes(AlgorithmSpec::MMV_IAS),
        Method::Bayes(AlgorithmSpec::MMV_GSBL),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::LeastSquares => "LS",
            Method::Bayes(s) => s.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("ls") {
            Ok(Method::LeastSquares)
        } else {
            s.parse().map(Method::Bayes)
        }
    }
}

/// Outcome of one recovery trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub error: f64,
    pub success: bool,
}

impl TrialOutcome {
    pub fn new(error: f64, eps_tol: f64) -> Self {
        Self { error, success: error < eps_tol }
    }
}

/// Fraction of successful trials.
pub fn empirical_success_probability(outcomes: &[TrialOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.success).count() as f64 / outcomes.len() as f64
}

/// `√(Σ_l ‖x_l − x̂_l‖² / Σ_l ‖x_l‖²)`.
pub fn normalized_error(truth: &[DVector<f64>], estimates: &[DVector<f64>]) -> Result<f64> {
    if truth.len() != estimates.len() || truth.iter().zip(estimates).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::DimensionMismatch("truth and estimates disagree in shape".into()));
    }
    let den: f64 = truth.iter().map(|x| x.norm_squared()).sum();
    if den == 0.0 {
        return Err(Error::ZeroTruth);
    }
    let num: f64 = truth.iter().zip(estimates).map(|(x, e)| (x - e).norm_squared()).sum();
    Ok((num / den).sqrt())
}

/// `‖x̂ − x‖ / ‖x‖`.
pub fn relative_error(truth: &DVector<f64>, estimate: &DVector<f64>) -> Result<f64> {
    normalized_error(std::slice::from_ref(truth), std::slice::from_ref(estimate))
}

/// Mixes a master seed with integer tags into an independent 64-bit seed (SplitMix64).
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(master), |acc, &t| mix(acc ^ mix(t)))
}

pub(crate) fn rng_for(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}

/// Indices of the `k` largest entries, ascending by index.
pub fn top_k_indices(v: &DVector<f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// θ̂ for IAS, 1/θ̂ for GSBL, scaled to a maximum of 1.
pub fn normalized_theta_profile(variant: Variant, theta: &DVector<f64>) -> DVector<f64> {
    let p = match variant {
        Variant::Ias => theta.clone(),
        Variant::Gsbl => theta.map(|t| 1.0 / t),
    };
    let m = p.max();
    if m > 0.0 {
        p / m
    } else {
        p
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    v.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_error_examples() {
        let x = vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])];
        let e = vec![DVector::from_vec(vec![1.0, 0.0]), DVector::zeros(2)];
        assert!((normalized_error(&x, &e).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(normalized_error(&x, &x).unwrap(), 0.0);
        let z = vec![DVector::zeros(2), DVector::zeros(2)];
        assert_eq!(normalized_error(&x, &z).unwrap(), 1.0);
        assert!(matches!(normalized_error(&z, &x), Err(Error::ZeroTruth)));
    }

    #[test]
    fn esp_counts_successes() {
        let o = [TrialOutcome::new(0.001, 0.01), TrialOutcome::new(0.01, 0.01), TrialOutcome::new(0.5, 0.01)];
        assert!((empirical_success_probability(&o) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn seeds_differ_by_tag() {
        assert_ne!(derive_seed(0, &[1, 2]), derive_seed(0, &[2, 1]));
        assert_eq!(derive_seed(5, &[3]), derive_seed(5, &[3]));
    }

    #[test]
    fn top_k() {
        let v = DVector::from_vec(vec![0.1, 0.9, 0.5, 0.9, 0.0]);
        assert_eq!(top_k_indices(&v, 2), vec![1, 3]);
        assert_eq!(top_k_indices(&v, 3), vec![1, 2, 3]);
    }

    #[test]
    fn method_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
    }
}
