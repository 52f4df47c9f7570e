#![allow(dead_code)]

use jointsparse::{Coupling, HyperModelConfig, LinearMap, MmvProblem, Variant};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}

/// A small dense problem with `l` signals, `n` unknowns and `k` sparsifier rows.
pub fn dense_problem(rng: &mut ChaCha8Rng, l: usize, n: usize, k: usize) -> MmvProblem {
    let ops = (0..l).map(|_| LinearMap::Dense(random_matrix(rng, n + 1, n))).collect();
    let data = (0..l).map(|_| random_vector(rng, n + 1, -1.0, 1.0)).collect();
    MmvProblem::new(ops, data, LinearMap::Dense(random_matrix(rng, k, n)))
}

/// Random IAS parameters with `r ∈ [−2, 2]` away from zero.
pub fn random_ias(rng: &mut ChaCha8Rng, k: usize) -> HyperModelConfig {
    let r = loop {
        let r: f64 = rng.random_range(-2.0..2.0);
        if r.abs() > 0.1 {
            break r;
        }
    };
    let beta = rng.random_range(0.5..3.0);
    HyperModelConfig::new(Variant::Ias, Coupling::Joint, r, beta, random_vector(rng, k, 0.5, 2.0)).unwrap()
}

pub fn random_gsbl(rng: &mut ChaCha8Rng, k: usize) -> HyperModelConfig {
    let beta = rng.random_range(0.5..3.0);
    HyperModelConfig::new(Variant::Gsbl, Coupling::Joint, 1.0, beta, random_vector(rng, k, 0.5, 2.0)).unwrap()
}

/// Fourth-order central second difference of `f` at 0.
pub fn second_difference(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
}

/// Fourth-order central first difference of `f` at 0.
pub fn first_difference(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

pub fn shift(x: &[DVector<f64>], v: &[DVector<f64>], t: f64) -> Vec<DVector<f64>> {
    x.iter().zip(v).map(|(a, b)| a + b * t).collect()
}
