use std::f64::consts::PI;

use jointsparse::operators::*;
use jointsparse::{LinearMap, NoiseCovariance};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
}

fn maps(rng: &mut ChaCha8Rng) -> Vec<LinearMap> {
    let omega: Vec<usize> = (0..12).filter(|_| rng.random_bool(0.5)).chain([12]).collect();
    let mask = FrequencyMask::new(8, (0..64).filter(|_| rng.random_bool(0.3)).chain([0])).unwrap();
    let dft = subsampled_dft_operator(&mask, 8).unwrap();
    let y = DVector::from_element(dft.rows(), Complex64::new(0.0, 0.0));
    vec![
        LinearMap::Dense(random_matrix(rng, 5, 7)),
        difference_operator(9),
        gradient2d_operator(4, 5),
        LinearMap::identity(6),
        subsampled_dct_operator(13, &omega).unwrap(),
        realify(&dft, &y).unwrap().0,
        LinearMap::Scaled(2.5, Box::new(difference_operator(7))),
        gaussian_blur_operator(10, 0.05),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity_holds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for a in maps(&mut rng) {
            let x = random_vector(&mut rng, a.cols());
            let y = random_vector(&mut rng, a.rows());
            let lhs = a.apply(&x).unwrap().dot(&y);
            let rhs = x.dot(&a.adjoint_apply(&y).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{a:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn apply_matches_dense(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for a in maps(&mut rng) {
            let x = random_vector(&mut rng, a.cols());
            let d = a.to_dense();
            prop_assert!((a.apply(&x).unwrap() - &d * &x).norm() <= 1e-12 * (1.0 + x.norm()));
            let w = DVector::from_fn(a.rows(), |_, _| rng.random_range(0.1..2.0));
            let expected = d.transpose() * DMatrix::from_diagonal(&w) * &d;
            prop_assert!((a.weighted_gram(&w) - &expected).norm() <= 1e-11 * (1.0 + expected.norm()));
            prop_assert!((a.weighted_diag(&w) - expected.diagonal()).norm() <= 1e-11 * (1.0 + expected.norm()));
            prop_assert!((a.gram() - d.transpose() * &d).norm() <= 1e-11 * (1.0 + d.norm_squared()));
        }
    }

    #[test]
    fn isotropic_whitening_scales(seed in any::<u64>(), var in 1e-6f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = subsampled_dct_operator(10, &[1, 4, 7]).unwrap();
        let y = random_vector(&mut rng, 3);
        let (wa, wy) = whiten(&a, &y, &NoiseCovariance::Isotropic(var)).unwrap();
        let s = var.sqrt();
        prop_assert!((wa.to_dense() * s - a.to_dense()).norm() <= 1e-12 * a.to_dense().norm());
        prop_assert!((wy * s - &y).norm() <= 1e-12 * (1.0 + y.norm()));
    }
}

#[test]
fn difference_operator_example() {
    let d = difference_operator(4).to_dense();
    let expected = DMatrix::from_row_slice(3, 4, &[-1.0, 1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, -1.0, 1.0]);
    assert_eq!(d, expected);
}

#[test]
fn gradient2d_annihilates_constants_only() {
    let g = gradient2d_operator(5, 4);
    assert_eq!(g.rows(), 4 * 4 + 5 * 3);
    assert!(g.apply(&DVector::from_element(20, 3.0)).unwrap().norm() == 0.0);
    let svd = g.to_dense().svd(false, false);
    let zero = svd.singular_values.iter().filter(|&&s| s < 1e-10).count();
    assert_eq!(zero, 1);
}

#[test]
fn full_dct_is_orthogonal() {
    let a = subsampled_dct_operator(16, &(0..16).collect::<Vec<_>>()).unwrap().to_dense();
    assert!((a.transpose() * &a - DMatrix::identity(16, 16)).norm() < 1e-12);
}

#[test]
fn dct_rejects_bad_selection() {
    assert!(subsampled_dct_operator(8, &[8]).is_err());
    assert!(subsampled_dct_operator(8, &[1, 1]).is_err());
    assert!(subsampled_dct_operator(8, &[]).is_err());
}

#[test]
fn dft_matches_explicit_sum() {
    let n = 6;
    let mask = FrequencyMask::new(n, [0, 7, 21, 22, 35]).unwrap();
    let f = subsampled_dft_operator(&mask, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = DVector::from_fn(n * n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let got = f.apply(&x).unwrap();
    for (row, &idx) in mask.indices().iter().enumerate() {
        let k1 = (idx % n) as f64 - (n / 2) as f64;
        let k2 = (idx / n) as f64 - (n / 2) as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..n {
            for i in 0..n {
                let phase = -2.0 * PI * (k1 * i as f64 + k2 * j as f64) / n as f64;
                sum += x[i + j * n] * Complex64::from_polar(1.0 / n as f64, phase);
            }
        }
        assert!((got[row] - sum).norm() < 1e-12, "frequency {idx}");
    }
}

#[test]
fn full_dft_is_unitary() {
    let n = 8;
    let f = subsampled_dft_operator(&FrequencyMask::new(n, 0..n * n).unwrap(), n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = DVector::from_fn(n * n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), 0.0));
    let fx = f.apply(&x).unwrap();
    assert!((fx.norm() - x.norm()).abs() < 1e-12);
    assert!((f.adjoint_apply(&fx).unwrap() - &x).norm() < 1e-12);
}

#[test]
fn full_dc_sample_is_mean() {
    let n = 8;
    let mask = FrequencyMask::new(n, [n / 2 + (n / 2) * n]).unwrap();
    let f = subsampled_dft_operator(&mask, n).unwrap();
    let x = DVector::from_fn(n * n, |i, _| Complex64::new(i as f64, 0.0));
    let dc = f.apply(&x).unwrap()[0];
    let expected = x.iter().map(|v| v.re).sum::<f64>() / n as f64;
    assert!((dc.re - expected).abs() < 1e-10 && dc.im.abs() < 1e-10);
}

#[test]
fn blur_rows_follow_kernel() {
    let (n, gamma) = (40, 3e-2);
    let a = gaussian_blur_operator(n, gamma).to_dense();
    let h = 1.0 / n as f64;
    let k0 = h / (2.0 * PI * gamma * gamma);
    assert!((a[(5, 5)] - k0).abs() < 1e-14);
    assert!((a[(5, 7)] - k0 * (-(2.0 * h) * (2.0 * h) / (2.0 * gamma * gamma)).exp()).abs() < 1e-14);
    assert_eq!(a, a.transpose());
}

#[test]
fn full_covariance_whitening() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = random_matrix(&mut rng, 4, 4);
    let cov = &b * b.transpose() + DMatrix::identity(4, 4);
    let a = LinearMap::Dense(random_matrix(&mut rng, 4, 3));
    let y = random_vector(&mut rng, 4);
    let (wa, wy) = whiten(&a, &y, &NoiseCovariance::Full(cov.clone())).unwrap();
    let inv = cov.try_inverse().unwrap();
    let fd = a.to_dense();
    assert!((wa.gram() - fd.transpose() * &inv * &fd).norm() < 1e-10);
    assert!((wa.adjoint_apply(&wy).unwrap() - fd.transpose() * &inv * &y).norm() < 1e-10);
    assert!(whiten(&a, &y, &NoiseCovariance::Full(-DMatrix::identity(4, 4))).is_err());
    assert!(whiten(&a, &y, &NoiseCovariance::Isotropic(0.0)).is_err());
}

#[test]
fn radial_mask_properties() {
    let m = radial_sampling_mask(64, 20, 0.0);
    assert!(m.contains(m.center()));
    let d = m.density();
    assert!(d > 0.0 && d < 1.0);
    let more = radial_sampling_mask(64, 40, 0.0);
    assert!(more.len() > m.len());
    let full = radial_sampling_mask(256, 20, 0.0).density();
    assert!((full - 0.16).abs() <= 0.04, "density {full}");
}

#[test]
fn dimension_errors() {
    let a = difference_operator(5);
    assert!(a.apply(&DVector::zeros(4)).is_err());
    assert!(a.adjoint_apply(&DVector::zeros(5)).is_err());
    assert!(FrequencyMask::new(4, [16]).is_err());
}
