mod common;

use common::*;
use jointsparse::objective::*;
use jointsparse::{Coupling, HyperModelConfig, LinearMap, MmvProblem, Variant};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn point(rng: &mut rand_chacha::ChaCha8Rng, p: &MmvProblem) -> (Vec<DVector<f64>>, DVector<f64>) {
    let x = (0..p.len()).map(|_| random_vector(rng, p.signal_dim(), -1.0, 1.0)).collect();
    (x, random_vector(rng, p.sparse_dim(), 0.5, 2.0))
}

fn direction(rng: &mut rand_chacha::ChaCha8Rng, p: &MmvProblem) -> (Vec<DVector<f64>>, DVector<f64>) {
    let v = (0..p.len()).map(|_| random_vector(rng, p.signal_dim(), -1.0, 1.0)).collect();
    (v, random_vector(rng, p.sparse_dim(), -1.0, 1.0))
}

fn check_hessian(seed: u64, gsbl: bool) -> Result<(), TestCaseError> {
    let mut g = rng(seed);
    let (l, n, k) = (1 + seed as usize % 3, 2 + seed as usize % 7, 1 + (seed / 7) as usize % 7);
    let p = dense_problem(&mut g, l, n, k);
    let hyper = if gsbl { random_gsbl(&mut g, k) } else { random_ias(&mut g, k) };
    let ctx = ObjectiveContext::new(&p, &hyper).unwrap();
    let (x, theta) = point(&mut g, &p);
    let (v, w) = direction(&mut g, &p);
    let exact = if gsbl {
        hessian_quadratic_form_gsbl(&ctx, &x, &theta, &v, &w).unwrap()
    } else {
        hessian_quadratic_form(&ctx, &x, &theta, &v, &w).unwrap()
    };
    let fd = second_difference(|t| objective(&ctx, &shift(&x, &v, t), &(&theta + &w * t)).unwrap(), 1e-3);
    prop_assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "fd {fd} exact {exact}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ias_hessian_matches_finite_differences(seed in any::<u64>()) {
        check_hessian(seed, false)?;
    }

    #[test]
    fn gsbl_hessian_matches_finite_differences(seed in any::<u64>()) {
        check_hessian(seed, true)?;
    }

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>(), gsbl in any::<bool>()) {
        let mut g = rng(seed);
        let p = dense_problem(&mut g, 2, 5, 4);
        let hyper = if gsbl { random_gsbl(&mut g, 4) } else { random_ias(&mut g, 4) };
        let ctx = ObjectiveContext::new(&p, &hyper).unwrap();
        let (x, theta) = point(&mut g, &p);
        let (v, w) = direction(&mut g, &p);
        let grad = if gsbl { gradient_gsbl(&ctx, &x, &theta) } else { gradient_ias(&ctx, &x, &theta) }.unwrap();
        let exact: f64 = grad.x.iter().zip(&v).map(|(a, b)| a.dot(b)).sum::<f64>() + grad.theta.dot(&w);
        let fd = first_difference(|t| objective(&ctx, &shift(&x, &v, t), &(&theta + &w * t)).unwrap(), 1e-3);
        prop_assert!((fd - exact).abs() <= 1e-7 * exact.abs().max(1.0), "fd {fd} exact {exact}");
    }

    #[test]
    fn globally_convex_case_is_nonnegative(seed in any::<u64>()) {
        let mut g = rng(seed);
        let p = dense_problem(&mut g, 2, 4, 3);
        let r = 1.0 + g.random_range(0.0..2.0);
        let beta = (3.0 + g.random_range(0.1..2.0)) / r;
        let hyper = HyperModelConfig::new(Variant::Ias, Coupling::Joint, r, beta, random_vector(&mut g, 3, 0.1, 10.0)).unwrap();
        prop_assert_eq!(convexity_check(&hyper, 2, &DVector::from_element(3, 1.0)), Convexity::GloballyConvex);
        let ctx = ObjectiveContext::new(&p, &hyper).unwrap();
        let x = (0..2).map(|_| random_vector(&mut g, 4, -5.0, 5.0)).collect::<Vec<_>>();
        let theta = random_vector(&mut g, 3, 1e-3, 1e3);
        let (v, w) = direction(&mut g, &p);
        let q = hessian_quadratic_form(&ctx, &x, &theta, &v, &w).unwrap();
        let u2 = v.iter().map(|a| a.norm_squared()).sum::<f64>() + w.norm_squared();
        prop_assert!(q >= -1e-10 * u2);
        prop_assert!(q >= hessian_lower_bound(&ctx, &theta, &w) - 1e-10 * u2);
    }

    #[test]
    fn below_threshold_is_nonnegative(seed in any::<u64>(), negative_r in any::<bool>()) {
        let mut g = rng(seed);
        let p = dense_problem(&mut g, 1, 4, 3);
        let (r, beta) = if negative_r { (-g.random_range(0.2..2.0), g.random_range(0.5..3.0)) } else { (g.random_range(0.2..0.9), g.random_range(8.0..20.0)) };
        let hyper = HyperModelConfig::new(Variant::Ias, Coupling::Joint, r, beta, random_vector(&mut g, 3, 0.1, 10.0)).unwrap();
        let bound = convexity_threshold(&hyper, 1).unwrap();
        let theta = DVector::from_fn(3, |k, _| bound[k] * g.random_range(0.01..0.999));
        prop_assert_eq!(convexity_check(&hyper, 1, &theta), Convexity::ConvexAtTheta);
        let ctx = ObjectiveContext::new(&p, &hyper).unwrap();
        let x = vec![random_vector(&mut g, 4, -5.0, 5.0)];
        let (v, w) = direction(&mut g, &p);
        let q = hessian_quadratic_form(&ctx, &x, &theta, &v, &w).unwrap();
        let u2 = v[0].norm_squared() + w.norm_squared();
        let lb = hessian_lower_bound(&ctx, &theta, &w);
        prop_assert!(q >= -1e-10 * u2);
        prop_assert!(lb >= -1e-10 * u2);
        prop_assert!(q >= lb - 1e-10 * u2 * (1.0 + q.abs()));
    }
}

use rand::Rng;

#[test]
fn scalar_objective_by_hand() {
    let p = MmvProblem::new(
        vec![LinearMap::Dense(DMatrix::from_element(1, 1, 2.0))],
        vec![DVector::from_element(1, 1.0)],
        LinearMap::identity(1),
    );
    let (x, theta) = (vec![DVector::from_element(1, 0.5)], DVector::from_element(1, 0.25));
    let ias = HyperModelConfig::ias(Coupling::Joint, 1.0, 3.0, 0.5, 1).unwrap();
    let ctx = ObjectiveContext::new(&p, &ias).unwrap();
    let e = 1.0 * 3.0 - 1.5;
    let expected = 0.5 * (0.0 + 0.25 / 0.25) + 0.25 / 0.5 - e * 0.25f64.ln();
    assert!((objective_ias(&ctx, &x, &theta).unwrap() - expected).abs() < 1e-14);
    let gsbl = HyperModelConfig::gsbl(Coupling::Joint, 2.0, 0.5, 1).unwrap();
    let ctx = ObjectiveContext::new(&p, &gsbl).unwrap();
    let expected = 0.5 * (0.25 * 0.25) + 0.25 / 0.5 + (1.0 - 0.5 - 2.0) * 0.25f64.ln();
    assert!((objective_gsbl(&ctx, &x, &theta).unwrap() - expected).abs() < 1e-14);
}

#[test]
fn objective_rejects_bad_theta() {
    let mut g = rng(1);
    let p = dense_problem(&mut g, 1, 3, 2);
    let hyper = random_ias(&mut g, 2);
    let ctx = ObjectiveContext::new(&p, &hyper).unwrap();
    let x = vec![DVector::zeros(3)];
    assert!(objective(&ctx, &x, &DVector::from_vec(vec![1.0, 0.0])).is_err());
    assert!(objective(&ctx, &x, &DVector::from_vec(vec![1.0])).is_err());
    assert!(objective(&ctx, &[DVector::zeros(2)], &DVector::from_element(2, 1.0)).is_err());
}

#[test]
fn convexity_classification() {
    let h = |r: f64, beta: f64| HyperModelConfig::ias(Coupling::Joint, r, beta, 1.0, 2).unwrap();
    let ones = DVector::from_element(2, 1.0);
    assert_eq!(convexity_check(&h(1.0, 3.0), 1, &ones), Convexity::GloballyConvex);
    assert_eq!(convexity_check(&h(1.0, 1.0), 1, &ones), Convexity::NotGuaranteed);
    assert_eq!(convexity_check(&h(-1.0, 1.0), 1, &(&ones * 0.5)), Convexity::ConvexAtTheta);
    assert_eq!(convexity_check(&h(-1.0, 1.0), 1, &ones), Convexity::NotGuaranteed);
    assert!(convexity_threshold(&h(1.0, 3.0), 1).is_err());
    let gsbl = HyperModelConfig::gsbl(Coupling::Joint, 1.0, 1.0, 2).unwrap();
    assert_eq!(convexity_check(&gsbl, 1, &ones), Convexity::NotGuaranteed);
}

#[test]
fn threshold_zeroes_the_hyper_term() {
    for (r, beta) in [(0.5, 10.0), (-1.0, 1.0), (-0.5, 2.0)] {
        let hyper = HyperModelConfig::ias(Coupling::Joint, r, beta, 2.0, 1).unwrap();
        let e = jointsparse::eta(r, beta, 1);
        let t = convexity_threshold(&hyper, 1).unwrap()[0];
        assert!(t.is_finite());
        let term = (t / 2.0).powf(r) * r * (r - 1.0) + e;
        assert!(term.abs() < 1e-10 * e.abs(), "r = {r}: {term}");
        assert_eq!(convexity_check(&hyper, 1, &DVector::from_element(1, 1.01 * t)), Convexity::NotGuaranteed);
    }
}
