use jointsparse::model::eta;
use jointsparse::theta::*;
use jointsparse::{Coupling, HyperModelConfig};
use nalgebra::DVector;
use proptest::prelude::*;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn r_plus_one_closed_form_is_the_root(s in 0.0f64..1e3, v in log_uniform(1e-4, 1e4), e in log_uniform(1e-3, 1e2)) {
        let closed = closed_form_r_plus_one(s, v, e);
        let root = solve_stationarity(s, 1.0, v, e).unwrap();
        prop_assert!(closed > 0.0);
        prop_assert!((closed - root).abs() <= 1e-12 * root, "{closed} vs {root}");
    }

    #[test]
    fn r_minus_one_closed_form_is_the_root(s in 0.0f64..1e3, v in log_uniform(1e-4, 1e4), e in log_uniform(1e-3, 1e2)) {
        let closed = closed_form_r_minus_one(s, v, -e);
        let root = solve_stationarity(s, -1.0, v, -e).unwrap();
        prop_assert!(closed > 0.0);
        prop_assert!((closed - root).abs() <= 1e-12 * root, "{closed} vs {root}");
    }

    #[test]
    fn numeric_root_is_stationary(s in 1e-6f64..1e2, r in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0], v in log_uniform(1e-2, 1e2), e in log_uniform(1e-2, 1e1)) {
        let e = if r < 0.0 { -e } else { e };
        let t = solve_stationarity(s, r, v, e).unwrap();
        prop_assert!(t > 0.0);
        let res = ias_stationarity_residual(t, s, r, v, e);
        prop_assert!(res.abs() <= 1e-12 * ias_stationarity_scale(t, s, r, v, e), "residual {res}");
    }

    #[test]
    fn update_minimizes_scalar_objective(s in 0.0f64..10.0, r in prop_oneof![Just(-1.0f64), Just(1.0), -2.0f64..-0.2, 0.2f64..2.0], v in log_uniform(0.1, 10.0)) {
        let beta = if r > 0.0 { (3.0 + 1.0) / r } else { 1.0 };
        let hyper = HyperModelConfig::ias(Coupling::Joint, r, beta, v, 1).unwrap();
        let e = eta(r, beta, 2);
        let t = theta_update_ias(&SparsityMoment::new(DVector::from_element(1, s)).unwrap(), &hyper, 2).unwrap()[0];
        let f = |t: f64| s / t + (t / v).powf(r) - e * t.ln();
        for factor in [0.9, 0.99, 1.01, 1.1] {
            prop_assert!(f(t) <= f(t * factor) + 1e-12 * f(t).abs().max(1.0));
        }
    }

    #[test]
    fn gsbl_update_zeroes_gradient(s in 0.0f64..1e3, v in log_uniform(1e-4, 1e4), beta in 0.5f64..5.0, l in 1usize..20) {
        let t = theta_update_gsbl(&SparsityMoment::new(DVector::from_element(1, s)).unwrap(), beta, &DVector::from_element(1, v), l).unwrap()[0];
        prop_assert!(t > 0.0);
        let g = gsbl_stationarity_residual(t, s, beta, v, l);
        prop_assert!(g.abs() <= 1e-10 * (1.0 + s + 1.0 / v), "{g}");
    }

    #[test]
    fn theta_is_monotone_in_s(s in 0.0f64..10.0, ds in 1e-3f64..10.0, r in prop_oneof![Just(-1.0f64), Just(1.0), 0.3f64..2.0]) {
        let beta = if r > 0.0 { 3.0 / r } else { 1.0 };
        let hyper = HyperModelConfig::ias(Coupling::Joint, r, beta, 1.0, 2).unwrap();
        let moments = SparsityMoment::new(DVector::from_vec(vec![s, s + ds])).unwrap();
        let t = theta_update_ias(&moments, &hyper, 1).unwrap();
        prop_assert!(t[1] > t[0]);
    }
}

#[test]
fn closed_form_examples() {
    // r = 1, ϑ = 1, η = 1, s = 2: θ = (1 + √(1 + 8))/2 = 2.
    assert!((closed_form_r_plus_one(2.0, 1.0, 1.0) - 2.0).abs() < 1e-15);
    // r = −1, ϑ = 1, η = −2, s = 3: θ = 4/2 = 2.
    assert_eq!(closed_form_r_minus_one(3.0, 1.0, -2.0), 2.0);
    // Zero moment: θ = ϑη for r = 1 and ϑ/(−η) for r = −1.
    assert!((closed_form_r_plus_one(0.0, 0.5, 3.0) - 1.5).abs() < 1e-15);
    assert_eq!(closed_form_r_minus_one(0.0, 1e-4, -4.0), 2.5e-5);
}

#[test]
fn update_pools_moment_over_signals() {
    let a = DVector::from_vec(vec![1.0, 0.0, 2.0]);
    let b = DVector::from_vec(vec![1.0, 3.0, 0.0]);
    let s = SparsityMoment::from_sparsified(3, [&a, &b]);
    assert_eq!(s.values(), &DVector::from_vec(vec![1.0, 4.5, 2.0]));
}

#[test]
fn invalid_inputs() {
    assert!(SparsityMoment::new(DVector::from_vec(vec![1.0, -1.0])).is_err());
    assert!(SparsityMoment::new(DVector::from_vec(vec![f64::NAN])).is_err());
    assert!(solve_stationarity(1.0, -0.5, 1.0, 0.5).is_err());
    assert!(solve_stationarity(0.0, 0.5, 1.0, -0.5).is_err());
    assert!(solve_stationarity(1.0, 0.0, 1.0, 1.0).is_err());
    let hyper = HyperModelConfig::ias(Coupling::Joint, 1.0, 1.0, 1.0, 2).unwrap();
    let s = SparsityMoment::new(DVector::from_element(2, 1.0)).unwrap();
    assert!(theta_update_ias(&s, &hyper, 1).is_err());
    let short = SparsityMoment::new(DVector::from_element(1, 1.0)).unwrap();
    let ok = HyperModelConfig::ias(Coupling::Joint, -1.0, 1.0, 1.0, 2).unwrap();
    assert!(theta_update_ias(&short, &ok, 1).is_err());
    assert!(theta_update_gsbl(&s, 0.5, &DVector::from_element(2, 1.0), 1).is_err());
}
