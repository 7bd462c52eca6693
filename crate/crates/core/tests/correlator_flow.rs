mod common;

use common::{cone_window_density, dense_expectation, line_fit, rel};
use holomera::flow::{
    aligned_sites, connected_correlator, correlator_direct, crossover_curve, crossover_fit, cs_residual, exponent_of,
    geometric_scales, power_law_curve, rescale_covariance, truncated_cs_residual, truncated_curve, FlowCurve, StateRef,
};
use holomera::mera::{build_finite_range, build_scale_invariant, CapState, FiniteRangeMera};
use holomera::optimizer::fixed_point_density;
use holomera::superop::{build_scaling_superoperator, spectral_decompose};
use holomera::Tensor;
use proptest::prelude::*;

#[test]
fn scale_invariant_correlators_follow_the_flow_law() {
    for (chi, seed) in [(2, 0), (3, 4)] {
        let si = build_scale_invariant(chi, 3, seed).unwrap();
        let set = spectral_decompose(&build_scaling_superoperator(&si).unwrap()).unwrap();
        let prof = fixed_point_density(&si).unwrap();
        let state = StateRef::ScaleInvariant { mera: &si, profile: &prof };
        let a = set.real_nontrivial()[0];
        let op = &set.operators[a];
        let lam = op.lambda.re;
        let rs = [3u64, 9, 27, 81, 243];
        let c: Vec<f64> = rs.iter().map(|&r| correlator_direct(state, &op.op, &op.op, r).unwrap()).collect();
        for k in 1..c.len() {
            assert!(rel(c[k], c[k - 1] * lam * lam) < 1e-8, "chi {chi}: step {k}");
        }
        let x: Vec<f64> = rs.iter().map(|&r| (r as f64).ln()).collect();
        let y: Vec<f64> = c.iter().map(|v| v.abs().ln()).collect();
        let (slope, _, _) = line_fit(&x, &y);
        assert!((slope + 2.0 * op.delta).abs() < 1e-6);

        let curve = FlowCurve::new(rs.iter().map(|&r| r as f64).zip(c).collect(), a, a, 2.0 * op.delta, "si").unwrap();
        assert!(cs_residual(&curve, 2.0 * op.delta).unwrap().iter().all(|r| r.abs() < 1e-6));
        let cov = rescale_covariance(&curve, 3f64.ln()).unwrap();
        assert_eq!(cov.pairs.len(), 4);
        assert!(cov.max_relative_error < 1e-8);
    }
}

fn connected_oracle(fr: &FiniteRangeMera, a: &Tensor, b: &Tensor, q: u32) -> f64 {
    let (x, y) = aligned_sites(q);
    let (n, rho) = cone_window_density(fr, x, y);
    let sites = (y - x + 1) as usize;
    let d = fr.physical_dim();
    assert_eq!(n, d.pow(sites as u32));
    let ab = dense_expectation(sites, d, &rho, &[(0, a.data()), (sites - 1, b.data())]);
    let ea = dense_expectation(sites, d, &rho, &[(0, a.data())]);
    let eb = dense_expectation(sites, d, &rho, &[(sites - 1, b.data())]);
    (ab - ea * eb).re
}

#[test]
fn finite_range_correlators_match_dense_oracle() {
    let a = Tensor::from_real(vec![2, 2], &[0.3, 1.0, 1.0, -0.7]).unwrap();
    let b = Tensor::from_real(vec![2, 2], &[1.0, 0.2, 0.2, -1.0]).unwrap();
    for (wstar, seed) in [(1, 3), (2, 8)] {
        for cap in [CapState::zero(2), CapState::MaximallyMixed] {
            let fr = build_finite_range(2, 3, wstar, cap.clone(), seed).unwrap();
            for q in 1..=2u32 {
                let got = connected_correlator(&fr, &a, &b, 3u64.pow(q)).unwrap();
                let want = connected_oracle(&fr, &a, &b, q);
                assert!((got - want).abs() < 1e-12, "w* {wstar} {} q {q}: {got} vs {want}", cap.kind());
            }
        }
    }
}

#[test]
fn product_cap_correlators_have_compact_support() {
    let fr = build_finite_range(2, 3, 2, CapState::zero(2), 1).unwrap();
    let a = Tensor::from_real(vec![2, 2], &[0.0, 1.0, 1.0, 0.0]).unwrap();
    let c = connected_correlator(&fr, &a, &a, 729).unwrap();
    assert!(c.abs() < 1e-14);
}

#[test]
fn crossover_fit_recovers_joint_parameters() {
    let (eta, zstar) = (0.4, 81.0);
    let z: Vec<f64> = geometric_scales(1.0, 3.0, 8);
    let curve = crossover_curve(&z, eta, zstar, 2.5).unwrap();
    let fit = crossover_fit(&curve, zstar).unwrap();
    let (e, k, c) = fit.joint.unwrap();
    assert!((e - eta).abs() < 1e-10 && (k - eta / zstar).abs() < 1e-12 && (c - 2.5f64.ln()).abs() < 1e-10);
    assert!(fit.rate.unwrap() > 0.0);
    assert!(crossover_fit(&power_law_curve(&z[..3], eta, 1.0).unwrap(), zstar).is_err());
}

#[test]
fn separations_must_be_powers_of_three() {
    let fr = build_finite_range(2, 3, 1, CapState::MaximallyMixed, 0).unwrap();
    let a = Tensor::identity(2);
    assert!(connected_correlator(&fr, &a, &a, 10).is_err());
    assert!(FlowCurve::new(vec![(2.0, 1.0), (1.0, 1.0)], 0, 0, 0.0, "x").is_err());
    assert!(FlowCurve::new(vec![(1.0, f64::NAN)], 0, 0, 0.0, "x").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_residual_vanishes_on_power_laws(eta in 0.01f64..4.0, c1 in 0.1f64..10.0, ratio in 1.5f64..4.0) {
        let z = geometric_scales(1.0, ratio, 6);
        let res = cs_residual(&power_law_curve(&z, eta, c1).unwrap(), eta).unwrap();
        prop_assert!(res.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn truncated_residual_vanishes_on_its_family(eta in 0.01f64..4.0, zstar in 9.0f64..200.0, amp in 0.1f64..10.0) {
        let z = geometric_scales(1.0, 3.0, 7);
        let res = truncated_cs_residual(&truncated_curve(&z, eta, zstar, amp).unwrap(), eta, zstar).unwrap();
        prop_assert!(res.iter().all(|r| r.abs() < 1e-6));
    }

    #[test]
    fn exponents_roundtrip(q in 0u32..30) {
        prop_assert_eq!(exponent_of(3u64.pow(q), 3), Some(q));
        if q > 0 {
            prop_assert_eq!(exponent_of(3u64.pow(q) + 1, 3), None);
        }
        let (x, y) = aligned_sites(q.min(20));
        prop_assert_eq!(y - x, 3i64.pow(q.min(20)));
    }
}
