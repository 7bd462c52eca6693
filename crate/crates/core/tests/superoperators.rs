use holomera::mera::{build_scale_invariant, Layer};
use holomera::superop::{apply_n_times, ascend_n_times, build_scaling_superoperator, spectral_decompose, trace_product, ScalingSuperoperator};
use holomera::{Tensor, C64};
use proptest::prelude::*;

/// `w^†(1 ⊗ O ⊗ 1)w` summed entry by entry.
fn ascend_oracle(layer: &Layer, op: &Tensor) -> Tensor {
    let w = layer.w();
    let chi = w.shape()[3];
    let d = w.shape()[0];
    Tensor::from_fn(&[chi, chi], |ix| {
        let mut s = C64::new(0.0, 0.0);
        for f0 in 0..d {
            for f2 in 0..d {
                for f1 in 0..d {
                    for g1 in 0..d {
                        s += w.get(&[f0, f1, f2, ix[0]]).conj() * op.get(&[f1, g1]) * w.get(&[f0, g1, f2, ix[1]]);
                    }
                }
            }
        }
        s
    })
}

fn test_operator(chi: usize, k: u64) -> Tensor {
    Tensor::from_fn(&[chi, chi], |ix| C64::new(((ix[0] * 7 + ix[1] * 3) as u64 ^ k) as f64 % 5.0 - 2.0, (ix[0] as f64 - ix[1] as f64) * 0.3))
}

#[test]
fn unital_for_many_seeds() {
    for chi in 2..=4 {
        for seed in 0..20 {
            let s = build_scaling_superoperator(&build_scale_invariant(chi, 3, seed).unwrap()).unwrap();
            assert!(s.unitality_residual() < 1e-12, "chi {chi} seed {seed}");
        }
    }
}

#[test]
fn spectrum_is_a_contraction_with_identity_on_top() {
    for (chi, seed) in [(2, 0), (3, 5), (4, 9)] {
        let si = build_scale_invariant(chi, 3, seed).unwrap();
        let set = spectral_decompose(&build_scaling_superoperator(&si).unwrap()).unwrap();
        assert_eq!(set.len(), chi * chi);
        assert!((set.operators[0].lambda - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(set.operators[0].delta.abs() < 1e-12);
        assert!(set.eigenvalues().iter().all(|l| l.norm() <= 1.0 + 1e-12));
        assert!(set.dimensions().windows(2).all(|d| d[0] <= d[1] + 1e-12));
        let id = &set.operators[0].op;
        let scale = id.get(&[0, 0]);
        assert!(id.max_abs_diff(&Tensor::identity(chi).scale(scale)) < 1e-10);
    }
}

#[test]
fn eigen_operators_are_biorthonormal() {
    let si = build_scale_invariant(3, 3, 17).unwrap();
    let s = build_scaling_superoperator(&si).unwrap();
    let set = spectral_decompose(&s).unwrap();
    assert!(!set.defective);
    for (a, oa) in set.operators.iter().enumerate() {
        let img = s.apply(&oa.op).unwrap();
        assert!(img.max_abs_diff(&oa.op.scale(oa.lambda)) < 1e-10, "alpha {a}");
        assert!((oa.delta + oa.lambda.norm().ln() / 3f64.ln()).abs() < 1e-12);
        for (b, ob) in set.operators.iter().enumerate() {
            let t = trace_product(&oa.dual.dagger(), &ob.op);
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((t - C64::new(want, 0.0)).norm() < 1e-9, "({a}, {b}): {t}");
        }
    }
    for &i in &set.real_nontrivial() {
        let op = &set.operators[i].op;
        assert!(op.max_abs_diff(&op.dagger()) < 1e-10);
    }
}

#[test]
fn binary_and_rectangular_layers_are_rejected() {
    assert!(ScalingSuperoperator::from_layer(&Layer::random(2, 2, 2, 0).unwrap()).is_err());
    assert!(ScalingSuperoperator::from_layer(&Layer::random(2, 3, 3, 0).unwrap()).is_err());
    let s = build_scaling_superoperator(&build_scale_invariant(2, 3, 0).unwrap()).unwrap();
    assert!(s.apply(&Tensor::identity(3)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matrix_matches_explicit_channel(chi in 2usize..5, seed in any::<u64>(), k in 0u64..100) {
        let si = build_scale_invariant(chi, 3, seed).unwrap();
        let s = build_scaling_superoperator(&si).unwrap();
        let op = test_operator(chi, k);
        let want = ascend_oracle(si.layer(), &op);
        prop_assert!(s.apply(&op).unwrap().max_abs_diff(&want) < 1e-12);
        let n3 = apply_n_times(&s, &op, 3).unwrap();
        prop_assert!(n3.max_abs_diff(&ascend_n_times(si.layer(), &op, 3).unwrap()) < 1e-12);
    }

    #[test]
    fn channel_preserves_hermiticity_and_positivity(chi in 2usize..5, seed in any::<u64>()) {
        let si = build_scale_invariant(chi, 3, seed).unwrap();
        let s = build_scaling_superoperator(&si).unwrap();
        let v: Vec<C64> = (0..chi).map(|i| C64::new(1.0, i as f64)).collect();
        let p = Tensor::from_fn(&[chi, chi], |ix| v[ix[0]] * v[ix[1]].conj());
        let img = s.apply(&p).unwrap();
        prop_assert!(img.max_abs_diff(&img.dagger()) < 1e-12);
        prop_assert!(holomera::linalg::herm_eigenvalues(&img)[0] > -1e-12);
    }
}
