use holomera::linalg::{eig_general, herm_eig, qr_positive, random_isometry, svd, isometry_residual};
use holomera::tensor::{ncon, TensorRecord};
use holomera::{Tensor, C64};
use proptest::prelude::*;

fn filled(shape: &[usize], seed: u64) -> Tensor {
    let mut k = seed;
    Tensor::from_fn(shape, |_| {
        k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let a = (k >> 33) as f64 / (1u64 << 31) as f64 - 0.5;
        let b = (k >> 11 & 0xfffff) as f64 / (1u64 << 20) as f64 - 0.5;
        C64::new(a, b)
    })
}

fn close(a: &Tensor, b: &Tensor, tol: f64) -> bool {
    a.shape() == b.shape() && a.max_abs_diff(b) < tol
}

#[test]
fn contraction_matches_explicit_sums() {
    // A[i,j,k] B[k,l,i] -> C[j,l]
    let a = filled(&[3, 4, 5], 1);
    let b = filled(&[5, 2, 3], 2);
    let got = a.contract(&b, &[(0, 2), (2, 0)]).unwrap();
    let want = Tensor::from_fn(&[4, 2], |ix| {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..3 {
            for k in 0..5 {
                s += a.get(&[i, ix[0], k]) * b.get(&[k, ix[1], i]);
            }
        }
        s
    });
    assert!(close(&got, &want, 1e-13));
}

#[test]
fn ncon_matches_explicit_sums() {
    let a = filled(&[2, 3, 2], 3);
    let b = filled(&[3, 2], 4);
    let c = filled(&[2, 2, 4], 5);
    let got = ncon(&[&a, &b, &c], &[&[1, 2, -1], &[2, 3], &[1, 3, -2]]).unwrap();
    let want = Tensor::from_fn(&[2, 4], |ix| {
        let mut s = C64::new(0.0, 0.0);
        for p in 0..2 {
            for q in 0..3 {
                for r in 0..2 {
                    s += a.get(&[p, q, ix[0]]) * b.get(&[q, r]) * c.get(&[p, r, ix[1]]);
                }
            }
        }
        s
    });
    assert!(close(&got, &want, 1e-13));
}

#[test]
fn bad_contractions_are_errors() {
    let a = filled(&[2, 3], 1);
    let b = filled(&[4, 2], 2);
    assert!(a.contract(&b, &[(1, 0)]).is_err());
    assert!(a.contract(&b, &[(5, 0)]).is_err());
    assert!(a.contract(&b, &[(0, 1), (0, 1)]).is_err());
    assert!(ncon(&[&a, &b], &[&[1, -1], &[-2, 2]]).is_err());
    assert!(Tensor::new(vec![2, 2], vec![C64::new(0.0, 0.0); 3]).is_err());
}

#[test]
fn partial_trace_matches_explicit_sum() {
    let t = filled(&[3, 2, 3, 2], 9);
    let got = t.partial_trace(&[(0, 2)]).unwrap();
    let want = Tensor::from_fn(&[2, 2], |ix| (0..3).map(|i| t.get(&[i, ix[0], i, ix[1]])).sum());
    assert!(close(&got, &want, 1e-14));
}

#[test]
fn svd_reconstructs() {
    let m = filled(&[6, 4], 7);
    let (u, s, v) = svd(&m);
    assert!(s.windows(2).all(|w| w[0] >= w[1]));
    let sd = Tensor::from_fn(&[4, 4], |ix| if ix[0] == ix[1] { C64::new(s[ix[0]], 0.0) } else { C64::new(0.0, 0.0) });
    assert!(close(&u.matmul(&sd).matmul(&v.dagger()), &m, 1e-13));
    assert!(isometry_residual(&u) < 1e-13 && isometry_residual(&v) < 1e-13);
}

#[test]
fn qr_has_positive_diagonal() {
    let m = filled(&[5, 3], 8);
    let (q, r) = qr_positive(&m);
    assert!(close(&q.matmul(&r), &m, 1e-13));
    for i in 0..3 {
        assert!(r.get(&[i, i]).re >= 0.0 && r.get(&[i, i]).im.abs() < 1e-15);
        for j in 0..i {
            assert!(r.get(&[i, j]).norm() < 1e-14);
        }
    }
}

#[test]
fn hermitian_and_general_eigensystems() {
    let a = filled(&[4, 4], 10);
    let h = a.add(&a.dagger()).unwrap();
    let (ev, v) = herm_eig(&h);
    assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    let d = Tensor::from_fn(&[4, 4], |ix| if ix[0] == ix[1] { C64::new(ev[ix[0]], 0.0) } else { C64::new(0.0, 0.0) });
    assert!(close(&v.matmul(&d).matmul(&v.dagger()), &h, 1e-12));

    let dec = eig_general(&a).unwrap();
    assert!(close(&dec.reconstruct(), &a, 1e-10));
    for i in 0..4 {
        let x = dec.right_vector(i);
        let lam = dec.eigenvalues[i];
        for r in 0..4 {
            let ax: C64 = (0..4).map(|c| a.get(&[r, c]) * x[c]).sum();
            assert!((ax - lam * x[r]).norm() < 1e-10);
        }
    }
}

#[test]
fn random_isometry_is_seeded() {
    let a = random_isometry(9, 3, 42).unwrap();
    assert!(isometry_residual(&a) < 1e-14);
    assert_eq!(a, random_isometry(9, 3, 42).unwrap());
    assert_ne!(a, random_isometry(9, 3, 43).unwrap());
    assert!(random_isometry(2, 3, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permute_roundtrips(dims in prop::collection::vec(1usize..4, 1..5), seed in any::<u64>(), rot in 0usize..5) {
        let t = filled(&dims, seed);
        let n = dims.len();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let mut inv = vec![0; n];
        for (i, &o) in order.iter().enumerate() {
            inv[o] = i;
        }
        let p = t.permute(&order).unwrap();
        prop_assert_eq!(p.shape().to_vec(), order.iter().map(|&o| dims[o]).collect::<Vec<_>>());
        prop_assert_eq!(p.permute(&inv).unwrap(), t);
    }

    #[test]
    fn record_roundtrip_is_bit_exact(dims in prop::collection::vec(1usize..4, 1..4), seed in any::<u64>(), real in any::<bool>()) {
        let mut t = filled(&dims, seed);
        if real {
            t = Tensor::from_fn(&dims, |ix| C64::new(t.get(ix).re, 0.0));
        }
        let text = serde_json::to_string(&TensorRecord::from(&t)).unwrap();
        let rec: TensorRecord = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(rec.complex, !real);
        prop_assert_eq!(Tensor::try_from(&rec).unwrap(), t);
    }

    #[test]
    fn matmul_is_associative(n in 1usize..5, seed in any::<u64>()) {
        let (a, b, c) = (filled(&[n, n], seed), filled(&[n, n], seed ^ 1), filled(&[n, n], seed ^ 2));
        prop_assert!(close(&a.matmul(&b).matmul(&c), &a.matmul(&b.matmul(&c)), 1e-13));
        prop_assert!((a.matmul(&b).trace() - b.matmul(&a).trace()).norm() < 1e-13);
    }
}
