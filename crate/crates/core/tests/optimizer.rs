mod common;

use common::{critical_energy_per_site, free_fermion_ground, ising_dimensions, ising_low_spectrum, rel};
use holomera::optimizer::{
    energy_by_contraction, energy_per_site, fixed_point_density, ising_critical_hamiltonian, ising_ground_energy,
    ising_hamiltonian, optimize, LocalHamiltonian,
};
use holomera::{Tensor, C64};
use proptest::prelude::*;

#[test]
fn lanczos_matches_free_fermions() {
    for n in [8usize, 10, 12] {
        for g in [0.7, 1.0, 1.5] {
            let e = ising_low_spectrum(n, g, 1)[0];
            let want = free_fermion_ground(n, g);
            assert!((e - want).abs() < 1e-9 * n as f64, "n {n} g {g}: {e} vs {want}");
        }
    }
}

#[test]
fn finite_size_dimensions_extrapolate_to_ising() {
    let (s, e) = ising_dimensions(&[10, 12, 14, 16]);
    assert!((s - 0.125).abs() < 2e-3, "sigma {s}");
    assert!((e - 1.0).abs() < 2e-2, "epsilon {e}");
}

#[test]
fn exact_energy_matches_long_chains() {
    assert!((ising_ground_energy(1.0) - critical_energy_per_site()).abs() < 1e-12);
    for g in [0.3, 1.0, 2.0] {
        let n = 4000;
        let finite = free_fermion_ground(n, g) / n as f64;
        assert!((ising_ground_energy(g) - finite).abs() < 1e-6, "g {g}");
    }
}

#[test]
fn optimisation_is_variational_and_isometric() {
    let h = ising_critical_hamiltonian();
    let (m, rep) = optimize(&h, 2, 40, 3).unwrap();
    let exact = ising_ground_energy(1.0);
    assert_eq!(rep.energies.len(), rep.isometry_residuals.len());
    assert!(rep.energies.iter().all(|&e| e >= exact - 1e-10));
    assert!(rep.isometry_residuals.iter().all(|&r| r < 1e-12));
    let last = *rep.energies.last().unwrap();
    assert!(last < rep.energies[0]);
    // the per-sweep trace uses a partly converged fixed point
    let e = energy_per_site(&m, &h).unwrap();
    assert!(e >= exact - 1e-10 && (e - last).abs() < 1e-3);
    assert!((energy_by_contraction(&m, &h).unwrap() - e).abs() < 1e-9);
}

#[test]
fn optimisation_is_deterministic() {
    let h = ising_hamiltonian(1.2);
    let (a, ra) = optimize(&h, 3, 8, 11).unwrap();
    let (b, rb) = optimize(&h, 3, 8, 11).unwrap();
    assert_eq!(ra.energies, rb.energies);
    assert_eq!(a.layer().w().data(), b.layer().w().data());
}

#[test]
fn bad_inputs_are_rejected() {
    let h = ising_critical_hamiltonian();
    assert!(optimize(&h, 1, 5, 0).is_err());
    let mut bad = h.h.clone();
    bad.set(&[0, 1], C64::new(0.0, 1.0));
    assert!(optimize(&LocalHamiltonian { h: bad, g: 1.0 }, 2, 5, 0).is_err());
    let wrong = LocalHamiltonian { h: Tensor::identity(8), g: 0.0 };
    assert!(optimize(&wrong, 2, 5, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_network_energy_is_above_exact(seed in any::<u64>(), g in 0.2f64..2.0) {
        let m = holomera::mera::build_scale_invariant(2, 3, seed).unwrap();
        let e = energy_per_site(&m, &ising_hamiltonian(g)).unwrap();
        prop_assert!(e >= ising_ground_energy(g) - 1e-10);
        let rho = fixed_point_density(&m).unwrap().pair_matrix(0);
        prop_assert!(rel(rho.trace().re, 1.0) < 1e-12);
    }
}
