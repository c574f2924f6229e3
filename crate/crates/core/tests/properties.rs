//! Property tests over seeded random instances.

use proptest::prelude::*;

use ppi_core::beurling::{factor_invariant_jk, reconstruct, verify_factorization, FactorizationJson};
use ppi_core::hardy::{hankel, inner_report, toeplitz, SymbolJson};
use ppi_core::lattice::{
    chain_subspace, chain_violation_witness, commutant_basis, enumerate_admissible_chains,
    enumerate_assignments, is_hyperinvariant_with, is_invariant, shift_sum, Chain,
};
use ppi_core::numkit::{
    intersect, op_norm, range_scaled, subspace_gap, MatrixJson, Subspace,
    SubspaceJson, Tol,
};
use ppi_core::pisom::{hw_decompose, is_partial_isometry, is_power_partial_isometry};
use ppi_core::random::{
    analytic_symbol, conjugated_ppi, gaussian, laurent_symbol, partial_isometry, potapov_inner, rng,
    TestRng,
};
use ppi_core::selftest::orbit_span;

fn tol() -> Tol {
    Tol::default()
}

fn random_span(g: &mut TestRng, d: usize, r: usize) -> Subspace {
    if r == 0 {
        return Subspace::zero(d);
    }
    range_scaled(&gaussian(g, d, r.min(d)), tol(), 1.0).unwrap()
}

fn parts_strategy() -> impl Strategy<Value = Vec<(usize, usize)>> {
    proptest::collection::btree_map(1usize..=4, 1usize..=2, 1..=3)
        .prop_map(|m| m.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_isometry_verdicts_agree(seed in any::<u64>(), d in 1usize..10, r in 0usize..10) {
        let mut g = rng(seed);
        let t = partial_isometry(&mut g, d, r.min(d));
        let rep = is_partial_isometry(&t, tol()).unwrap();
        prop_assert!(rep.is_pi && rep.verdicts_agree());
        let scaled = &t * ppi_core::numkit::C64::new(1.5, 0.0);
        let bad = is_partial_isometry(&scaled, tol()).unwrap();
        prop_assert!(bad.verdicts_agree());
        prop_assert_eq!(bad.is_pi, r.min(d) == 0);
    }

    #[test]
    fn decomposition_recovers_blocks(
        seed in any::<u64>(),
        u in 0usize..3,
        parts in parts_strategy(),
    ) {
        let mut g = rng(seed);
        let (t, _) = conjugated_ppi(&mut g, u, &parts);
        prop_assume!(t.nrows() > 0);
        prop_assert!(is_power_partial_isometry(&t, tol()).unwrap().is_ppi);
        let dec = hw_decompose(&t, tol()).unwrap();
        prop_assert_eq!(dec.unitary_dim, u);
        let expected: std::collections::BTreeMap<usize, usize> = parts.into_iter().collect();
        prop_assert_eq!(dec.multiplicities, expected);
        prop_assert!(dec.residual <= 1e-8);
    }

    #[test]
    fn toeplitz_is_multiplicative_on_analytic_symbols(
        seed in any::<u64>(),
        a in 1usize..3, b in 1usize..3, c in 1usize..3,
        da in 0usize..3, db in 0usize..3,
    ) {
        let mut g = rng(seed);
        let phi = analytic_symbol(&mut g, a, b, da);
        let psi = analytic_symbol(&mut g, b, c, db);
        let n = 6;
        let lhs = toeplitz(&phi.mul(&psi).unwrap(), n, n);
        let rhs = toeplitz(&phi, n, n) * toeplitz(&psi, n, n);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn hankel_adjoint_is_hankel_of_tilde(
        seed in any::<u64>(), lo in -4i64..=0, hi in 0i64..=3,
    ) {
        let mut g = rng(seed);
        let phi = laurent_symbol(&mut g, 2, 3, lo, hi);
        let n = 5;
        let diff = hankel(&phi, n, n).adjoint() - hankel(&phi.tilde(), n, n);
        prop_assert!(diff.norm() < 1e-14);
    }

    #[test]
    fn potapov_products_are_inner(seed in any::<u64>(), n in 1usize..4, f in 0usize..4) {
        let mut g = rng(seed);
        let theta = potapov_inner(&mut g, n, f);
        let rep = inner_report(&theta, tol());
        prop_assert!(rep.inner());
        prop_assert!(op_norm(&toeplitz(&theta, 6, 6 + f)) <= 1.0 + 1e-12);
    }

    #[test]
    fn factorization_round_trips(seed in any::<u64>(), e in 1usize..4, k in 1usize..5, cols in 1usize..3) {
        let mut g = rng(seed);
        let m = orbit_span(&gaussian(&mut g, e * k, cols.min(e)), e, k);
        let f = factor_invariant_jk(&m, e, k, tol()).unwrap();
        let res = verify_factorization(&f, &m, tol());
        prop_assert!(res.passed(tol()), "{:?}", res);
        let back = reconstruct(&f, tol()).unwrap();
        prop_assert!(back.approx_eq(&m, tol()).unwrap());
    }

    #[test]
    fn intersection_complement_duality(seed in any::<u64>(), d in 2usize..8, a in 0usize..8, b in 0usize..8) {
        let mut g = rng(seed);
        let s1 = random_span(&mut g, d, a);
        let s2 = random_span(&mut g, d, b);
        let meet = intersect(&s1, &s2, tol()).unwrap();
        let join = s1.complement().join(&s2.complement(), tol()).unwrap();
        prop_assert_eq!(meet.dim() + join.dim(), d);
        prop_assert!(meet.complement().approx_eq(&join, tol()).unwrap());
    }

    #[test]
    fn admissible_chains_are_exactly_the_hyperinvariant_ones(parts in parts_strategy()) {
        let t = shift_sum(&parts);
        let basis = commutant_basis(&t, tol()).unwrap();
        let admissible = enumerate_admissible_chains(&parts).unwrap();
        for chain in enumerate_assignments(&parts).unwrap() {
            let m = chain_subspace(&chain);
            prop_assert!(is_invariant(&m, &t, tol()).unwrap().invariant);
            let hyper = is_hyperinvariant_with(&m, &basis, tol()).unwrap().hyperinvariant;
            prop_assert_eq!(hyper, chain.is_admissible());
            prop_assert_eq!(admissible.contains(&chain), chain.is_admissible());
            prop_assert_eq!(chain_violation_witness(&chain).is_some(), !chain.is_admissible());
        }
    }

    #[test]
    fn matrix_and_subspace_json_round_trip(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6) {
        let mut g = rng(seed);
        let a = gaussian(&mut g, rows, cols);
        let js = serde_json::to_string(&MatrixJson::from_matrix(&a)).unwrap();
        let back: MatrixJson = serde_json::from_str(&js).unwrap();
        prop_assert_eq!(back.to_matrix().unwrap(), a.clone());
        let s = range_scaled(&a, tol(), 1.0).unwrap();
        let js = serde_json::to_string(&SubspaceJson::from_subspace(&s)).unwrap();
        let back: SubspaceJson = serde_json::from_str(&js).unwrap();
        let back = back.to_subspace(tol()).unwrap();
        prop_assert!(subspace_gap(&back, &s).unwrap() < 1e-12);
    }

    #[test]
    fn symbol_and_factorization_json_round_trip(seed in any::<u64>(), lo in -2i64..=0, hi in 0i64..=2) {
        let mut g = rng(seed);
        let phi = laurent_symbol(&mut g, 2, 2, lo, hi);
        let js = serde_json::to_string(&phi.to_json()).unwrap();
        let back: SymbolJson = serde_json::from_str(&js).unwrap();
        prop_assert_eq!(back.to_symbol().unwrap(), phi);
        let m = orbit_span(&gaussian(&mut g, 4, 1), 2, 2);
        let f = factor_invariant_jk(&m, 2, 2, tol()).unwrap();
        let js = serde_json::to_string(&f.to_json(None)).unwrap();
        let back: FactorizationJson = serde_json::from_str(&js).unwrap();
        prop_assert_eq!(back.to_factorization().unwrap(), f);
    }
}

#[test]
fn chain_subspaces_have_the_chain_dimension() {
    let parts = vec![(1, 2), (3, 1), (4, 2)];
    for chain in enumerate_assignments(&parts).unwrap() {
        assert_eq!(chain_subspace(&chain).dim(), chain.dim());
    }
    let c = Chain::new(parts, vec![1, 2, 3]).unwrap();
    assert!(c.is_admissible());
}
