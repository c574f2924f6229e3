//! Runs every acceptance criterion at desk scale and prints one line each.
//!
//! `cargo test -p ppi-core --test acceptance -- --nocapture` shows the table.

use ppi_core::selftest::{run_criterion, Scale, CRITERIA};

const SEED: u64 = 42;

fn run(id: u32) {
    let out = run_criterion(id, SEED, Scale::Desk).expect("known criterion");
    println!("{out}");
    assert!(out.passed, "{out}");
}

#[test]
fn c01_partial_isometry_criteria() {
    run(1);
}

#[test]
fn c02_projection_calculus() {
    run(2);
}

#[test]
fn c03_canonical_decomposition() {
    run(3);
}

#[test]
fn c04_truncated_shift_reducing_subspaces() {
    run(4);
}

#[test]
fn c05_invariant_subspace_factorization() {
    run(5);
}

#[test]
fn c06_symbol_invariant_subspaces() {
    run(6);
}

#[test]
fn c07_scalar_inner_monomials() {
    run(7);
}

#[test]
fn c08_single_block_hyperinvariance() {
    run(8);
}

#[test]
fn c09_chain_hyperinvariance() {
    run(9);
}

#[test]
fn c10_shift_model_counterexample() {
    run(10);
}

#[test]
fn c11_divisibility_conditions() {
    run(11);
}

#[test]
fn criteria_table_is_complete() {
    let ids: Vec<u32> = CRITERIA.iter().map(|&(id, _)| id).collect();
    assert_eq!(ids, (1..=11).collect::<Vec<_>>());
}
