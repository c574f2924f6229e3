//! Seeded end-to-end checks of the whole toolkit.
//!
//! Each criterion draws its own instances from a seed, runs the relevant
//! routines and compares against independent constructions. [`Scale::Desk`]
//! runs the full sample counts; [`Scale::Smoke`] runs a tenth of them and
//! keeps random operators at dimension 8 or less.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beurling::{
    diagonal_splitting_form, diagonal_triple, divisibility_witness, factor_invariant_jk,
    hyper_candidate_cnu, hyper_candidate_pure, intertwiner_residual, invariant_from_symbols,
    random_symbol_triple, sampled_hyperinvariance, shift_model_counterexample, verify_factorization,
    CnuForm, CnuSpaces, IntertwinerForm, IntertwinerSampler,
};
use crate::error::Result;
use crate::hardy::{inner_report, is_inner, jk_matrix, monomial_certificate, Symbol};
use crate::lattice::{
    chain_subspace, chain_violation_witness, commutant_basis, cyclic_closure, enumerate_admissible_chains,
    enumerate_assignments, is_hyperinvariant_with, is_reducing, joint_commutant_basis,
    product_subspace, reducing_factor_jk, shift_sum, Chain,
};
use crate::numkit::{
    hermitian_eigen, hstack, identity, intersect, range_scaled, subspace_gap, Matrix, Subspace, Tol,
    Vector, C64,
};
use crate::pisom::{
    burdak_identity_check, hw_decompose, is_partial_isometry, projection_calculus_check,
};
use crate::random::{
    complex_normal, conjugated_ppi, gaussian, isometric_inner, laurent_symbol, partial_isometry,
    potapov_inner, rng, TestRng,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Smoke,
    Desk,
}

impl Scale {
    fn count(self, desk: usize) -> usize {
        match self {
            Scale::Desk => desk,
            Scale::Smoke => desk.div_ceil(10),
        }
    }

    /// Cap on the dimension of randomly generated operators.
    fn dim(self, desk: usize) -> usize {
        match self {
            Scale::Desk => desk,
            Scale::Smoke => desk.min(8),
        }
    }
}

pub const CRITERIA: [(u32, &str); 11] = [
    (1, "partial_isometry_criteria"),
    (2, "projection_calculus"),
    (3, "canonical_decomposition"),
    (4, "truncated_shift_reducing_subspaces"),
    (5, "invariant_subspace_factorization"),
    (6, "symbol_invariant_subspaces"),
    (7, "scalar_inner_monomials"),
    (8, "single_block_hyperinvariance"),
    (9, "chain_hyperinvariance"),
    (10, "shift_model_counterexample"),
    (11, "divisibility_conditions"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    /// Largest residual that had to stay small.
    pub worst_residual: f64,
    /// Empty on success, otherwise the first failures.
    pub failures: Vec<String>,
    pub seconds: f64,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<36} samples={:<5} worst={:.2e} time={:.2}s",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.samples,
            self.worst_residual,
            self.seconds
        )?;
        for msg in &self.failures {
            write!(f, "\n      {msg}")?;
        }
        Ok(())
    }
}

/// Accumulates residual bounds and failure messages for one criterion.
struct Tally {
    samples: usize,
    worst: f64,
    failures: Vec<String>,
    total_failures: usize,
}

impl Tally {
    fn new() -> Self {
        Tally {
            samples: 0,
            worst: 0.0,
            failures: Vec::new(),
            total_failures: 0,
        }
    }

    fn fail(&mut self, msg: String) {
        self.total_failures += 1;
        if self.failures.len() < 5 {
            self.failures.push(msg);
        }
    }

    /// Records `value ≤ bound`.
    fn bound(&mut self, what: &str, value: f64, bound: f64) {
        if value.is_finite() {
            self.worst = self.worst.max(value);
        }
        if !(value <= bound) {
            self.fail(format!("{what}: {value:.3e} > {bound:.0e}"));
        }
    }

    fn check(&mut self, what: &str, ok: bool) {
        if !ok {
            self.fail(what.to_string());
        }
    }

    fn result<T>(&mut self, what: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(format!("{what}: {e}"));
                None
            }
        }
    }

    fn finish(mut self, id: u32, start: Instant) -> CriterionOutcome {
        if self.total_failures > self.failures.len() {
            let more = self.total_failures - self.failures.len();
            self.failures.push(format!("... and {more} more"));
        }
        CriterionOutcome {
            id,
            name: CRITERIA[(id - 1) as usize].1.to_string(),
            passed: self.total_failures == 0,
            samples: self.samples,
            worst_residual: self.worst,
            failures: self.failures,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

/// Truncation degree of the Hardy-space criteria unless overridden.
pub const DEFAULT_DEGREE: usize = 8;

/// Smallest truncation degree the Hardy-space criteria accept.
pub const MIN_DEGREE: usize = 2 * crate::beurling::SAMPLE_DEGREE;

/// Runs one criterion at the default truncation degree; `None` for an unknown id.
pub fn run_criterion(id: u32, seed: u64, scale: Scale) -> Option<CriterionOutcome> {
    run_criterion_at(id, seed, scale, DEFAULT_DEGREE)
}

/// Runs one criterion with Hardy spaces truncated at `degree`.
pub fn run_criterion_at(id: u32, seed: u64, scale: Scale, degree: usize) -> Option<CriterionOutcome> {
    let mut r = rng(seed.wrapping_mul(1000).wrapping_add(id as u64));
    let start = Instant::now();
    let mut t = Tally::new();
    match id {
        1 => partial_isometry_criteria(&mut t, &mut r, scale),
        2 => projection_calculus(&mut t, &mut r, scale),
        3 => canonical_decomposition(&mut t, &mut r, scale),
        4 => reducing_subspaces(&mut t, &mut r, scale),
        5 => factorization(&mut t, &mut r, scale),
        6 => symbol_subspaces(&mut t, &mut r, scale, degree),
        7 => scalar_monomials(&mut t, &mut r, scale),
        8 => single_block(&mut t, &mut r, scale),
        9 => chains(&mut t, &mut r, scale),
        10 => counterexample(&mut t, &mut r, scale, degree),
        11 => divisibility(&mut t, &mut r, scale, degree),
        _ => return None,
    }
    Some(t.finish(id, start))
}

pub fn run_all(seed: u64, scale: Scale) -> Vec<CriterionOutcome> {
    run_all_at(seed, scale, DEFAULT_DEGREE)
}

pub fn run_all_at(seed: u64, scale: Scale, degree: usize) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .filter_map(|&(id, _)| run_criterion_at(id, seed, scale, degree))
        .collect()
}

fn tol() -> Tol {
    Tol::default()
}

fn partial_isometry_criteria(t: &mut Tally, r: &mut TestRng, scale: Scale) {
    for _ in 0..scale.count(100) {
        let d = r.random_range(1..=scale.dim(16));
        let rank = r.random_range(0..=d);
        let a = partial_isometry(r, d, rank);
        let Some(rep) = t.result("is_partial_isometry", is_partial_isometry(&a, tol())) else {
            continue;
        };
        t.samples += 1;
        t.bound(&format!("d={d} r={rank} max residual"), rep.residuals.max(), 1e-10);
        t.check(&format!("d={d} r={rank} verdicts"), rep.is_pi && rep.verdicts_agree());

        // Non-example: a generic perturbation of relative size 0.1.
        let g = gaussian(r, d, d);
        let b = &a + g * C64::new(0.1 / (d as f64).sqrt(), 0.0);
        if let Some(rep) = t.result("is_partial_isometry", is_partial_isometry(&b, tol())) {
            t.samples += 1;
            t.check(
                &format!("perturbed d={d} r={rank}: verdicts {:?}", rep.verdicts),
                rep.verdicts.iter().all(|&v| !v),
            );
        }
    }
}

/// Random `(k, m)` blocks with `k ≤ max_k` and total dimension at most `budget`.
fn random_blocks(r: &mut TestRng, max_k: usize, budget: usize) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut used = 0;
    for k in 1..=max_k {
        let cap = (budget - used) / k;
        let m = r.random_range(0..=cap.min(3));
        if m > 0 {
            blocks.push((k, m));
            used += k * m;
        }
    }
    blocks
}

fn projection_calculus(t: &mut Tally, r: &mut TestRng, scale: Scale) {
    for _ in 0..scale.count(50) {
        let cap = scale.dim(32);
        let u = r.random_range(0..=4);
        let blocks = random_blocks(r, 5, cap - u);
        let (a, _) = conjugated_ppi(r, u, &blocks);
        if a.nrows() == 0 {
            continue;
        }
        if let Some(rep) = t.result("projection_calculus_check", projection_calculus_check(&a, 6, tol())) {
            t.samples += 1;
            t.bound(&format!("blocks {blocks:?}"), rep.max(), 1e-10);
        }
    }
}

fn canonical_decomposition(t: &mut Tally, r: &mut TestRng, scale: Scale) {
    for _ in 0..scale.count(50) {
        let cap = scale.dim(64);
        let u = r.random_range(0..=8.min(cap / 2));
        let blocks = random_blocks(r, 6, cap - u);
        let (a, _) = conjugated_ppi(r, u, &blocks);
        if a.nrows() == 0 {
            continue;
        }
        let Some(dec) = t.result("hw_decompose", hw_decompose(&a, tol())) else {
            continue;
        };
        t.samples += 1;
        let expected: std::collections::BTreeMap<usize, usize> = blocks.iter().copied().collect();
        t.check(
            &format!("multiplicities {:?} vs {expected:?}", dec.multiplicities),
            dec.multiplicities == expected && dec.unitary_dim == u,
        );
        let q = &dec.conjugator;
        let conj = crate::numkit::residual_norm(&(q.adjoint() * &a * q - &dec.canonical), 1e-8);
        t.bound("conjugation residual", conj.max(dec.residual), 1e-8);
        for p in 1..=5 {
            if let Some(gap) = t.result("burdak_identity_check", burdak_identity_check(&a, p, tol())) {
                t.bound(&format!("identity gap p={p}"), gap, 1e-8);
            }
        }
    }
}

fn random_subspace(r: &mut TestRng, d: usize, dim: usize) -> Subspace {
    if dim == 0 {
        return Subspace::zero(d);
    }
    range_scaled(&gaussian(r, d, dim), tol(), 1.0).expect("finite")
}

fn reducing_subspaces(t: &mut Tally, r: &mut TestRng, scale: Scale) {
    let n = scale.count(100);
    for _ in 0..n {
        let e = r.random_range(1..=scale.dim(12) / 4);
        let k = r.random_range(1..=4);
        let jk = jk_matrix(e, k);

        // Forward: S ⊗ C^k is reducing and factors back to S.
        let s_dim = r.random_range(0..=e);
        let s = random_subspace(r, e, s_dim);
        let m = product_subspace(&s, k);
        t.samples += 1;
        if let Some(rep) = t.result("is_reducing", is_reducing(&m, &jk, tol())) {
            t.check(&format!("S ⊗ C^k not reducing (e={e}, k={k})"), rep.reducing);
        }
        if let Some(back) = t.result("reducing_factor_jk", reducing_factor_jk(&m, e, k, tol())) {
            let gap = if back.dim() == s.dim() { subspace_gap(&back, &s).unwrap_or(1.0) } else { 1.0 };
            t.bound(&format!("round trip e={e} k={k}"), gap, 1e-8);
        }

        // Converse: spectral subspaces of a Hermitian element of {J_k, J_k^*}'.
        let Some(basis) = t.result(
            "joint_commutant_basis",
            joint_commutant_basis(&[jk.clone(), jk.adjoint()], tol()),
        ) else {
            continue;
        };
        let mut h = Matrix::zeros(e * k, e * k);
        for b in &basis {
            h += b * complex_normal(r);
        }
        let h = &h + h.adjoint();
        for space in spectral_subspaces(&h, 1e-6) {
            t.samples += 1;
            if let Some(rep) = t.result("is_reducing", is_reducing(&space, &jk, tol())) {
                t.check("spectral subspace not reducing", rep.reducing);
            }
            t.result(
                &format!("spectral subspace of dim {} (e={e}, k={k})", space.dim()),
                reducing_factor_jk(&space, e, k, tol()),
            );
        }
    }
}

/// Eigenspaces of a Hermitian matrix, grouping eigenvalues closer than `sep`.
fn spectral_subspaces(h: &Matrix, sep: f64) -> Vec<Subspace> {
    let (vals, vecs) = hermitian_eigen(h);
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=vals.len() {
        if i == vals.len() || vals[i] - vals[i - 1] > sep {
            let basis = vecs.columns(start, i - start).into_owned();
            out.push(Subspace::from_orthonormal(basis, tol()).expect("orthonormal eigenvectors"));
            start = i;
        }
    }
    out
}

/// Span of `x, J x, ..., J^{k-1} x` for the columns of `x`.
pub fn orbit_span(x: &Matrix, e: usize, k: usize) -> Subspace {
    let j = jk_matrix(e, k);
    let mut cols = vec![x.clone()];
    for _ in 1..k {
        let next = &j * cols.last().expect("nonempty");
        cols.push(next);
    }
    let refs: Vec<&Matrix> = cols.iter().collect();
    range_scaled(&hstack(&refs), tol(), 1.0).expect("finite")
}

fn factorization(t: &mut Tally, r: &mut TestRng, scale: Scale) {
    for _ in 0..scale.count(200) {
        let e = r.random_range(1..=scale.dim(20) / 5);
        let k = r.random_range(1..=5.min(scale.dim(20) / e));
        let vectors = r.random_range(1..=e);
        let m = orbit_span(&gaussian(r, e * k, vectors), e, k);
        let Some(f) = t.result("factor_invariant_jk", factor_invariant_jk(&m, e, k, tol())) else {
            continue;
        };
        t.samples += 1;
        let res = verify_factorization(&f, &m, tol());
        let tag = format!("e={e} k={k} generators={vectors}");
        t.bound(&format!("{tag} product"), res.product, 1e-8);
        t.bound(&format!("{tag} theta inner"), res.theta_inner, 1e-10);
        t.bound(&format!("{tag} phi inner"), res.phi_inner, 1e-10);
        t.bound(&format!("{tag} reconstruction gap"), res.gap, 1e-8);
        t.check(&format!("{tag} phi analytic"), res.phi_analytic);
    }
}

fn symbol_subspaces(t: &mut Tally, r: &mut TestRng, scale: Scale, degree: usize) {
    for trial in 0..scale.count(50) {
        let dim_f = r.random_range(1..=2);
        let dim_e = r.random_range(0..=2);
        let mut parts = Vec::new();
        for k in 1..=3 {
            if r.random_bool(0.6) {
                parts.push((k, r.random_range(1..=2)));
            }
        }
        let Some(spaces) = t.result("CnuSpaces", CnuSpaces::new(dim_f, dim_e, parts, degree)) else {
            continue;
        };
        let rows = dim_f + dim_e + spaces.model_coeff_dim();
        let f0 = r.random_range(1..=rows.min(2));
        let s = r.random_range(0..=2);
        let factors = r.random_range(1..=2);
        let triple = random_symbol_triple(r, &spaces, f0, s, factors);
        let theta_cols = r.random_range(0..=dim_f);
        let theta = isometric_inner(r, dim_f, theta_cols, 1);
        if let Some(out) = t.result(
            &format!("trial {trial}"),
            invariant_from_symbols(&triple, &theta, &spaces, tol()),
        ) {
            t.samples += 1;
            t.bound(&format!("trial {trial} invariance"), out.invariance_residual, 1e-8);
        }

        // Diagonal data: the subspace splits along the summands.
        let phi_f = potapov_inner(r, dim_f, 1);
        let phi_e = potapov_inner(r, dim_e, 1);
        let phi_models: Vec<Symbol> = spaces
            .parts
            .iter()
            .map(|&(k, ek)| {
                let factors = r.random_range(1..=k);
                potapov_inner(r, ek, factors)
            })
            .collect();
        let Some(diag) = t.result("diagonal_triple", diagonal_triple(&phi_f, &phi_e, &phi_models, &spaces)) else {
            continue;
        };
        let Some(out) = t.result("diagonal subspace", invariant_from_symbols(&diag, &theta, &spaces, tol())) else {
            continue;
        };
        let Some(expected) = t.result(
            "diagonal_splitting_form",
            diagonal_splitting_form(&theta, &phi_e, &phi_models, &spaces, tol()),
        ) else {
            continue;
        };
        let Some(blocks) = t.result("summand_projections", spaces.summand_projections(&out.subspace, tol())) else {
            continue;
        };
        t.samples += 1;
        for (i, (got, want)) in blocks.iter().zip(&expected).enumerate() {
            let gap = if got.dim() == want.dim() { subspace_gap(got, want).unwrap_or(1.0) } else { 1.0 };
            t.bound(&format!("trial {trial} block {i} gap"), gap, 1e-8);
        }
        let whole = Subspace::direct_sum(&expected);
        let gap = if whole.dim() == out.subspace.dim() {
            subspace_gap(&whole, &out.subspace).unwrap_or(1.0)
        } else {
            1.0
        };
        t.bound(&format!("trial {trial} splitting gap"), gap, 1e-8);
    }
}

fn scalar_monomials(t: &mut Tally, r: &mut TestRng, scale: Scale) {
    for _ in 0..scale.count(500) {
        let degree = r.random_range(1..=12i64);
        // Two coefficients at least, normalized to unit coefficient norm.
        let p = laurent_symbol(r, 1, 1, 0, degree);
        let norm = p.coeffs().iter().map(|c| c[(0, 0)].norm_sqr()).sum::<f64>().sqrt();
        let p = p.scaled(C64::new(1.0 / norm, 0.0));
        t.samples += 1;
        t.check("non-monomial classified inner", !is_inner(&p, tol()));
        t.check("non-monomial certified", monomial_certificate(&p, tol()).is_err());

        let k = r.random_range(0..=12usize);
        let c = C64::from_polar(1.0, r.random_range(0.0..std::f64::consts::TAU));
        let mono = Symbol::monomial(k as i64, Matrix::from_element(1, 1, c));
        t.samples += 1;
        match monomial_certificate(&mono, tol()) {
            Ok((order, coeff)) => {
                t.check("monomial order", order == k);
                t.bound("monomial coefficient", (coeff - c).norm(), 1e-12);
            }
            Err(e) => t.fail(format!("monomial z^{k} rejected: {e}")),
        }
        t.bound("monomial inner residual", inner_report(&mono, tol()).residual, 1e-12);
    }
}

/// Random vector of the chain subspace with random kernel orders in each block.
fn random_chain_vector(r: &mut TestRng, parts: &[(usize, usize)]) -> Vector {
    let values = parts.iter().map(|&(k, _)| r.random_range(0..=k)).collect();
    let chain = Chain::new(parts.to_vec(), values).expect("valid parts");
    let s = chain_subspace(&chain);
    let coeffs = Vector::from_fn(s.dim(), |_, _| complex_normal(r));
    s.basis() * coeffs
}

/// The admissible chain whose subspace equals `m`, if any.
fn matching_chain(m: &Subspace, chains: &[(Chain, Subspace)]) -> Option<(f64, Chain)> {
    chains
        .iter()
        .filter(|(_, s)| s.dim() == m.dim())
        .map(|(c, s)| (subspace_gap(s, m).unwrap_or(1.0), c.clone()))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

fn single_block(t: &mut Tally, r: &mut TestRng, scale: Scale) {
    let mut bases = std::collections::BTreeMap::new();
    for e in 1..=3 {
        for k in 1..=4 {
            let basis = commutant_basis(&jk_matrix(e, k), tol()).expect("square");
            let chains: Vec<(Chain, Subspace)> = (0..=k)
                .map(|n| {
                    let c = Chain::new(vec![(k, e)], vec![n]).expect("valid");
                    let s = chain_subspace(&c);
                    (c, s)
                })
                .collect();
            for (c, s) in &chains {
                if let Some(rep) = t.result("is_hyperinvariant_with", is_hyperinvariant_with(s, &basis, tol())) {
                    t.samples += 1;
                    t.bound(&format!("N(J_{k}^{}) e={e}", c.values[0]), rep.worst_residual, 1e-8);
                }
            }
            bases.insert((e, k), (basis, chains));
        }
    }
    for _ in 0..scale.count(200) {
        let e = r.random_range(1..=3);
        let k = r.random_range(1..=4);
        let (basis, chains) = &bases[&(e, k)];
        let x = random_chain_vector(r, &[(k, e)]);
        let Some(m) = t.result("cyclic_closure", cyclic_closure(&x, basis, tol())) else {
            continue;
        };
        t.samples += 1;
        match matching_chain(&m, chains) {
            Some((gap, _)) => t.bound(&format!("cyclic subspace e={e} k={k}"), gap, 1e-8),
            None => t.fail(format!("cyclic subspace of dim {} matches no kernel (e={e}, k={k})", m.dim())),
        }
    }
}

fn chains(t: &mut Tally, r: &mut TestRng, scale: Scale) {
    let sets = scale.count(20);
    let cyclic_per_set = (scale.count(100) / sets).max(1);
    for _ in 0..sets {
        let mut parts = Vec::new();
        for k in 1..=4 {
            if r.random_bool(0.5) {
                parts.push((k, r.random_range(1..=2)));
            }
        }
        if parts.is_empty() {
            parts.push((r.random_range(1..=4), 1));
        }
        let t_op = shift_sum(&parts);
        let Some(basis) = t.result("commutant_basis", commutant_basis(&t_op, tol())) else {
            continue;
        };
        let Some(all) = t.result("enumerate_assignments", enumerate_assignments(&parts)) else {
            continue;
        };
        let mut admissible = Vec::new();
        for chain in all {
            let m = chain_subspace(&chain);
            t.samples += 1;
            let Some(rep) = t.result("is_hyperinvariant_with", is_hyperinvariant_with(&m, &basis, tol())) else {
                continue;
            };
            if chain.is_admissible() {
                t.bound(&format!("admissible {:?} {:?}", chain.parts, chain.values), rep.worst_residual, 1e-8);
                admissible.push((chain, m));
            } else {
                t.check(
                    &format!("inadmissible {:?} {:?} passed the sweep", chain.parts, chain.values),
                    !rep.hyperinvariant,
                );
                match chain_violation_witness(&chain) {
                    Some(w) => {
                        let comm = crate::numkit::residual_norm(&(&w * &t_op - &t_op * &w), 1e-8);
                        t.bound("witness commutes", comm, 1e-12);
                        let leak = intertwiner_residual(&m, &m, &w, tol()).unwrap_or(0.0);
                        t.check(&format!("witness {:?} leaves M by {leak:.2e}", chain.values), leak >= 0.1);
                    }
                    None => t.fail(format!("no witness for {:?}", chain.values)),
                }
            }
        }
        let expected = enumerate_admissible_chains(&parts).map(|c| c.len()).unwrap_or(0);
        t.check("admissible count", expected == admissible.len());
        for _ in 0..cyclic_per_set {
            let x = random_chain_vector(r, &parts);
            let Some(m) = t.result("cyclic_closure", cyclic_closure(&x, &basis, tol())) else {
                continue;
            };
            t.samples += 1;
            match matching_chain(&m, &admissible) {
                Some((gap, _)) => t.bound(&format!("cyclic subspace for {parts:?}"), gap, 1e-8),
                None => t.fail(format!("cyclic subspace for {parts:?} matches no admissible chain")),
            }
        }
    }
}

fn counterexample(t: &mut Tally, r: &mut TestRng, scale: Scale, degree: usize) {
    let Some(ex) = t.result("shift_model_counterexample", shift_model_counterexample(degree, tol())) else {
        return;
    };
    t.samples += 1;
    t.check(
        &format!("violation residual {:.12}", ex.violation_residual),
        (ex.violation_residual - 1.0).abs() <= 1e-10,
    );
    t.bound("S' commutation", ex.commutation_residual, 1e-12);
    let Some(sampler) = t.result("sampler", IntertwinerSampler::new(&ex.spaces, tol())) else {
        return;
    };
    let samples = scale.count(100);
    if let Some(rep) = t.result(
        "sampled_hyperinvariance",
        sampled_hyperinvariance(&ex.repaired, &sampler, &IntertwinerForm::PURE, samples, r, tol()),
    ) {
        t.samples += samples * rep.worst.len();
        t.bound("repaired chain", rep.max(), 1e-8);
    }
}

fn divisibility(t: &mut Tally, r: &mut TestRng, scale: Scale, degree: usize) {
    let samples = scale.count(100);
    let parts = vec![(1, 1), (2, 1), (3, 1)];
    // Pure, backward plus model, and the full c.n.u. layout.
    let layouts = [(0, 1), (1, 0), (1, 1)];
    for (dim_f, dim_e) in layouts {
        let Some(spaces) = t.result("CnuSpaces", CnuSpaces::new(dim_f, dim_e, parts.clone(), degree)) else {
            return;
        };
        let Some(sampler) = t.result("sampler", IntertwinerSampler::new(&spaces, tol())) else {
            return;
        };
        let forms: &[IntertwinerForm] = if dim_f == 0 { &IntertwinerForm::PURE } else { &IntertwinerForm::ALL };
        let test = sampler.test_space();
        for chain in enumerate_admissible_chains(&parts).expect("valid parts") {
            for p in 0..=3 {
                let mono = Symbol::monomial(p, identity(1));
                let mut candidates = Vec::new();
                if dim_f == 0 {
                    candidates.push(("pure", hyper_candidate_pure(&mono, &chain, &spaces, tol())));
                } else {
                    candidates.push(("backward_model", hyper_candidate_cnu(&CnuForm::BackwardModel { v: mono.clone() }, &chain, &spaces, tol())));
                    if p == 0 {
                        candidates.push(("full_backward", hyper_candidate_cnu(&CnuForm::FullBackward, &chain, &spaces, tol())));
                    }
                    if dim_e > 0 {
                        candidates.push(("forward_range", hyper_candidate_cnu(&CnuForm::ForwardRange { u: mono.clone() }, &chain, &spaces, tol())));
                    }
                }
                for (label, cand) in candidates {
                    let tag = format!("F={dim_f} E={dim_e} {label} order={p} chain={:?}", chain.values);
                    let Some(cand) = t.result(&tag, cand) else {
                        continue;
                    };
                    if cand.valid {
                        if let Some(rep) = t.result(&tag, sampled_hyperinvariance(&cand.subspace, &sampler, forms, samples, r, tol())) {
                            t.samples += samples * rep.worst.len();
                            t.bound(&tag, rep.max(), 1e-8);
                        }
                    } else {
                        let Some(x) = t.result(&tag, intersect(&cand.subspace, &test, tol())) else {
                            continue;
                        };
                        for v in &cand.violations {
                            t.samples += 1;
                            let w = divisibility_witness(v, &spaces);
                            let res = intertwiner_residual(&cand.subspace, &x, &w, tol()).unwrap_or(0.0);
                            t.check(&format!("{tag}: witness for {}-condition at k={} gives {res:.2e}", v.function, v.k), res >= 0.1);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_criterion_passes_at_smoke_scale() {
        for out in run_all(7, Scale::Smoke) {
            assert!(out.passed, "{out}");
            assert!(out.samples > 0, "{out}");
        }
    }

    #[test]
    fn hardy_criteria_follow_the_degree() {
        for id in [6, 10, 11] {
            let out = run_criterion_at(id, 3, Scale::Smoke, MIN_DEGREE).unwrap();
            assert!(out.passed, "{out}");
        }
        for id in [10, 11] {
            let low = run_criterion_at(id, 3, Scale::Smoke, MIN_DEGREE - 1).unwrap();
            assert!(!low.passed, "{low}");
        }
    }

    #[test]
    fn unknown_criterion_is_none() {
        assert!(run_criterion(12, 0, Scale::Smoke).is_none());
        assert!(run_criterion(0, 0, Scale::Smoke).is_none());
    }
}
