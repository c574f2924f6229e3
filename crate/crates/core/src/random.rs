//! Seeded generators for random operators, subspaces and symbols.
//!
//! Every generator draws from a caller-supplied RNG; [`rng`] builds the
//! ChaCha generator used throughout the test suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::hardy::{jk_matrix, Symbol};
use crate::numkit::{block_diag, identity, Matrix, Vector, C64};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with independent standard complex Gaussian entries.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    loop {
        let v = Vector::from_fn(d, |_, _| complex_normal(rng));
        let n = v.norm();
        if n > 1e-6 {
            return v / C64::new(n, 0.0);
        }
    }
}

/// Haar-distributed unitary via QR with phase correction.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Matrix {
    if d == 0 {
        return Matrix::zeros(0, 0);
    }
    let qr = gaussian(rng, d, d).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let x = r[(j, j)];
        let phase = if x.norm() > 0.0 { x / x.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `U diag(I_r, 0) V^*` with independent random unitaries.
pub fn partial_isometry<R: Rng + ?Sized>(rng: &mut R, d: usize, r: usize) -> Matrix {
    let u = unitary(rng, d);
    let v = unitary(rng, d);
    let mut s = Matrix::zeros(d, d);
    for i in 0..r.min(d) {
        s[(i, i)] = C64::new(1.0, 0.0);
    }
    u * s * v.adjoint()
}

/// Orthogonal projection onto a random `r`-dimensional subspace of `C^n`.
pub fn projection<R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> Matrix {
    let u = unitary(rng, n);
    let b = u.columns(0, r.min(n)).into_owned();
    &b * b.adjoint()
}

/// Diagonal unitary with random phases.
pub fn diagonal_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Matrix {
    Matrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `U ⊕ (⊕ m copies of J_k)` for the listed `(k, m)` pairs, one copy per block.
pub fn canonical_ppi(unitary_block: &Matrix, blocks: &[(usize, usize)]) -> Matrix {
    let mut parts = vec![unitary_block.clone()];
    for &(k, m) in blocks {
        for _ in 0..m {
            parts.push(jk_matrix(1, k));
        }
    }
    block_diag(&parts)
}

/// `Q (U ⊕ ⊕J_k) Q^*` with random unitaries `U` and `Q`; returns `(T, Q)`.
pub fn conjugated_ppi<R: Rng + ?Sized>(
    rng: &mut R,
    unitary_dim: usize,
    blocks: &[(usize, usize)],
) -> (Matrix, Matrix) {
    let u = unitary(rng, unitary_dim);
    let c = canonical_ppi(&u, blocks);
    let q = unitary(rng, c.nrows());
    (&q * c * q.adjoint(), q)
}

/// Random analytic matrix polynomial of the given degree, Frobenius-normalized
/// coefficients scaled by `1/(deg+1)`.
pub fn analytic_symbol<R: Rng + ?Sized>(
    rng: &mut R,
    dim_out: usize,
    dim_in: usize,
    degree: usize,
) -> Symbol {
    laurent_symbol(rng, dim_out, dim_in, 0, degree as i64)
}

/// Random Laurent polynomial with coefficients on `m_lo..=m_hi`.
pub fn laurent_symbol<R: Rng + ?Sized>(
    rng: &mut R,
    dim_out: usize,
    dim_in: usize,
    m_lo: i64,
    m_hi: i64,
) -> Symbol {
    let n = (m_hi - m_lo + 1) as usize;
    let coeffs = (0..n)
        .map(|_| {
            let g = gaussian(rng, dim_out, dim_in);
            let s = g.norm().max(1e-12) * n as f64;
            g / C64::new(s, 0.0)
        })
        .collect();
    Symbol::new(dim_out, dim_in, m_lo, coeffs).expect("uniform shapes")
}

/// Product of `factors` Potapov factors `P^⊥ + zP` on `C^n` with random
/// nonzero projections, left-multiplied by a random unitary constant.
pub fn potapov_inner<R: Rng + ?Sized>(rng: &mut R, n: usize, factors: usize) -> Symbol {
    let mut acc = Symbol::constant(unitary(rng, n));
    for _ in 0..factors {
        let r = if n == 0 { 0 } else { rng.random_range(1..=n) };
        let p = projection(rng, n, r);
        let b = Symbol::new(n, n, 0, vec![identity(n) - &p, p]).expect("square");
        acc = acc.mul(&b).expect("composable");
    }
    acc
}

/// Random inner symbol from `C^cols` into `C^rows` (`cols ≤ rows`): a Potapov
/// product restricted to its first `cols` columns.
pub fn isometric_inner<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    factors: usize,
) -> Symbol {
    let full = potapov_inner(rng, rows, factors);
    full.restrict_columns(0, cols)
}
