//! Truncated vector-valued Hardy spaces.
//!
//! `H²_E` truncated at degree `N` is identified with `C^{e(N+1)}`, ordered
//! degree-major: all of `E` for `z^0`, then `z^1`, and so on. Symbols are
//! matrix-valued Laurent polynomials, so inner-function and boundary identities
//! reduce to exact coefficient convolutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{
    block_diag, check_finite, check_square, identity, kron, op_norm, psd_sqrt, range_scaled,
    residual_norm, vstack, Matrix, MatrixJson, Tol, C64, ONE, ZERO,
};

/// `Φ(z) = Σ_{m=m_lo}^{m_hi} Φ̂(m) z^m` with `dim_out x dim_in` coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbol {
    dim_out: usize,
    dim_in: usize,
    m_lo: i64,
    coeffs: Vec<Matrix>,
}

impl Symbol {
    /// # Errors
    /// `ShapeMismatch` for an empty or non-uniform coefficient list,
    /// `NonFinite` for NaN or infinite entries.
    pub fn new(dim_out: usize, dim_in: usize, m_lo: i64, coeffs: Vec<Matrix>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::ShapeMismatch("symbol needs at least one coefficient".into()));
        }
        for (i, c) in coeffs.iter().enumerate() {
            if c.shape() != (dim_out, dim_in) {
                return Err(Error::ShapeMismatch(format!(
                    "coefficient {i} is {}x{}, expected {dim_out}x{dim_in}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            check_finite(c)?;
        }
        Ok(Symbol {
            dim_out,
            dim_in,
            m_lo,
            coeffs,
        })
    }

    pub fn zero(dim_out: usize, dim_in: usize) -> Self {
        Symbol {
            dim_out,
            dim_in,
            m_lo: 0,
            coeffs: vec![Matrix::zeros(dim_out, dim_in)],
        }
    }

    pub fn constant(c: Matrix) -> Self {
        Self::monomial(0, c)
    }

    /// `c z^n`.
    pub fn monomial(n: i64, c: Matrix) -> Self {
        Symbol {
            dim_out: c.nrows(),
            dim_in: c.ncols(),
            m_lo: n,
            coeffs: vec![c],
        }
    }

    /// Scalar Laurent polynomial with coefficients for `m_lo, m_lo+1, ...`.
    pub fn scalar(m_lo: i64, coeffs: &[C64]) -> Self {
        let coeffs = if coeffs.is_empty() { vec![ZERO] } else { coeffs.to_vec() };
        Symbol {
            dim_out: 1,
            dim_in: 1,
            m_lo,
            coeffs: coeffs.into_iter().map(|c| Matrix::from_element(1, 1, c)).collect(),
        }
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn m_lo(&self) -> i64 {
        self.m_lo
    }

    pub fn m_hi(&self) -> i64 {
        self.m_lo + self.coeffs.len() as i64 - 1
    }

    pub fn coeffs(&self) -> &[Matrix] {
        &self.coeffs
    }

    /// `Φ̂(m)`, zero outside `m_lo..=m_hi`.
    pub fn coeff(&self, m: i64) -> Matrix {
        if m < self.m_lo || m > self.m_hi() {
            Matrix::zeros(self.dim_out, self.dim_in)
        } else {
            self.coeffs[(m - self.m_lo) as usize].clone()
        }
    }

    fn coeff_ref(&self, m: i64) -> Option<&Matrix> {
        if m < self.m_lo || m > self.m_hi() {
            None
        } else {
            Some(&self.coeffs[(m - self.m_lo) as usize])
        }
    }

    pub fn is_zero(&self, tol: Tol) -> bool {
        self.coeffs.iter().all(|c| c.norm() <= tol.residual_abs)
    }

    /// No coefficient of negative degree exceeds `tol.residual_abs` in norm.
    pub fn is_analytic(&self, tol: Tol) -> bool {
        (self.m_lo..0).all(|m| self.coeff(m).norm() <= tol.residual_abs)
    }

    /// Lowest degree carrying a coefficient above `tol.residual_abs`.
    pub fn order(&self, tol: Tol) -> Option<i64> {
        (self.m_lo..=self.m_hi()).find(|&m| self.coeff(m).norm() > tol.residual_abs)
    }

    /// Highest degree carrying a coefficient above `tol.residual_abs`.
    pub fn degree(&self, tol: Tol) -> Option<i64> {
        (self.m_lo..=self.m_hi())
            .rev()
            .find(|&m| self.coeff(m).norm() > tol.residual_abs)
    }

    /// Pointwise product `ΦΨ`.
    ///
    /// # Errors
    /// `ShapeMismatch` unless `self.dim_in == other.dim_out`.
    pub fn mul(&self, other: &Symbol) -> Result<Symbol> {
        if self.dim_in != other.dim_out {
            return Err(Error::ShapeMismatch(format!(
                "cannot compose {}x{} with {}x{}",
                self.dim_out, self.dim_in, other.dim_out, other.dim_in
            )));
        }
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![Matrix::zeros(self.dim_out, other.dim_in); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Ok(Symbol {
            dim_out: self.dim_out,
            dim_in: other.dim_in,
            m_lo: self.m_lo + other.m_lo,
            coeffs,
        })
    }

    /// `Φ~(z) = Φ(z̄)^*`, whose coefficients are `Φ̂(m)^*`; `H_Φ^* = H_{Φ~}`.
    pub fn tilde(&self) -> Symbol {
        Symbol {
            dim_out: self.dim_in,
            dim_in: self.dim_out,
            m_lo: self.m_lo,
            coeffs: self.coeffs.iter().map(|c| c.adjoint()).collect(),
        }
    }

    /// Pointwise adjoint on the unit circle, with coefficients `Φ̂(-m)^*`.
    pub fn boundary_adjoint(&self) -> Symbol {
        Symbol {
            dim_out: self.dim_in,
            dim_in: self.dim_out,
            m_lo: -self.m_hi(),
            coeffs: self.coeffs.iter().rev().map(|c| c.adjoint()).collect(),
        }
    }

    /// `z^s Φ`.
    pub fn shifted(&self, s: i64) -> Symbol {
        Symbol {
            m_lo: self.m_lo + s,
            ..self.clone()
        }
    }

    pub fn scaled(&self, c: C64) -> Symbol {
        Symbol {
            coeffs: self.coeffs.iter().map(|m| m * c).collect(),
            ..self.clone()
        }
    }

    /// Column-stacked symbol `[Φ_1; Φ_2; ...]`.
    ///
    /// # Errors
    /// `ShapeMismatch` for differing input dimensions or an empty list.
    pub fn vstack(parts: &[&Symbol]) -> Result<Symbol> {
        let Some(first) = parts.first() else {
            return Err(Error::ShapeMismatch("empty stack".into()));
        };
        let dim_in = first.dim_in;
        if parts.iter().any(|p| p.dim_in != dim_in) {
            return Err(Error::ShapeMismatch("stacked symbols need equal input dimension".into()));
        }
        let lo = parts.iter().map(|p| p.m_lo).min().unwrap_or(0);
        let hi = parts.iter().map(|p| p.m_hi()).max().unwrap_or(0);
        let dim_out = parts.iter().map(|p| p.dim_out).sum();
        let coeffs = (lo..=hi)
            .map(|m| {
                let cs: Vec<Matrix> = parts.iter().map(|p| p.coeff(m)).collect();
                let refs: Vec<&Matrix> = cs.iter().collect();
                if refs.is_empty() {
                    Matrix::zeros(0, dim_in)
                } else {
                    vstack(&refs)
                }
            })
            .collect();
        Ok(Symbol {
            dim_out,
            dim_in,
            m_lo: lo,
            coeffs,
        })
    }

    /// Block-diagonal symbol `Φ_1 ⊕ Φ_2 ⊕ ...`.
    pub fn block_diag(parts: &[&Symbol]) -> Symbol {
        let lo = parts.iter().map(|p| p.m_lo).min().unwrap_or(0);
        let hi = parts.iter().map(|p| p.m_hi()).max().unwrap_or(0);
        let dim_out = parts.iter().map(|p| p.dim_out).sum();
        let dim_in = parts.iter().map(|p| p.dim_in).sum();
        let coeffs = (lo..=hi)
            .map(|m| {
                let cs: Vec<Matrix> = parts.iter().map(|p| p.coeff(m)).collect();
                block_diag(&cs)
            })
            .collect();
        Symbol {
            dim_out,
            dim_in,
            m_lo: lo,
            coeffs,
        }
    }

    /// Rows `start..start+len` of every coefficient.
    pub fn rows(&self, start: usize, len: usize) -> Symbol {
        Symbol {
            dim_out: len,
            dim_in: self.dim_in,
            m_lo: self.m_lo,
            coeffs: self.coeffs.iter().map(|c| c.rows(start, len).into_owned()).collect(),
        }
    }

    /// Columns `start..start+len` of every coefficient.
    pub fn restrict_columns(&self, start: usize, len: usize) -> Symbol {
        Symbol {
            dim_out: self.dim_out,
            dim_in: len,
            m_lo: self.m_lo,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.columns(start, len).into_owned())
                .collect(),
        }
    }

    /// `Σ_m Φ̂(m)^* Φ̂(m+j)`.
    pub fn gram(&self, j: i64) -> Matrix {
        let mut g = Matrix::zeros(self.dim_in, self.dim_in);
        for m in self.m_lo..=self.m_hi() {
            if let (Some(a), Some(b)) = (self.coeff_ref(m), self.coeff_ref(m + j)) {
                g += a.adjoint() * b;
            }
        }
        g
    }

    pub fn to_json(&self) -> SymbolJson {
        SymbolJson {
            dim_out: self.dim_out,
            dim_in: self.dim_in,
            m_lo: self.m_lo,
            coeffs: self.coeffs.iter().map(MatrixJson::from_matrix).collect(),
        }
    }
}

/// JSON carrier for a [`Symbol`]; coefficients ordered by degree from `m_lo`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolJson {
    pub dim_out: usize,
    pub dim_in: usize,
    pub m_lo: i64,
    pub coeffs: Vec<MatrixJson>,
}

impl SymbolJson {
    pub fn to_symbol(&self) -> Result<Symbol> {
        let coeffs = self
            .coeffs
            .iter()
            .map(MatrixJson::to_matrix)
            .collect::<Result<Vec<_>>>()?;
        Symbol::new(self.dim_out, self.dim_in, self.m_lo, coeffs)
    }
}

/// Truncation of `H²_E` to the monomials `z^0..z^N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardyTrunc {
    pub coeff_dim: usize,
    pub degree: usize,
}

impl HardyTrunc {
    pub fn dim(&self) -> usize {
        self.coeff_dim * (self.degree + 1)
    }

    /// Truncated forward shift (the top degree is dropped).
    pub fn shift(&self) -> Matrix {
        toeplitz(&Symbol::monomial(1, identity(self.coeff_dim)), self.degree, self.degree)
    }

    /// Backward shift; exact on the truncation.
    pub fn backward_shift(&self) -> Matrix {
        self.shift().adjoint()
    }

    /// Index of the coefficient `i` of `z^m`.
    pub fn index(&self, m: usize, i: usize) -> usize {
        m * self.coeff_dim + i
    }
}

/// Matrix of `T_Φ` from degrees `0..=n_in` to degrees `0..=n_out`: block
/// `(j, m)` is `Φ̂(j - m)`.
///
/// For analytic `Φ` it agrees with the true Toeplitz operator on inputs of
/// degree `≤ n_out - m_hi`; its adjoint agrees with `T_Φ^*` on inputs of degree
/// `≤ n_out` whenever `n_in ≥ n_out`.
pub fn toeplitz(phi: &Symbol, n_in: usize, n_out: usize) -> Matrix {
    let (p, q) = (phi.dim_out, phi.dim_in);
    let mut out = Matrix::zeros(p * (n_out + 1), q * (n_in + 1));
    for j in 0..=n_out {
        for m in 0..=n_in {
            if let Some(c) = phi.coeff_ref(j as i64 - m as i64) {
                out.view_mut((j * p, m * q), (p, q)).copy_from(c);
            }
        }
    }
    out
}

/// Matrix of the Hankel operator `H_Φ = P_+ J M_Φ` from degrees `0..=n_in` to
/// `0..=n_out`: block `(j, m)` is `Φ̂(-j - m)`.
pub fn hankel(phi: &Symbol, n_in: usize, n_out: usize) -> Matrix {
    let (p, q) = (phi.dim_out, phi.dim_in);
    let mut out = Matrix::zeros(p * (n_out + 1), q * (n_in + 1));
    for j in 0..=n_out {
        for m in 0..=n_in {
            if let Some(c) = phi.coeff_ref(-(j as i64) - m as i64) {
                out.view_mut((j * p, m * q), (p, q)).copy_from(c);
            }
        }
    }
    out
}

/// Result of the coefficient test `Σ_m Φ̂(m)^*Φ̂(m+j) = δ_{j0} I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerReport {
    pub analytic: bool,
    /// Largest lag residual.
    pub residual: f64,
    /// Smallest nonnegative lag whose residual exceeds the tolerance.
    pub first_failing_lag: Option<i64>,
}

impl InnerReport {
    pub fn isometric(&self) -> bool {
        self.first_failing_lag.is_none()
    }

    pub fn inner(&self) -> bool {
        self.analytic && self.isometric()
    }
}

/// Checks the isometric boundary identity lag by lag, and analyticity.
pub fn inner_report(phi: &Symbol, tol: Tol) -> InnerReport {
    let span = phi.m_hi() - phi.m_lo;
    let mut residual: f64 = 0.0;
    let mut first = None;
    for j in 0..=span {
        let mut g = phi.gram(j);
        if j == 0 {
            g -= identity(phi.dim_in);
        }
        let r = residual_norm(&g, tol.residual_abs);
        if r > tol.residual_abs && first.is_none() {
            first = Some(j);
        }
        residual = residual.max(r);
    }
    InnerReport {
        analytic: phi.is_analytic(tol),
        residual,
        first_failing_lag: first,
    }
}

/// Analytic with isometric boundary values.
pub fn is_inner(phi: &Symbol, tol: Tol) -> bool {
    inner_report(phi, tol).inner()
}

/// Isometric boundary values; analyticity is not required.
pub fn is_isometric_valued(phi: &Symbol, tol: Tol) -> bool {
    inner_report(phi, tol).isometric()
}

/// For a scalar inner polynomial returns `(n, c)` with `u = c z^n`.
///
/// # Errors
/// `ShapeMismatch` for non-scalar input, `NotAnalytic` for negative degrees,
/// `NotInner` with the first failing lag, and `NotMonomial` if the inner test
/// passed yet a second coefficient survives the tolerance.
pub fn monomial_certificate(u: &Symbol, tol: Tol) -> Result<(usize, C64)> {
    if u.dim_out != 1 || u.dim_in != 1 {
        return Err(Error::ShapeMismatch("monomial certificate needs a scalar symbol".into()));
    }
    let report = inner_report(u, tol);
    if !report.analytic {
        return Err(Error::NotAnalytic("u".into()));
    }
    if let Some(lag) = report.first_failing_lag {
        let mut g = u.gram(lag);
        if lag == 0 {
            g -= identity(1);
        }
        return Err(Error::NotInner {
            lag,
            residual: g[(0, 0)].norm(),
        });
    }
    let (best, c) = (u.m_lo..=u.m_hi())
        .map(|m| (m, u.coeff(m)[(0, 0)]))
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .expect("at least one coefficient");
    let others = (u.m_lo..=u.m_hi())
        .filter(|&m| m != best)
        .any(|m| u.coeff(m)[(0, 0)].norm() > tol.residual_abs);
    if others {
        return Err(Error::NotMonomial);
    }
    Ok((best as usize, c))
}

/// `J_k` on `E ⊗ C^k` in the degree-major basis: identity blocks on the block
/// subdiagonal.
pub fn jk_matrix(coeff_dim: usize, k: usize) -> Matrix {
    let s = Matrix::from_fn(k, k, |i, j| if i == j + 1 { ONE } else { ZERO });
    kron(&s, &identity(coeff_dim))
}

/// The model space `E_k = [z^k H²_E]^⊥`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub coeff_dim: usize,
    pub k: usize,
}

/// Projection of the degree-`n` truncation onto the coefficients of `z^0..z^{k-1}`.
///
/// # Errors
/// `BadDegree` if `n < k - 1`; `BadSpec` for `k = 0`.
pub fn model_projection(spec: ModelSpec, n: usize) -> Result<Matrix> {
    if spec.k == 0 {
        return Err(Error::BadSpec("model index k must be at least 1".into()));
    }
    if n + 1 < spec.k {
        return Err(Error::BadDegree {
            degree: n,
            needed: spec.k - 1,
        });
    }
    let d = spec.coeff_dim * (n + 1);
    let r = spec.coeff_dim * spec.k;
    Ok(Matrix::from_fn(d, d, |i, j| if i == j && i < r { ONE } else { ZERO }))
}

/// The map `h ↦ (D_{T^*} T^{*m} h)_{m=0..N}` into `H²_D` truncated at degree `N`,
/// with `D = R(D_{T^*})` expressed in the orthonormal basis `defect_basis`.
#[derive(Clone, Debug, PartialEq)]
pub struct NagyEmbedding {
    pub defect_basis: Matrix,
    pub pi: Matrix,
}

impl NagyEmbedding {
    pub fn coeff_dim(&self) -> usize {
        self.defect_basis.ncols()
    }
}

/// # Errors
/// `NotSquare`, `NonFinite`, or `NotContraction` if `‖T‖ > 1 + tol.residual_abs`.
pub fn nagy_embedding(t: &Matrix, n: usize, tol: Tol) -> Result<NagyEmbedding> {
    let d = check_square(t)?;
    check_finite(t)?;
    let norm = op_norm(t);
    if norm > 1.0 + tol.residual_abs {
        return Err(Error::NotContraction { norm });
    }
    let defect = psd_sqrt(&(identity(d) - t * t.adjoint()));
    let basis = range_scaled(&defect, tol, 1.0)?.basis().clone();
    let r = basis.ncols();
    let row = basis.adjoint() * &defect;
    let ts = t.adjoint();
    let mut pi = Matrix::zeros(r * (n + 1), d);
    let mut power = identity(d);
    for m in 0..=n {
        pi.view_mut((m * r, 0), (r, d)).copy_from(&(&row * &power));
        power = &ts * power;
    }
    Ok(NagyEmbedding {
        defect_basis: basis,
        pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{matrix_power, real_matrix, zeros};
    use crate::random::{analytic_symbol, potapov_inner, rng, unitary};

    fn tol() -> Tol {
        Tol::default()
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn toeplitz_of_z_is_shift() {
        let t = toeplitz(&Symbol::scalar(1, &[ONE]), 3, 3);
        let s = Matrix::from_fn(4, 4, |i, j| if i == j + 1 { ONE } else { ZERO });
        assert_eq!(t, s);
        let t = toeplitz(&Symbol::constant(identity(2)), 2, 2);
        assert_eq!(t, identity(6));
    }

    #[test]
    fn toeplitz_block_bidiagonal() {
        let p0 = real_matrix(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p1 = real_matrix(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        let phi = Symbol::new(2, 2, 0, vec![p0.clone(), p1.clone()]).unwrap();
        let t = toeplitz(&phi, 2, 2);
        for j in 0..3 {
            for m in 0..3 {
                let blk = t.view((2 * j, 2 * m), (2, 2)).into_owned();
                let expected = match j as i64 - m as i64 {
                    0 => p0.clone(),
                    1 => p1.clone(),
                    _ => zeros(2, 2),
                };
                assert_eq!(blk, expected, "block ({j},{m})");
            }
        }
    }

    #[test]
    fn hankel_examples() {
        assert_eq!(hankel(&Symbol::scalar(1, &[ONE]), 3, 3), zeros(4, 4));
        let h = hankel(&Symbol::scalar(-1, &[c(2.0)]), 2, 2);
        let expected = real_matrix(3, 3, &[0.0, 2.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(h, expected);
        let h = hankel(&Symbol::scalar(0, &[c(3.0)]), 2, 2);
        let expected = real_matrix(3, 3, &[3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(h, expected);
    }

    #[test]
    fn hankel_adjoint_is_hankel_of_tilde() {
        let mut r = rng(11);
        let phi = crate::random::laurent_symbol(&mut r, 2, 3, -4, 2);
        let lhs = hankel(&phi, 5, 5).adjoint();
        let rhs = hankel(&phi.tilde(), 5, 5);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn hankel_intertwines_shift_and_backward_shift() {
        let mut r = rng(12);
        let phi = crate::random::laurent_symbol(&mut r, 2, 2, -5, 1);
        let n = 6;
        let h = hankel(&phi, n, n);
        let s = HardyTrunc { coeff_dim: 2, degree: n };
        let lhs = &h * s.shift();
        let rhs = s.backward_shift() * &h;
        // Exact on inputs of degree below n.
        let safe = 2 * n;
        assert!((lhs.columns(0, safe) - rhs.columns(0, safe)).norm() < 1e-14);
    }

    #[test]
    fn inner_examples() {
        let u = Symbol::scalar(3, &[C64::from_polar(1.0, 0.7)]);
        assert!(is_inner(&u, tol()));
        let u = Symbol::scalar(0, &[c(0.5), c(0.5)]);
        let rep = inner_report(&u, tol());
        assert!(!rep.inner());
        assert_eq!(rep.first_failing_lag, Some(0));
        assert!((u.gram(0)[(0, 0)] - c(0.5)).norm() < 1e-15);
        assert!((u.gram(1)[(0, 0)] - c(0.25)).norm() < 1e-15);
        let p = crate::random::projection(&mut rng(4), 3, 1);
        let b = Symbol::new(3, 3, 0, vec![identity(3) - &p, p]).unwrap();
        assert!(is_inner(&b, tol()));
    }

    #[test]
    fn products_of_inner_symbols_are_inner() {
        let mut r = rng(13);
        let a = potapov_inner(&mut r, 3, 2);
        let b = potapov_inner(&mut r, 3, 3);
        assert!(is_inner(&a.mul(&b).unwrap(), tol()));
    }

    #[test]
    fn analytic_toeplitz_is_multiplicative_on_safe_range() {
        let mut r = rng(14);
        let a = analytic_symbol(&mut r, 2, 3, 2);
        let b = analytic_symbol(&mut r, 3, 2, 3);
        let n = 9;
        let lhs = toeplitz(&a, n, n) * toeplitz(&b, n, n);
        let rhs = toeplitz(&a.mul(&b).unwrap(), n, n);
        let safe = 2 * (n + 1 - 5);
        assert!((lhs.columns(0, safe) - rhs.columns(0, safe)).norm() < 1e-13);
    }

    #[test]
    fn monomial_certificate_examples() {
        assert_eq!(
            monomial_certificate(&Symbol::scalar(0, &[ZERO, ZERO, ZERO, ONE]), tol()).unwrap(),
            (3, ONE)
        );
        let h = 1.0 / 2f64.sqrt();
        let err = monomial_certificate(&Symbol::scalar(0, &[c(h), c(h)]), tol()).unwrap_err();
        match err {
            Error::NotInner { lag, residual } => {
                assert_eq!(lag, 1);
                assert!((residual - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        let w = C64::from_polar(1.0, 1.1);
        assert_eq!(monomial_certificate(&Symbol::scalar(0, &[w]), tol()).unwrap(), (0, w));
    }

    #[test]
    fn monomial_certificate_rejects_matrices_and_negative_degrees() {
        assert!(matches!(
            monomial_certificate(&Symbol::constant(identity(2)), tol()),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            monomial_certificate(&Symbol::scalar(-1, &[ONE]), tol()),
            Err(Error::NotAnalytic(_))
        ));
    }

    #[test]
    fn jk_examples() {
        assert_eq!(jk_matrix(3, 1), zeros(3, 3));
        let j3 = real_matrix(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(jk_matrix(1, 3), j3);
        let mut expected = zeros(4, 4);
        expected[(2, 0)] = ONE;
        expected[(3, 1)] = ONE;
        assert_eq!(jk_matrix(2, 2), expected);
    }

    #[test]
    fn jk_is_compressed_shift() {
        let (e, k, n) = (2, 3, 5);
        let p = model_projection(ModelSpec { coeff_dim: e, k }, n).unwrap();
        let s = HardyTrunc { coeff_dim: e, degree: n }.shift();
        let comp = (&p * s * &p).view((0, 0), (e * k, e * k)).into_owned();
        assert_eq!(comp, jk_matrix(e, k));
    }

    #[test]
    fn model_projection_examples() {
        assert_eq!(model_projection(ModelSpec { coeff_dim: 2, k: 3 }, 2).unwrap(), identity(6));
        assert_eq!(
            model_projection(ModelSpec { coeff_dim: 1, k: 1 }, 2).unwrap(),
            real_matrix(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        );
        let p = model_projection(ModelSpec { coeff_dim: 2, k: 2 }, 3).unwrap();
        let diag: Vec<f64> = (0..8).map(|i| p[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            model_projection(ModelSpec { coeff_dim: 1, k: 4 }, 1),
            Err(Error::BadDegree { .. })
        ));
    }

    #[test]
    fn nagy_embedding_of_j2_is_identity() {
        let e = nagy_embedding(&jk_matrix(1, 2), 1, tol()).unwrap();
        assert_eq!(e.coeff_dim(), 1);
        assert!((e.pi.clone() - identity(2)).norm() < 1e-14);
    }

    #[test]
    fn nagy_embedding_of_unitary_is_zero() {
        let e = nagy_embedding(&unitary(&mut rng(15), 3), 4, tol()).unwrap();
        assert_eq!(e.coeff_dim(), 0);
        assert_eq!(e.pi.nrows(), 0);
    }

    #[test]
    fn nagy_embedding_identities() {
        let n = 8;
        let t = jk_matrix(1, 2) * c(0.5);
        let e = nagy_embedding(&t, n, tol()).unwrap();
        assert!((e.pi.adjoint() * &e.pi - identity(2)).norm() < 1e-12);

        let mut r = rng(16);
        let g = crate::random::gaussian(&mut r, 4, 4);
        let t = &g * c(0.9 / op_norm(&g));
        let e = nagy_embedding(&t, n, tol()).unwrap();
        let tn = matrix_power(&t, n + 1);
        let gram = e.pi.adjoint() * &e.pi;
        assert!((gram - (identity(4) - &tn * tn.adjoint())).norm() < 1e-12);
        let back = HardyTrunc { coeff_dim: e.coeff_dim(), degree: n }.backward_shift();
        let lhs = &e.pi * t.adjoint();
        let rhs = back * &e.pi;
        let rows = e.coeff_dim() * n;
        assert!((lhs.rows(0, rows) - rhs.rows(0, rows)).norm() < 1e-12);
    }

    #[test]
    fn nagy_embedding_rejects_expansions() {
        let t = identity(2) * c(1.5);
        assert!(matches!(nagy_embedding(&t, 2, tol()), Err(Error::NotContraction { .. })));
    }

    #[test]
    fn symbol_shape_validation() {
        assert!(Symbol::new(1, 1, 0, vec![]).is_err());
        assert!(Symbol::new(2, 1, 0, vec![zeros(2, 1), zeros(1, 1)]).is_err());
    }

    #[test]
    fn symbol_json_round_trip() {
        let phi = analytic_symbol(&mut rng(17), 2, 1, 2).shifted(-1);
        assert_eq!(phi.to_json().to_symbol().unwrap(), phi);
    }
}
