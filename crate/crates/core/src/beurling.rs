//! Inner-function descriptions of invariant and hyperinvariant subspaces.
//!
//! - [`factor_invariant_jk`] writes a `J_k`-invariant subspace as
//!   `T_Θ(N(T_Φ^*))` with inner `Θ`, `Φ` and `ΘΦ = z^k I`.
//! - [`invariant_from_symbols`] builds invariant subspaces of the truncated
//!   c.n.u. operator `M_z^* ⊕ M_z ⊕ (⊕J_k)` from an isometric-valued symbol
//!   and an inner `Θ`.
//! - [`hyper_candidate_pure`] and [`hyper_candidate_cnu`] build the
//!   hyperinvariant candidates described by divisibility conditions on scalar
//!   inner monomials, and [`IntertwinerSampler`] draws intertwiners of the
//!   known block forms to test them.
//!
//! The c.n.u. space is laid out as `[F | E | model blocks]`: the backward-shift
//! part `H²_F` and the forward-shift part `H²_E` truncated at degree `N`, then
//! each `E_k ⊗ C^k` in the order of `parts`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardy::{
    hankel, inner_report, jk_matrix, monomial_certificate, toeplitz, HardyTrunc, Symbol,
    SymbolJson,
};
use crate::lattice::{
    chain_subspace, commutant_basis_blocks, is_invariant, part_offsets, shift_blocks, shift_sum,
    validate_parts, Chain, FINITE_SUPPORT_CONVENTION,
};
use crate::numkit::{
    block_diag, check_dim, hstack, identity, intersect, kernel_below, kernel_scaled, range_scaled,
    residual_norm, subspace_gap, Matrix, Subspace, Tol, Vector, C64, ONE,
};
use crate::random::{complex_normal, isometric_inner, laurent_symbol};

/// `Θ` and `Φ` with `ΘΦ = z^k I` describing a `J_k`-invariant subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    pub k: usize,
    pub theta: Symbol,
    pub phi: Symbol,
}

impl Factorization {
    pub fn coeff_dim(&self) -> usize {
        self.theta.dim_out()
    }

    pub fn to_json(&self, residuals: Option<FactorizationResiduals>) -> FactorizationJson {
        FactorizationJson {
            k: self.k,
            theta: self.theta.to_json(),
            phi: self.phi.to_json(),
            residuals,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationJson {
    pub k: usize,
    pub theta: SymbolJson,
    pub phi: SymbolJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<FactorizationResiduals>,
}

impl FactorizationJson {
    pub fn to_factorization(&self) -> Result<Factorization> {
        Ok(Factorization {
            k: self.k,
            theta: self.theta.to_symbol()?,
            phi: self.phi.to_symbol()?,
        })
    }
}

/// Rotates columns so that each pivot row, read top-down, has a single
/// positive real entry in the next pivot column.
fn column_echelon(mut b: Matrix, threshold: f64) -> Matrix {
    let cols = b.ncols();
    let mut p = 0;
    for r in 0..b.nrows() {
        if p == cols {
            break;
        }
        let n = cols - p;
        let norm = (p..cols).map(|c| b[(r, c)].norm_sqr()).sum::<f64>().sqrt();
        if norm <= threshold {
            continue;
        }
        let u1 = Vector::from_fn(n, |i, _| b[(r, p + i)].conj() / norm);
        let alpha = u1[0];
        let omega = if alpha.norm() > 0.0 { alpha / alpha.norm() } else { ONE };
        let mut v = &u1 * omega.conj();
        v[0] -= ONE;
        let vn = v.norm_squared();
        let h = if vn < 1e-300 {
            identity(n)
        } else {
            identity(n) - (&v * v.adjoint()) * C64::new(2.0 / vn, 0.0)
        };
        let rotated = b.columns(p, n) * (h * omega);
        b.columns_mut(p, n).copy_from(&rotated);
        p += 1;
    }
    b
}

/// Factorization of a `J_k`-invariant subspace of `C^e ⊗ C^k`.
///
/// The wandering subspace of `M ⊕ z^k H²` lives in degrees `0..=k`, so it is
/// computed on that window as `(M ⊕ z^k E) ⊖ zM`. Its basis is brought to
/// column echelon form with positive real pivots, read as the coefficients of
/// `Θ`, and `Φ̂(m) = Θ̂(k - m)^*`.
///
/// # Errors
/// `BadSpec` for `k = 0`; `DimMismatch`; `NotInvariant`; `RankDeficient` if
/// the wandering dimension is not `coeff_dim`.
pub fn factor_invariant_jk(m: &Subspace, coeff_dim: usize, k: usize, tol: Tol) -> Result<Factorization> {
    if k == 0 {
        return Err(Error::BadSpec("model index k must be at least 1".into()));
    }
    let e = coeff_dim;
    check_dim(e * k, m.ambient_dim())?;
    let inv = is_invariant(m, &jk_matrix(e, k), tol)?;
    if !inv.invariant {
        return Err(Error::NotInvariant {
            residual: inv.residual,
        });
    }
    let window = e * (k + 1);
    let w = Subspace::direct_sum(&[m.clone(), Subspace::full(e)]);
    let shift = HardyTrunc { coeff_dim: e, degree: k }.shift();
    let zm = &shift * m.embed(window, 0).basis();
    // zM sits inside W, so the cosines below are ones and zeros.
    let ker = kernel_below(&(zm.adjoint() * w.basis()), 0.5)?;
    if ker.dim() != e {
        return Err(Error::RankDeficient {
            expected: e,
            found: ker.dim(),
        });
    }
    let b = column_echelon(w.basis() * ker.basis(), 1e-8);
    let theta_coeffs: Vec<Matrix> = (0..=k).map(|d| b.rows(d * e, e).into_owned()).collect();
    let phi_coeffs: Vec<Matrix> = (0..=k).map(|d| theta_coeffs[k - d].adjoint()).collect();
    Ok(Factorization {
        k,
        theta: Symbol::new(e, e, 0, theta_coeffs)?,
        phi: Symbol::new(e, e, 0, phi_coeffs)?,
    })
}

/// `T_Θ(N(T_Φ^*)) ∩ E_k`, as a subspace of `C^e ⊗ C^k`.
///
/// `N(T_Φ^*)` consists of polynomials of degree below `k` because
/// `ΦH² ⊇ ΦΘH² = z^k H²`; the image is intersected with the model space.
///
/// # Errors
/// `NonFinite` for corrupt symbols.
pub fn reconstruct(f: &Factorization, tol: Tol) -> Result<Subspace> {
    let (e, k) = (f.coeff_dim(), f.k);
    let kphi = kernel_scaled(&toeplitz(&f.phi, k - 1, k - 1).adjoint(), tol, 1.0)?;
    let img = toeplitz(&f.theta, k - 1, 2 * k - 1) * kphi.basis();
    let range = range_scaled(&img, tol, 1.0)?;
    let model: Vec<usize> = (0..e * k).collect();
    let inside = intersect(&range, &Subspace::coordinate(2 * e * k, &model), tol)?;
    inside.restrict_rows(0, e * k, tol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationResiduals {
    pub theta_inner: f64,
    pub phi_inner: f64,
    /// Largest coefficient deviation of `ΘΦ` from `z^k I`.
    pub product: f64,
    /// Gap between the reconstruction and the input subspace.
    pub gap: f64,
    pub reconstruction_invariance: f64,
    pub phi_analytic: bool,
    pub phi_degree_at_most_k: bool,
}

impl FactorizationResiduals {
    pub fn max(&self) -> f64 {
        [
            self.theta_inner,
            self.phi_inner,
            self.product,
            self.gap,
            self.reconstruction_invariance,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: Tol) -> bool {
        self.phi_analytic && self.phi_degree_at_most_k && self.max() <= tol.residual_abs
    }
}

fn inner_residual(phi: &Symbol, tol: Tol) -> f64 {
    let r = inner_report(phi, tol);
    if r.analytic {
        r.residual
    } else {
        f64::INFINITY
    }
}

/// Residual report for a factorization against the subspace it came from.
pub fn verify_factorization(f: &Factorization, m: &Subspace, tol: Tol) -> FactorizationResiduals {
    let (e, k) = (f.coeff_dim(), f.k);
    let product = match f.theta.mul(&f.phi) {
        Ok(p) => (p.m_lo().min(0)..=p.m_hi().max(k as i64))
            .map(|d| {
                let mut c = p.coeff(d);
                if d == k as i64 {
                    c -= identity(e);
                }
                residual_norm(&c, tol.residual_abs)
            })
            .fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    };
    let (gap, reconstruction_invariance) = match reconstruct(f, tol) {
        Ok(rec) if rec.ambient_dim() == m.ambient_dim() => {
            let gap = if rec.dim() == m.dim() {
                subspace_gap(&rec, m).unwrap_or(1.0)
            } else {
                1.0
            };
            let inv = is_invariant(&rec, &jk_matrix(e, k), tol)
                .map(|r| r.residual)
                .unwrap_or(f64::INFINITY);
            (gap, inv)
        }
        _ => (1.0, f64::INFINITY),
    };
    FactorizationResiduals {
        theta_inner: inner_residual(&f.theta, tol),
        phi_inner: inner_residual(&f.phi, tol),
        product,
        gap,
        reconstruction_invariance,
        phi_analytic: f.phi.is_analytic(tol),
        phi_degree_at_most_k: f.phi.degree(tol).map_or(true, |d| d <= k as i64),
    }
}

/// Dimensions of the truncated c.n.u. model `H²_F ⊕ H²_E ⊕ (⊕ E_k ⊗ C^k)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnuSpaces {
    pub dim_f: usize,
    pub dim_e: usize,
    pub parts: Vec<(usize, usize)>,
    pub degree: usize,
}

impl CnuSpaces {
    /// # Errors
    /// `BadSpec` for malformed parts; `BadDegree` if `degree` is below the
    /// largest index.
    pub fn new(dim_f: usize, dim_e: usize, parts: Vec<(usize, usize)>, degree: usize) -> Result<Self> {
        validate_parts(&parts)?;
        let needed = parts.iter().map(|&(k, _)| k).max().unwrap_or(0);
        if degree < needed {
            return Err(Error::BadDegree { degree, needed });
        }
        Ok(CnuSpaces {
            dim_f,
            dim_e,
            parts,
            degree,
        })
    }

    pub fn backward(&self) -> HardyTrunc {
        HardyTrunc {
            coeff_dim: self.dim_f,
            degree: self.degree,
        }
    }

    pub fn forward(&self) -> HardyTrunc {
        HardyTrunc {
            coeff_dim: self.dim_e,
            degree: self.degree,
        }
    }

    pub fn e_offset(&self) -> usize {
        self.backward().dim()
    }

    pub fn model_offset(&self) -> usize {
        self.e_offset() + self.forward().dim()
    }

    /// Offsets of the model blocks in the full space.
    pub fn block_offsets(&self) -> Vec<usize> {
        let base = self.model_offset();
        part_offsets(&self.parts).into_iter().map(|o| base + o).collect()
    }

    /// `Σ e_k`, the coefficient dimension of `E'`.
    pub fn model_coeff_dim(&self) -> usize {
        self.parts.iter().map(|&(_, e)| e).sum()
    }

    pub fn model_dim(&self) -> usize {
        self.parts.iter().map(|&(k, e)| k * e).sum()
    }

    pub fn total_dim(&self) -> usize {
        self.model_offset() + self.model_dim()
    }

    /// Truncated `M_z^* ⊕ M_z ⊕ (⊕J_k)`; only the forward shift loses its top degree.
    pub fn operator(&self) -> Matrix {
        block_diag(&[
            self.backward().backward_shift(),
            self.forward().shift(),
            shift_sum(&self.parts),
        ])
    }

    /// All of `F` and the model blocks, and `E` up to degree `N - margin`.
    pub fn safe_subspace(&self, margin: usize) -> Subspace {
        let e_top = self.degree.saturating_sub(margin);
        let mut axes: Vec<usize> = (0..self.e_offset()).collect();
        if margin <= self.degree {
            axes.extend(self.e_offset()..self.e_offset() + self.dim_e * (e_top + 1));
        }
        axes.extend(self.model_offset()..self.total_dim());
        Subspace::coordinate(self.total_dim(), &axes)
    }

    /// Projections of `m` onto the summands `F`, `E` and each model block.
    pub fn summand_projections(&self, m: &Subspace, tol: Tol) -> Result<Vec<Subspace>> {
        check_dim(self.total_dim(), m.ambient_dim())?;
        let mut out = vec![
            m.restrict_rows(0, self.e_offset(), tol)?,
            m.restrict_rows(self.e_offset(), self.forward().dim(), tol)?,
        ];
        for (&(k, e), off) in self.parts.iter().zip(self.block_offsets()) {
            out.push(m.restrict_rows(off, k * e, tol)?);
        }
        Ok(out)
    }
}

/// `Φ = [Φ_F; Φ_E; Φ_E']` mapping `F_0` into `F ⊕ E ⊕ E'`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTriple {
    pub phi_f: Symbol,
    pub phi_e: Symbol,
    /// Rows ordered as the model blocks.
    pub phi_model: Symbol,
}

impl SymbolTriple {
    pub fn dim_in(&self) -> usize {
        self.phi_f.dim_in()
    }

    /// # Errors
    /// `ShapeMismatch` for differing input dimensions.
    pub fn stacked(&self) -> Result<Symbol> {
        Symbol::vstack(&[&self.phi_f, &self.phi_e, &self.phi_model])
    }

    /// Rows of `Φ_E'` belonging to the model block at `pos`.
    pub fn model_rows(&self, spaces: &CnuSpaces, pos: usize) -> Symbol {
        let start: usize = spaces.parts[..pos].iter().map(|&(_, e)| e).sum();
        self.phi_model.rows(start, spaces.parts[pos].1)
    }

    /// The zero triple with `F_0 = C^f0`.
    pub fn zero(spaces: &CnuSpaces, f0: usize) -> Self {
        SymbolTriple {
            phi_f: Symbol::zero(spaces.dim_f, f0),
            phi_e: Symbol::zero(spaces.dim_e, f0),
            phi_model: Symbol::zero(spaces.model_coeff_dim(), f0),
        }
    }
}

fn check_triple(triple: &SymbolTriple, spaces: &CnuSpaces, tol: Tol) -> Result<()> {
    let shapes = [
        ("phi_f", triple.phi_f.dim_out(), spaces.dim_f),
        ("phi_e", triple.phi_e.dim_out(), spaces.dim_e),
        ("phi_model", triple.phi_model.dim_out(), spaces.model_coeff_dim()),
    ];
    for (name, got, want) in shapes {
        if got != want {
            return Err(Error::ShapeMismatch(format!("{name} has {got} rows, expected {want}")));
        }
    }
    let stacked = triple.stacked()?;
    if !triple.phi_e.is_analytic(tol) {
        return Err(Error::NotAnalytic("phi_e".into()));
    }
    if !triple.phi_model.is_analytic(tol) {
        return Err(Error::NotAnalytic("phi_model".into()));
    }
    if !stacked.is_zero(tol) {
        let r = inner_report(&stacked, tol);
        if !r.isometric() {
            return Err(Error::NotIsometricSymbol {
                residual: r.residual,
            });
        }
    }
    if let Some(lo) = triple.phi_f.order(tol) {
        if -lo > spaces.degree as i64 {
            return Err(Error::MarginExceeded {
                needed: (-lo) as usize,
                degree: spaces.degree,
            });
        }
    }
    Ok(())
}

/// Matrix of `W_Φ = [H_{Φ_F}^*, T_{Φ_E}^*, T_{Φ_E'}^*|_𝔼]` from the truncated
/// c.n.u. space into `H²_{F_0}` truncated at degree `N`.
///
/// The Hankel block is built as `H_{Φ~_F}`.
///
/// # Errors
/// `ShapeMismatch`; `NotAnalytic` for `Φ_E` or `Φ_E'`; `NotIsometricSymbol`
/// unless the stacked symbol is zero or isometric-valued; `MarginExceeded` if
/// `Φ_F` reaches below degree `-N`.
pub fn build_w_phi(triple: &SymbolTriple, spaces: &CnuSpaces, tol: Tol) -> Result<Matrix> {
    check_triple(triple, spaces, tol)?;
    let n = spaces.degree;
    let mut cols = vec![
        hankel(&triple.phi_f.tilde(), n, n),
        toeplitz(&triple.phi_e, n, n).adjoint(),
    ];
    for (pos, &(k, _)) in spaces.parts.iter().enumerate() {
        cols.push(toeplitz(&triple.model_rows(spaces, pos), n, k - 1).adjoint());
    }
    let refs: Vec<&Matrix> = cols.iter().collect();
    Ok(hstack(&refs))
}

/// Invariant subspace of the truncated c.n.u. operator with its check.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSubspace {
    pub subspace: Subspace,
    /// Generators `W_Φ^* g` use `deg g ≤ generator_degree`.
    pub generator_degree: usize,
    /// `‖(I - P_M) T P_X‖` over the test vectors `X`.
    pub invariance_residual: f64,
    pub test_dim: usize,
    pub invariant: bool,
}

fn scalar_times_identity(u: &Symbol, dim: usize) -> Symbol {
    let coeffs = u.coeffs().iter().map(|c| identity(dim) * c[(0, 0)]).collect();
    Symbol::new(dim, dim, u.m_lo(), coeffs).expect("uniform shapes")
}

/// Span of `R(W_Φ^*)` and `N(T_Θ^*) ⊕ 0 ⊕ 0` on the truncation.
///
/// With `d = deg Φ_E`, generators `W_Φ^* g` are taken for `deg g ≤ N - d`,
/// where every block of `W_Φ^*` is exact. Invariance is checked on the
/// generators with `deg g ≤ N - d - 1` together with `N(T_Θ^*)`. `Θ` is
/// assumed right extremal; only its inner property is checked.
///
/// # Errors
/// Those of [`build_w_phi`]; `ShapeMismatch`, `NotAnalytic` or `NotInner` for
/// `Θ`; `MarginExceeded` if `d > N`.
pub fn invariant_from_symbols(
    triple: &SymbolTriple,
    theta: &Symbol,
    spaces: &CnuSpaces,
    tol: Tol,
) -> Result<SymbolSubspace> {
    if theta.dim_out() != spaces.dim_f {
        return Err(Error::ShapeMismatch(format!(
            "theta has {} rows, expected {}",
            theta.dim_out(),
            spaces.dim_f
        )));
    }
    if !theta.is_analytic(tol) {
        return Err(Error::NotAnalytic("theta".into()));
    }
    if !theta.is_zero(tol) {
        let r = inner_report(theta, tol);
        if let Some(lag) = r.first_failing_lag {
            return Err(Error::NotInner {
                lag,
                residual: r.residual,
            });
        }
    }
    let w = build_w_phi(triple, spaces, tol)?;
    let n = spaces.degree;
    let d = triple.phi_e.degree(tol).unwrap_or(0).max(0) as usize;
    if d > n {
        return Err(Error::MarginExceeded { needed: d, degree: n });
    }
    let wstar = w.adjoint();
    let f0 = triple.dim_in();
    let gen_deg = n - d;
    let gens = wstar.columns(0, f0 * (gen_deg + 1)).into_owned();
    let tests = wstar.columns(0, f0 * gen_deg).into_owned();
    let kt = kernel_scaled(&toeplitz(theta, n, n).adjoint(), tol, 1.0)?;
    let kt = kt.embed(spaces.total_dim(), 0);
    let m = range_scaled(&hstack(&[&gens, kt.basis()]), tol, 1.0)?;
    let x = range_scaled(&hstack(&[&tests, kt.basis()]), tol, 1.0)?;
    let residual = outside_residual(&m, &(spaces.operator() * x.basis()), tol);
    Ok(SymbolSubspace {
        subspace: m,
        generator_degree: gen_deg,
        invariance_residual: residual,
        test_dim: x.dim(),
        invariant: residual <= tol.residual_abs,
    })
}

/// `‖(I - P_M) Y‖`.
fn outside_residual(m: &Subspace, y: &Matrix, tol: Tol) -> f64 {
    if y.ncols() == 0 {
        return 0.0;
    }
    let b = m.basis();
    residual_norm(&(y - b * (b.adjoint() * y)), tol.residual_abs)
}

/// Block-diagonal data `Φ = zΦ_F ⊕ Φ_E ⊕ Φ_1 ⊕ ...` with `F_0 = F ⊕ E ⊕ E'`.
///
/// The Hankel block of `zΦ_F` vanishes, so the resulting subspace splits
/// along the summands.
///
/// # Errors
/// `ShapeMismatch` if a model symbol does not match its block.
pub fn diagonal_triple(
    phi_f: &Symbol,
    phi_e: &Symbol,
    phi_models: &[Symbol],
    spaces: &CnuSpaces,
) -> Result<SymbolTriple> {
    if phi_models.len() != spaces.parts.len() {
        return Err(Error::ShapeMismatch("one model symbol per part is required".into()));
    }
    let zf = phi_f.shifted(1);
    let mut parts: Vec<&Symbol> = vec![&zf, phi_e];
    parts.extend(phi_models.iter());
    let phi = Symbol::block_diag(&parts);
    let (f, e) = (phi_f.dim_out(), phi_e.dim_out());
    let rest = phi.dim_out() - f - e;
    Ok(SymbolTriple {
        phi_f: phi.rows(0, f),
        phi_e: phi.rows(f, e),
        phi_model: phi.rows(f + e, rest),
    })
}

/// The summands of the splitting subspace predicted for [`diagonal_triple`]
/// data: `N(T_Θ^*)`, `R(T_{Φ_E})` on the generator range, and for each block
/// `R(T_{Θ_k}) ∩ E_k`, where `Θ_k` is the factor of `E_k ⊖ N(T_{Φ_k}^*|E_k)`.
///
/// # Errors
/// Propagates factorization errors.
pub fn diagonal_splitting_form(
    theta: &Symbol,
    phi_e: &Symbol,
    phi_models: &[Symbol],
    spaces: &CnuSpaces,
    tol: Tol,
) -> Result<Vec<Subspace>> {
    let n = spaces.degree;
    let d = phi_e.degree(tol).unwrap_or(0).max(0) as usize;
    if d > n {
        return Err(Error::MarginExceeded { needed: d, degree: n });
    }
    let mut out = vec![
        kernel_scaled(&toeplitz(theta, n, n).adjoint(), tol, 1.0)?,
        range_scaled(&toeplitz(phi_e, n - d, n), tol, 1.0)?,
    ];
    for (&(k, e), phi_k) in spaces.parts.iter().zip(phi_models) {
        let kernel_k = kernel_scaled(&toeplitz(phi_k, k - 1, k - 1).adjoint(), tol, 1.0)?;
        let invariant_k = kernel_k.complement();
        let theta_k = factor_invariant_jk(&invariant_k, e, k, tol)?.theta;
        let range = range_scaled(&toeplitz(&theta_k, 2 * k, 2 * k), tol, 1.0)?;
        let model: Vec<usize> = (0..e * k).collect();
        let inside = intersect(&range, &Subspace::coordinate(e * (2 * k + 1), &model), tol)?;
        out.push(inside.restrict_rows(0, e * k, tol)?);
    }
    Ok(out)
}

/// Random triple `Φ = D V`, with `V` an analytic inner symbol from `C^f0` and
/// `D = z^{-s} I_F ⊕ I`, so `Φ_F` reaches degree `-s`.
pub fn random_symbol_triple<R: Rng + ?Sized>(
    rng: &mut R,
    spaces: &CnuSpaces,
    f0: usize,
    s: usize,
    factors: usize,
) -> SymbolTriple {
    let (f, e, ep) = (spaces.dim_f, spaces.dim_e, spaces.model_coeff_dim());
    let v = isometric_inner(rng, f + e + ep, f0, factors);
    let d = Symbol::block_diag(&[
        &Symbol::monomial(-(s as i64), identity(f)),
        &Symbol::constant(identity(e + ep)),
    ]);
    let phi = d.mul(&v).expect("composable");
    SymbolTriple {
        phi_f: phi.rows(0, f),
        phi_e: phi.rows(f, e),
        phi_model: phi.rows(f + e, ep),
    }
}

/// A divisibility condition that fails at a present index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisibilityViolation {
    /// `"u"` or `"v"`.
    pub function: String,
    pub k: usize,
    /// Position of the part in the chain.
    pub position: usize,
    pub required_order: usize,
    pub order: usize,
}

/// A hyperinvariant candidate with its divisibility verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperCandidate {
    pub subspace: Subspace,
    pub valid: bool,
    pub violations: Vec<DivisibilityViolation>,
    pub convention: &'static str,
}

/// The three candidate shapes on `H²_F ⊕ H²_E ⊕ (⊕E_k)`.
#[derive(Clone, Debug, PartialEq)]
pub enum CnuForm {
    /// `H²_F ⊕ {0} ⊕ (⊕N(J_k^{n_k}))`.
    FullBackward,
    /// `[vH²_F]^⊥ ⊕ {0} ⊕ (⊕N(J_k^{n_k}))`, valid when `ord v ≥ n_k`.
    BackwardModel { v: Symbol },
    /// `H²_F ⊕ uH²_E ⊕ (⊕N(J_k^{n_k}))`, valid when `ord u ≥ k - n_k`.
    ForwardRange { u: Symbol },
}

fn check_chain(chain: &Chain, spaces: &CnuSpaces) -> Result<()> {
    let present: Vec<(usize, usize)> = spaces.parts.iter().copied().filter(|&(_, m)| m > 0).collect();
    if chain.parts != spaces.parts && chain.parts != present {
        return Err(Error::BadSpec("chain parts differ from the space parts".into()));
    }
    chain.check_admissible()
}

/// Order of a scalar inner monomial, or `None` for the zero symbol.
fn monomial_order(u: &Symbol, spaces: &CnuSpaces, tol: Tol) -> Result<Option<usize>> {
    if u.dim_out() == 1 && u.dim_in() == 1 && u.is_zero(tol) {
        return Ok(None);
    }
    let (p, _) = monomial_certificate(u, tol)?;
    if p > spaces.degree {
        return Err(Error::MarginExceeded {
            needed: p,
            degree: spaces.degree,
        });
    }
    Ok(Some(p))
}

/// Embeds the chain subspace at the model offset, with coordinates of `F`
/// and `E` given separately.
fn assemble(spaces: &CnuSpaces, f_part: &Subspace, e_part: &Subspace, chain: &Chain) -> Subspace {
    let mut model = chain_subspace(chain);
    if model.ambient_dim() != spaces.model_dim() {
        // Chains carry only present parts; pad absent ones with nothing.
        model = Subspace::zero(spaces.model_dim());
    }
    Subspace::direct_sum(&[f_part.clone(), e_part.clone(), model])
}

/// Conditions on `u` are vacuous without a forward-shift part, and so are
/// those on `v` without a backward-shift part.
fn u_violations(order: Option<usize>, chain: &Chain, spaces: &CnuSpaces) -> Vec<DivisibilityViolation> {
    let Some(p) = order.filter(|_| spaces.dim_e > 0) else {
        return Vec::new();
    };
    chain
        .parts
        .iter()
        .zip(&chain.values)
        .enumerate()
        .filter(|(_, (&(_, m), _))| m > 0)
        .filter_map(|(pos, (&(k, _), &n))| {
            (p < k - n).then(|| DivisibilityViolation {
                function: "u".into(),
                k,
                position: pos,
                required_order: k - n,
                order: p,
            })
        })
        .collect()
}

fn v_violations(q: usize, chain: &Chain, spaces: &CnuSpaces) -> Vec<DivisibilityViolation> {
    if spaces.dim_f == 0 {
        return Vec::new();
    }
    chain
        .parts
        .iter()
        .zip(&chain.values)
        .enumerate()
        .filter(|(_, (&(_, m), _))| m > 0)
        .filter_map(|(pos, (&(k, _), &n))| {
            (q < n).then(|| DivisibilityViolation {
                function: "v".into(),
                k,
                position: pos,
                required_order: n,
                order: q,
            })
        })
        .collect()
}

/// `uH²_E` on the truncation, as the range of `T_{uI}`.
fn forward_range(u: &Symbol, spaces: &CnuSpaces, tol: Tol) -> Result<Subspace> {
    let n = spaces.degree;
    if u.is_zero(tol) || spaces.dim_e == 0 {
        return Ok(Subspace::zero(spaces.forward().dim()));
    }
    range_scaled(&toeplitz(&scalar_times_identity(u, spaces.dim_e), n, n), tol, 1.0)
}

/// Candidate `uH²_E ⊕ (⊕N(J_k^{n_k}))` for the pure operator `M_z ⊕ (⊕J_k)`.
///
/// `u` is a scalar inner monomial or zero; the divisibility condition
/// `ord u ≥ k - n_k` is imposed at present indices only.
///
/// # Errors
/// `BadSpec` if the space has a backward-shift part or the chain does not
/// match its parts; `ChainInadmissible`; `NotInner`/`NotMonomial` for `u`;
/// `MarginExceeded` if `ord u > N`.
pub fn hyper_candidate_pure(u: &Symbol, chain: &Chain, spaces: &CnuSpaces, tol: Tol) -> Result<HyperCandidate> {
    if spaces.dim_f != 0 {
        return Err(Error::BadSpec("the pure model has no backward-shift part".into()));
    }
    check_chain(chain, spaces)?;
    let order = monomial_order(u, spaces, tol)?;
    let e_part = forward_range(u, spaces, tol)?;
    let violations = u_violations(order, chain, spaces);
    Ok(HyperCandidate {
        subspace: assemble(spaces, &Subspace::zero(0), &e_part, chain),
        valid: violations.is_empty(),
        violations,
        convention: FINITE_SUPPORT_CONVENTION,
    })
}

/// Candidate of the given form for `M_z^* ⊕ M_z ⊕ (⊕J_k)`.
///
/// `[vH²_F]^⊥` is the orthogonal complement of the range of `T_{vI}` on the
/// truncation. Divisibility is imposed at present indices only.
///
/// # Errors
/// `BadSpec`; `ChainInadmissible`; `NotInner`/`NotMonomial`; `MarginExceeded`.
pub fn hyper_candidate_cnu(form: &CnuForm, chain: &Chain, spaces: &CnuSpaces, tol: Tol) -> Result<HyperCandidate> {
    check_chain(chain, spaces)?;
    let n = spaces.degree;
    let full_f = Subspace::full(spaces.backward().dim());
    let zero_e = Subspace::zero(spaces.forward().dim());
    let (f_part, e_part, violations) = match form {
        CnuForm::FullBackward => (full_f, zero_e, Vec::new()),
        CnuForm::BackwardModel { v } => {
            let q = monomial_order(v, spaces, tol)?
                .ok_or_else(|| Error::BadSpec("v must be a nonzero inner monomial".into()))?;
            let f_part = if spaces.dim_f == 0 {
                full_f
            } else {
                let vi = scalar_times_identity(v, spaces.dim_f);
                range_scaled(&toeplitz(&vi, n, n), tol, 1.0)?.complement()
            };
            (f_part, zero_e, v_violations(q, chain, spaces))
        }
        CnuForm::ForwardRange { u } => {
            let order = monomial_order(u, spaces, tol)?;
            (full_f, forward_range(u, spaces, tol)?, u_violations(order, chain, spaces))
        }
    };
    Ok(HyperCandidate {
        subspace: assemble(spaces, &f_part, &e_part, chain),
        valid: violations.is_empty(),
        violations,
        convention: FINITE_SUPPORT_CONVENTION,
    })
}

/// Block forms of operators commuting with `M_z^* ⊕ M_z ⊕ (⊕J_k)` that move
/// vectors between summands or act within one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntertwinerForm {
    /// `P_𝔼 T_Φ` from `H²_E` into the model blocks, `Φ` analytic.
    ShiftToModel,
    /// `H_Φ|_{E_k}` from a model block into `H²_F`, with `z^k H² ⊆ N(H_Φ)`.
    ModelToBackward,
    /// `H_Φ` from `H²_E` into `H²_F`.
    ShiftToBackward,
    /// `T_Ψ` on `H²_E`, `Ψ` analytic.
    WithinShift,
    /// `T_Ψ^*` on `H²_F`, `Ψ` analytic.
    WithinBackward,
    /// Commutant of `⊕J_k`.
    WithinModel,
}

impl IntertwinerForm {
    pub const ALL: [IntertwinerForm; 6] = [
        IntertwinerForm::ShiftToModel,
        IntertwinerForm::ModelToBackward,
        IntertwinerForm::ShiftToBackward,
        IntertwinerForm::WithinShift,
        IntertwinerForm::WithinBackward,
        IntertwinerForm::WithinModel,
    ];

    /// Forms that exist without a backward-shift part.
    pub const PURE: [IntertwinerForm; 3] = [
        IntertwinerForm::ShiftToModel,
        IntertwinerForm::WithinShift,
        IntertwinerForm::WithinModel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntertwinerForm::ShiftToModel => "shift_to_model",
            IntertwinerForm::ModelToBackward => "model_to_backward",
            IntertwinerForm::ShiftToBackward => "shift_to_backward",
            IntertwinerForm::WithinShift => "within_shift",
            IntertwinerForm::WithinBackward => "within_backward",
            IntertwinerForm::WithinModel => "within_model",
        }
    }
}

/// Degree bound of sampled analytic symbols; also the test-vector margin.
pub const SAMPLE_DEGREE: usize = 2;

/// Draws random intertwiners of each block form on a truncated c.n.u. space.
#[derive(Clone, Debug)]
pub struct IntertwinerSampler {
    spaces: CnuSpaces,
    model_commutant: Vec<Matrix>,
}

impl IntertwinerSampler {
    /// # Errors
    /// `BadDegree` if `N` leaves no room for the sampling margin.
    pub fn new(spaces: &CnuSpaces, tol: Tol) -> Result<Self> {
        if spaces.degree < 2 * SAMPLE_DEGREE {
            return Err(Error::BadDegree {
                degree: spaces.degree,
                needed: 2 * SAMPLE_DEGREE,
            });
        }
        Ok(IntertwinerSampler {
            spaces: spaces.clone(),
            model_commutant: commutant_basis_blocks(&shift_blocks(&spaces.parts), tol)?,
        })
    }

    pub fn spaces(&self) -> &CnuSpaces {
        &self.spaces
    }

    /// Vectors on which every sampled form acts as the true operator would.
    pub fn test_space(&self) -> Subspace {
        self.spaces.safe_subspace(SAMPLE_DEGREE)
    }

    /// A random intertwiner of the given form, or `None` when the form has no
    /// room in these spaces.
    pub fn sample<R: Rng + ?Sized>(&self, form: IntertwinerForm, rng: &mut R) -> Option<Matrix> {
        let sp = &self.spaces;
        let n = sp.degree;
        let mut s = Matrix::zeros(sp.total_dim(), sp.total_dim());
        let (f_dim, e_dim, e_off) = (sp.backward().dim(), sp.forward().dim(), sp.e_offset());
        match form {
            IntertwinerForm::ShiftToModel => {
                if sp.dim_e == 0 || sp.parts.is_empty() {
                    return None;
                }
                for (&(k, ek), off) in sp.parts.iter().zip(sp.block_offsets()) {
                    let phi = laurent_symbol(rng, ek, sp.dim_e, 0, SAMPLE_DEGREE as i64);
                    let blk = toeplitz(&phi, n, k - 1);
                    s.view_mut((off, e_off), blk.shape()).copy_from(&blk);
                }
            }
            IntertwinerForm::ModelToBackward => {
                if sp.dim_f == 0 || sp.parts.is_empty() {
                    return None;
                }
                for (&(k, ek), off) in sp.parts.iter().zip(sp.block_offsets()) {
                    let phi = laurent_symbol(rng, sp.dim_f, ek, -(k as i64 - 1), 0);
                    let blk = hankel(&phi, k - 1, n);
                    s.view_mut((0, off), blk.shape()).copy_from(&blk);
                }
            }
            IntertwinerForm::ShiftToBackward => {
                if sp.dim_f == 0 || sp.dim_e == 0 {
                    return None;
                }
                let lo = -(SAMPLE_DEGREE as i64);
                let phi = laurent_symbol(rng, sp.dim_f, sp.dim_e, lo, SAMPLE_DEGREE as i64);
                let blk = hankel(&phi, n, n);
                s.view_mut((0, e_off), blk.shape()).copy_from(&blk);
            }
            IntertwinerForm::WithinShift => {
                if sp.dim_e == 0 {
                    return None;
                }
                let psi = laurent_symbol(rng, sp.dim_e, sp.dim_e, 0, SAMPLE_DEGREE as i64);
                let blk = toeplitz(&psi, n, n);
                s.view_mut((e_off, e_off), (e_dim, e_dim)).copy_from(&blk);
            }
            IntertwinerForm::WithinBackward => {
                if sp.dim_f == 0 {
                    return None;
                }
                let psi = laurent_symbol(rng, sp.dim_f, sp.dim_f, 0, SAMPLE_DEGREE as i64);
                let blk = toeplitz(&psi, n, n).adjoint();
                s.view_mut((0, 0), (f_dim, f_dim)).copy_from(&blk);
            }
            IntertwinerForm::WithinModel => {
                if self.model_commutant.is_empty() {
                    return None;
                }
                let m_off = sp.model_offset();
                let mut blk = Matrix::zeros(sp.model_dim(), sp.model_dim());
                for b in &self.model_commutant {
                    blk += b * complex_normal(rng);
                }
                blk /= C64::new(blk.norm().max(1e-12), 0.0);
                s.view_mut((m_off, m_off), blk.shape()).copy_from(&blk);
            }
        }
        Some(s)
    }
}

/// `‖(S T - T S) P_X‖` over the sampler's test space, with one extra degree of
/// margin so that `T` itself stays exact.
pub fn commutation_residual(s: &Matrix, spaces: &CnuSpaces, tol: Tol) -> f64 {
    let t = spaces.operator();
    let x = spaces.safe_subspace(SAMPLE_DEGREE + 1);
    residual_norm(&((s * &t - &t * s) * x.basis()), tol.residual_abs)
}

/// `‖(I - P_M) S P_X‖` where `X = M ∩ test`.
pub fn intertwiner_residual(m: &Subspace, test: &Subspace, s: &Matrix, tol: Tol) -> Result<f64> {
    check_dim(m.ambient_dim(), test.ambient_dim())?;
    check_dim(m.ambient_dim(), s.ncols())?;
    Ok(outside_residual(m, &(s * test.basis()), tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledReport {
    /// Worst residual per form name, over the forms that exist in the space.
    pub worst: BTreeMap<String, f64>,
    pub samples_per_form: usize,
    pub passed: bool,
}

impl SampledReport {
    pub fn max(&self) -> f64 {
        self.worst.values().copied().fold(0.0, f64::max)
    }
}

/// Invariance of `m` under `samples` random intertwiners of each form.
///
/// # Errors
/// `DimMismatch` if `m` does not live in the sampler's space.
pub fn sampled_hyperinvariance<R: Rng + ?Sized>(
    m: &Subspace,
    sampler: &IntertwinerSampler,
    forms: &[IntertwinerForm],
    samples: usize,
    rng: &mut R,
    tol: Tol,
) -> Result<SampledReport> {
    check_dim(sampler.spaces.total_dim(), m.ambient_dim())?;
    let x = intersect(m, &sampler.test_space(), tol)?;
    let mut worst = BTreeMap::new();
    for &form in forms {
        for _ in 0..samples {
            let Some(s) = sampler.sample(form, rng) else {
                break;
            };
            let r = intertwiner_residual(m, &x, &s, tol)?;
            let w = worst.entry(form.name().to_string()).or_insert(0.0_f64);
            *w = w.max(r);
        }
    }
    let passed = worst.values().all(|&r| r <= tol.residual_abs);
    Ok(SampledReport {
        worst,
        samples_per_form: samples,
        passed,
    })
}

/// `P_{E_k} T_Φ` with constant `Φ` sending the first coordinate of `E` to the
/// first coordinate of the block at `pos`.
pub fn shift_to_model_witness(spaces: &CnuSpaces, pos: usize) -> Matrix {
    let mut s = Matrix::zeros(spaces.total_dim(), spaces.total_dim());
    let (k, ek) = spaces.parts[pos];
    let off = spaces.block_offsets()[pos];
    for d in 0..k {
        s[(off + d * ek, spaces.e_offset() + d * spaces.dim_e)] = ONE;
    }
    s
}

/// `H_Φ|_{E_k}` with `Φ = φ z^{-(k-1)}`, `φ` sending the first coordinate of
/// the block at `pos` to the first coordinate of `F`.
pub fn model_to_backward_witness(spaces: &CnuSpaces, pos: usize) -> Matrix {
    let (k, ek) = spaces.parts[pos];
    let mut phi0 = Matrix::zeros(spaces.dim_f, ek);
    phi0[(0, 0)] = ONE;
    let phi = Symbol::monomial(-(k as i64 - 1), phi0);
    let blk = hankel(&phi, k - 1, spaces.degree);
    let mut s = Matrix::zeros(spaces.total_dim(), spaces.total_dim());
    s.view_mut((0, spaces.block_offsets()[pos]), blk.shape()).copy_from(&blk);
    s
}

/// Explicit intertwiner breaking the given divisibility violation.
pub fn divisibility_witness(v: &DivisibilityViolation, spaces: &CnuSpaces) -> Matrix {
    if v.function == "u" {
        shift_to_model_witness(spaces, v.position)
    } else {
        model_to_backward_witness(spaces, v.position)
    }
}

/// The truncated counterexample on `H² ⊕ C ⊕ C² ⊕ C³ ⊕ C⁴`: the candidate
/// `zH² ⊕ (⊕N(J_k))` is invariant under `M_z ⊕ (⊕J_k)` but not under the
/// intertwiner `f ↦ P(zf)` into the fourth block.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftModelCounterexample {
    pub spaces: CnuSpaces,
    pub s_prime: Matrix,
    pub m: Subspace,
    /// `‖(I - P_M) S' P_M‖`.
    pub violation_residual: f64,
    pub commutation_residual: f64,
    /// Chain `n_k = k - 1` with `u = z`.
    pub repaired_chain: Chain,
    pub repaired: Subspace,
}

/// # Errors
/// `BadDegree` for `degree < 2 * SAMPLE_DEGREE`.
pub fn shift_model_counterexample(degree: usize, tol: Tol) -> Result<ShiftModelCounterexample> {
    let parts: Vec<(usize, usize)> = (1..=4).map(|k| (k, 1)).collect();
    let spaces = CnuSpaces::new(0, 1, parts.clone(), degree.max(2 * SAMPLE_DEGREE))?;
    if degree < 2 * SAMPLE_DEGREE {
        return Err(Error::BadDegree {
            degree,
            needed: 2 * SAMPLE_DEGREE,
        });
    }
    let z = Symbol::scalar(1, &[ONE]);
    let chain = Chain::new(parts.clone(), vec![1; 4])?;
    let m = hyper_candidate_pure(&z, &chain, &spaces, tol)?.subspace;
    let mut s_prime = Matrix::zeros(spaces.total_dim(), spaces.total_dim());
    let blk = toeplitz(&z, degree, 3);
    s_prime
        .view_mut((spaces.block_offsets()[3], spaces.e_offset()), blk.shape())
        .copy_from(&blk);
    let violation_residual = outside_residual(&m, &(&s_prime * m.basis()), tol);
    let commutation_residual = commutation_residual(&s_prime, &spaces, tol);
    let repaired_chain = Chain::new(parts, vec![0, 1, 2, 3])?;
    let repaired = hyper_candidate_pure(&z, &repaired_chain, &spaces, tol)?.subspace;
    Ok(ShiftModelCounterexample {
        spaces,
        s_prime,
        m,
        violation_residual,
        commutation_residual,
        repaired_chain,
        repaired,
    })
}

/// Distance of `S x` from `M`.
pub fn image_distance(s: &Matrix, m: &Subspace, x: &Vector) -> f64 {
    m.distance(&(s * x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::is_inner;
    use crate::lattice::enumerate_admissible_chains;
    use crate::numkit::{real_matrix, ZERO};
    use crate::random::{gaussian, potapov_inner, rng};

    fn tol() -> Tol {
        Tol::default()
    }

    fn orbit_span(x: &Matrix, e: usize, k: usize) -> Subspace {
        let j = jk_matrix(e, k);
        let mut cols = vec![x.clone()];
        for _ in 1..k {
            let next = &j * cols.last().unwrap();
            cols.push(next);
        }
        let refs: Vec<&Matrix> = cols.iter().collect();
        range_scaled(&hstack(&refs), tol(), 1.0).unwrap()
    }

    fn approx_symbol(a: &Symbol, b: &Symbol) -> bool {
        let lo = a.m_lo().min(b.m_lo());
        let hi = a.m_hi().max(b.m_hi());
        (lo..=hi).all(|m| (a.coeff(m) - b.coeff(m)).norm() < 1e-10)
    }

    #[test]
    fn zero_subspace_factors_as_pure_power() {
        let f = factor_invariant_jk(&Subspace::zero(6), 2, 3, tol()).unwrap();
        assert!(approx_symbol(&f.theta, &Symbol::monomial(3, identity(2))));
        assert!(approx_symbol(&f.phi, &Symbol::constant(identity(2))));
        assert!(verify_factorization(&f, &Subspace::zero(6), tol()).passed(tol()));
    }

    #[test]
    fn full_model_factors_as_identity() {
        let f = factor_invariant_jk(&Subspace::full(6), 2, 3, tol()).unwrap();
        assert!(approx_symbol(&f.theta, &Symbol::constant(identity(2))));
        assert!(approx_symbol(&f.phi, &Symbol::monomial(3, identity(2))));
        let r = verify_factorization(&f, &Subspace::full(6), tol());
        assert!(r.passed(tol()), "{r:?}");
    }

    #[test]
    fn top_slot_of_j3_factors_as_z_squared() {
        let m = Subspace::coordinate(3, &[2]);
        let f = factor_invariant_jk(&m, 1, 3, tol()).unwrap();
        assert!(approx_symbol(&f.theta, &Symbol::scalar(2, &[ONE])));
        assert!(approx_symbol(&f.phi, &Symbol::scalar(1, &[ONE])));
        let r = verify_factorization(&f, &m, tol());
        assert!(r.passed(tol()), "{r:?}");
    }

    #[test]
    fn non_invariant_subspace_is_rejected() {
        let m = Subspace::coordinate(3, &[0]);
        assert!(matches!(
            factor_invariant_jk(&m, 1, 3, tol()),
            Err(Error::NotInvariant { .. })
        ));
    }

    #[test]
    fn random_orbit_spans_round_trip() {
        let mut r = rng(5);
        for (e, k) in [(1, 1), (1, 4), (2, 3), (3, 2), (4, 5)] {
            for cols in 1..=2 {
                let m = orbit_span(&gaussian(&mut r, e * k, cols), e, k);
                let f = factor_invariant_jk(&m, e, k, tol()).unwrap();
                let res = verify_factorization(&f, &m, tol());
                assert!(res.passed(tol()), "e={e} k={k}: {res:?}");
            }
        }
    }

    #[test]
    fn factorization_json_round_trip() {
        let m = Subspace::coordinate(3, &[1, 2]);
        let f = factor_invariant_jk(&m, 1, 3, tol()).unwrap();
        let res = verify_factorization(&f, &m, tol());
        let js = serde_json::to_string(&f.to_json(Some(res))).unwrap();
        let back: FactorizationJson = serde_json::from_str(&js).unwrap();
        assert_eq!(back.to_factorization().unwrap(), f);
        assert!(back.residuals.is_some());
    }

    fn spaces() -> CnuSpaces {
        CnuSpaces::new(1, 1, vec![(1, 1), (2, 1), (3, 1)], 6).unwrap()
    }

    #[test]
    fn cnu_layout() {
        let sp = spaces();
        assert_eq!(sp.e_offset(), 7);
        assert_eq!(sp.model_offset(), 14);
        assert_eq!(sp.block_offsets(), vec![14, 15, 17]);
        assert_eq!(sp.total_dim(), 20);
        assert!(matches!(
            CnuSpaces::new(1, 1, vec![(5, 1)], 4),
            Err(Error::BadDegree { .. })
        ));
    }

    #[test]
    fn w_phi_with_identity_on_forward_part_is_a_coordinate_projection() {
        let sp = CnuSpaces::new(1, 1, vec![(2, 1)], 4).unwrap();
        let triple = SymbolTriple {
            phi_f: Symbol::zero(1, 1),
            phi_e: Symbol::constant(identity(1)),
            phi_model: Symbol::zero(1, 1),
        };
        let w = build_w_phi(&triple, &sp, tol()).unwrap();
        let mut expected = Matrix::zeros(5, sp.total_dim());
        for d in 0..5 {
            expected[(d, sp.e_offset() + d)] = ONE;
        }
        assert!((w - expected).norm() < 1e-14);
    }

    #[test]
    fn w_phi_rejects_bad_symbols() {
        let sp = CnuSpaces::new(1, 1, vec![(2, 1)], 4).unwrap();
        let half = real_matrix(1, 1, &[0.5]);
        let not_iso = SymbolTriple {
            phi_f: Symbol::zero(1, 1),
            phi_e: Symbol::constant(half),
            phi_model: Symbol::zero(1, 1),
        };
        assert!(matches!(build_w_phi(&not_iso, &sp, tol()), Err(Error::NotIsometricSymbol { .. })));
        let anti = SymbolTriple {
            phi_f: Symbol::zero(1, 1),
            phi_e: Symbol::monomial(-1, identity(1)),
            phi_model: Symbol::zero(1, 1),
        };
        assert!(matches!(build_w_phi(&anti, &sp, tol()), Err(Error::NotAnalytic(_))));
        let deep = SymbolTriple {
            phi_f: Symbol::monomial(-9, identity(1)),
            phi_e: Symbol::zero(1, 1),
            phi_model: Symbol::zero(1, 1),
        };
        assert!(matches!(build_w_phi(&deep, &sp, tol()), Err(Error::MarginExceeded { .. })));
    }

    #[test]
    fn w_phi_gram_matches_block_products() {
        let sp = CnuSpaces::new(1, 1, vec![(2, 1)], 5).unwrap();
        let mut r = rng(8);
        let triple = random_symbol_triple(&mut r, &sp, 1, 1, 1);
        let w = build_w_phi(&triple, &sp, tol()).unwrap();
        let n = sp.degree;
        let h = hankel(&triple.phi_f, n, n);
        let t = toeplitz(&triple.phi_e, n, n);
        let p = toeplitz(&triple.phi_model, n, 1);
        let direct = h.adjoint() * &h + t.adjoint() * &t + p.adjoint() * &p;
        assert!((&w * w.adjoint() - direct).norm() < 1e-12);
    }

    #[test]
    fn unitary_theta_and_zero_phi_give_zero_subspace() {
        let sp = spaces();
        let triple = SymbolTriple::zero(&sp, 1);
        let out = invariant_from_symbols(&triple, &Symbol::constant(identity(1)), &sp, tol()).unwrap();
        assert_eq!(out.subspace.dim(), 0);
    }

    #[test]
    fn zero_theta_gives_the_whole_backward_part() {
        let sp = spaces();
        let triple = SymbolTriple::zero(&sp, 1);
        let out = invariant_from_symbols(&triple, &Symbol::zero(1, 1), &sp, tol()).unwrap();
        let f: Vec<usize> = (0..sp.e_offset()).collect();
        assert!(out.subspace.approx_eq(&Subspace::coordinate(sp.total_dim(), &f), tol()).unwrap());
    }

    #[test]
    fn theta_z_gives_constants() {
        let sp = spaces();
        let triple = SymbolTriple::zero(&sp, 1);
        let out = invariant_from_symbols(&triple, &Symbol::scalar(1, &[ONE]), &sp, tol()).unwrap();
        assert!(out.subspace.approx_eq(&Subspace::coordinate(sp.total_dim(), &[0]), tol()).unwrap());
        assert!(out.invariant);
    }

    #[test]
    fn random_triples_give_invariant_subspaces() {
        let sp = CnuSpaces::new(2, 1, vec![(1, 1), (3, 1)], 8).unwrap();
        let mut r = rng(17);
        for trial in 0..10 {
            let f0 = 1 + trial % 3;
            let triple = random_symbol_triple(&mut r, &sp, f0, trial % 3, 1 + trial % 2);
            let theta = isometric_inner(&mut r, 2, trial % 3, 1);
            let out = invariant_from_symbols(&triple, &theta, &sp, tol()).unwrap();
            assert!(out.invariant, "trial {trial}: {}", out.invariance_residual);
            assert!(out.subspace.dim() > 0);
        }
    }

    #[test]
    fn diagonal_data_split_along_summands() {
        let sp = CnuSpaces::new(1, 2, vec![(2, 1), (3, 2)], 8).unwrap();
        let mut r = rng(3);
        let phi_f = potapov_inner(&mut r, 1, 1);
        let phi_e = potapov_inner(&mut r, 2, 1);
        let phi_models = vec![potapov_inner(&mut r, 1, 1), potapov_inner(&mut r, 2, 2)];
        let theta = Symbol::scalar(2, &[ONE]);
        let triple = diagonal_triple(&phi_f, &phi_e, &phi_models, &sp).unwrap();
        assert!(hankel(&triple.phi_f, 8, 8).norm() < 1e-14);
        let m = invariant_from_symbols(&triple, &theta, &sp, tol()).unwrap().subspace;
        let expected = diagonal_splitting_form(&theta, &phi_e, &phi_models, &sp, tol()).unwrap();
        let blocks = sp.summand_projections(&m, tol()).unwrap();
        assert_eq!(blocks.len(), expected.len());
        for (got, want) in blocks.iter().zip(&expected) {
            assert!(got.approx_eq(want, tol()).unwrap());
        }
        assert!(m.approx_eq(&Subspace::direct_sum(&expected), tol()).unwrap());
    }

    #[test]
    fn pure_candidate_examples() {
        let sp = CnuSpaces::new(0, 1, vec![(4, 1)], 8).unwrap();
        let z = Symbol::scalar(1, &[ONE]);
        let c3 = Chain::new(vec![(4, 1)], vec![3]).unwrap();
        assert!(hyper_candidate_pure(&z, &c3, &sp, tol()).unwrap().valid);
        let c1 = Chain::new(vec![(4, 1)], vec![1]).unwrap();
        let bad = hyper_candidate_pure(&z, &c1, &sp, tol()).unwrap();
        assert!(!bad.valid);
        assert_eq!(bad.violations[0].required_order, 3);
        let zero = Symbol::zero(1, 1);
        let c0 = hyper_candidate_pure(&zero, &c1, &sp, tol()).unwrap();
        assert!(c0.valid);
        assert_eq!(c0.subspace.dim(), 1);
        let sp2 = CnuSpaces::new(0, 1, vec![(1, 1), (4, 1)], 8).unwrap();
        let c = Chain::new(vec![(1, 1), (4, 1)], vec![1, 0]).unwrap();
        assert!(matches!(
            hyper_candidate_pure(&zero, &c, &sp2, tol()),
            Err(Error::ChainInadmissible { .. })
        ));
    }

    #[test]
    fn cnu_candidate_examples() {
        let sp = CnuSpaces::new(1, 1, vec![(3, 1)], 8).unwrap();
        let c2 = Chain::new(vec![(3, 1)], vec![2]).unwrap();
        let v = Symbol::scalar(2, &[ONE]);
        let cand = hyper_candidate_cnu(&CnuForm::BackwardModel { v }, &c2, &sp, tol()).unwrap();
        assert!(cand.valid);
        // [z²H²]^⊥ = span{1, z} in the backward part.
        assert_eq!(cand.subspace.dim(), 2 + 2);
        assert!(hyper_candidate_cnu(&CnuForm::FullBackward, &c2, &sp, tol()).unwrap().valid);
        let u = Symbol::scalar(0, &[ONE]);
        let bad = hyper_candidate_cnu(&CnuForm::ForwardRange { u }, &c2, &sp, tol()).unwrap();
        assert!(!bad.valid);
        let not_mono = Symbol::scalar(0, &[C64::new(0.6, 0.0), C64::new(0.8, 0.0)]);
        assert!(hyper_candidate_cnu(&CnuForm::ForwardRange { u: not_mono }, &c2, &sp, tol()).is_err());
    }

    #[test]
    fn sampled_forms_commute_with_the_operator() {
        let sp = CnuSpaces::new(2, 1, vec![(1, 1), (2, 2), (4, 1)], 8).unwrap();
        let sampler = IntertwinerSampler::new(&sp, tol()).unwrap();
        let mut r = rng(4);
        for form in IntertwinerForm::ALL {
            for _ in 0..5 {
                let s = sampler.sample(form, &mut r).unwrap();
                assert!(commutation_residual(&s, &sp, tol()) < 1e-12, "{form:?}");
            }
        }
        for pos in 0..3 {
            assert!(commutation_residual(&shift_to_model_witness(&sp, pos), &sp, tol()) < 1e-14);
            assert!(commutation_residual(&model_to_backward_witness(&sp, pos), &sp, tol()) < 1e-14);
        }
    }

    #[test]
    fn valid_candidates_survive_sampling_and_invalid_ones_have_witnesses() {
        let sp = CnuSpaces::new(1, 1, vec![(1, 1), (2, 1), (3, 1)], 8).unwrap();
        let sampler = IntertwinerSampler::new(&sp, tol()).unwrap();
        let mut r = rng(9);
        let test = sampler.test_space();
        for chain in enumerate_admissible_chains(&sp.parts).unwrap() {
            for p in 0..=3 {
                let mono = Symbol::monomial(p, identity(1));
                for form in [
                    CnuForm::FullBackward,
                    CnuForm::BackwardModel { v: mono.clone() },
                    CnuForm::ForwardRange { u: mono.clone() },
                ] {
                    let cand = hyper_candidate_cnu(&form, &chain, &sp, tol()).unwrap();
                    if cand.valid {
                        let rep = sampled_hyperinvariance(&cand.subspace, &sampler, &IntertwinerForm::ALL, 5, &mut r, tol()).unwrap();
                        assert!(rep.passed, "{chain:?} {form:?} {rep:?}");
                    } else {
                        let x = intersect(&cand.subspace, &test, tol()).unwrap();
                        for v in &cand.violations {
                            let s = divisibility_witness(v, &sp);
                            let res = intertwiner_residual(&cand.subspace, &x, &s, tol()).unwrap();
                            assert!(res > 0.5, "{chain:?} {form:?} {v:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn counterexample_reproduces_unit_violation() {
        let ex = shift_model_counterexample(8, tol()).unwrap();
        assert!((ex.violation_residual - 1.0).abs() < 1e-10);
        assert!(ex.commutation_residual < 1e-14);
        let mut r = rng(1);
        let sampler = IntertwinerSampler::new(&ex.spaces, tol()).unwrap();
        let rep = sampled_hyperinvariance(&ex.repaired, &sampler, &IntertwinerForm::PURE, 20, &mut r, tol()).unwrap();
        assert!(rep.passed, "{rep:?}");
        let mut az = Vector::zeros(ex.spaces.total_dim());
        az[ex.spaces.e_offset() + 1] = ONE;
        assert!((image_distance(&ex.s_prime, &ex.m, &az) - 1.0).abs() < 1e-12);
        az[ex.spaces.e_offset() + 1] = ZERO;
        assert_eq!(image_distance(&ex.s_prime, &ex.m, &az), 0.0);
    }

    #[test]
    fn factor_thetas_are_inner() {
        let mut r = rng(12);
        let m = orbit_span(&gaussian(&mut r, 6, 1), 2, 3);
        let f = factor_invariant_jk(&m, 2, 3, tol()).unwrap();
        assert!(is_inner(&f.theta, tol()) && is_inner(&f.phi, tol()));
    }
}
