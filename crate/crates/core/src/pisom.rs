//! Partial isometries, power partial isometries and the Halmos–Wallen
//! decomposition.
//!
//! For a power partial isometry every power `T^n` has singular values in
//! `{0, 1}`, and so do its restrictions to the kernels and ranges that appear
//! below. Ranges and kernels of such maps are therefore computed with the
//! absolute cutoff [`PI_CUTOFF`] instead of the relative rank rule, which keeps
//! them stable when a power is zero up to rounding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardy::jk_matrix;
use crate::numkit::{
    block_diag, check_finite, check_square, hstack, identity, intersect, kernel_below,
    orthonormal_range, range_above, residual_norm, subspace_gap, Matrix, MatrixJson, Subspace,
    Tol,
};

/// Singular-value cutoff for maps whose singular values are known to be 0 or 1.
pub const PI_CUTOFF: f64 = 0.5;

/// Residuals of the six equivalent partial-isometry criteria.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiResiduals {
    /// `T` is isometric on `N(T)^⊥`.
    pub isometric_on_initial_space: f64,
    /// `T^*` is isometric on `N(T^*)^⊥`.
    pub adjoint_isometric_on_initial_space: f64,
    /// `‖T^*TT^* - T^*‖`.
    pub adjoint_identity: f64,
    /// `‖TT^*T - T‖`.
    pub identity: f64,
    /// `TT^*` is an orthogonal projection.
    pub final_projection: f64,
    /// `T^*T` is an orthogonal projection.
    pub initial_projection: f64,
}

impl PiResiduals {
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("isometric_on_initial_space", self.isometric_on_initial_space),
            (
                "adjoint_isometric_on_initial_space",
                self.adjoint_isometric_on_initial_space,
            ),
            ("adjoint_identity", self.adjoint_identity),
            ("identity", self.identity),
            ("final_projection", self.final_projection),
            ("initial_projection", self.initial_projection),
        ]
    }

    pub fn max(&self) -> f64 {
        self.named().iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialIsometryReport {
    pub is_pi: bool,
    pub residuals: PiResiduals,
    /// Per-criterion verdicts, in the order of [`PiResiduals::named`].
    pub verdicts: [bool; 6],
}

impl PartialIsometryReport {
    pub fn verdicts_agree(&self) -> bool {
        self.verdicts.iter().all(|&v| v == self.verdicts[0])
    }
}

/// Largest deviation of `A` from being isometric on the range of `A^*`.
fn isometric_on_initial(a: &Matrix, tol: Tol) -> Result<f64> {
    let init = orthonormal_range(&a.adjoint(), tol)?;
    if init.dim() == 0 {
        return Ok(0.0);
    }
    let av = a * init.basis();
    let g = av.adjoint() * av - identity(init.dim());
    Ok(residual_norm(&g, tol.residual_abs))
}

/// Deviation of `p` from being an orthogonal projection. Its range is that of
/// `T` (or `T^*`) identically, so idempotence and self-adjointness suffice.
fn projection_residual(p: &Matrix, tol: Tol) -> f64 {
    let idem = residual_norm(&(p * p - p), tol.residual_abs);
    let herm = residual_norm(&(p - p.adjoint()), tol.residual_abs);
    idem.max(herm)
}

/// Evaluates all six equivalent partial-isometry criteria.
///
/// # Errors
/// `NotSquare`, `NonFinite`.
pub fn is_partial_isometry(t: &Matrix, tol: Tol) -> Result<PartialIsometryReport> {
    check_square(t)?;
    check_finite(t)?;
    let ts = t.adjoint();
    let tts = t * &ts;
    let tst = &ts * t;
    let residuals = PiResiduals {
        isometric_on_initial_space: isometric_on_initial(t, tol)?,
        adjoint_isometric_on_initial_space: isometric_on_initial(&ts, tol)?,
        adjoint_identity: residual_norm(&(&tst * &ts - &ts), tol.residual_abs),
        identity: residual_norm(&(&tts * t - t), tol.residual_abs),
        final_projection: projection_residual(&tts, tol),
        initial_projection: projection_residual(&tst, tol),
    };
    let named = residuals.named();
    let verdicts = std::array::from_fn(|i| named[i].1 <= tol.residual_abs);
    Ok(PartialIsometryReport {
        is_pi: verdicts.iter().all(|&v| v),
        residuals,
        verdicts,
    })
}

/// `‖AA^*A - A‖`.
pub fn pi_residual(a: &Matrix, tol: Tol) -> f64 {
    residual_norm(&(a * a.adjoint() * a - a), tol.residual_abs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub is_ppi: bool,
    /// Smallest `n` for which `T^n` is not a partial isometry.
    pub first_fail: Option<usize>,
    /// `‖T^nT^{*n}T^n - T^n‖` for `n = 1, 2, ...` up to the first failure.
    pub residuals: Vec<f64>,
}

/// Checks `T^n` for `n = 1..=d+1`.
///
/// # Errors
/// `NotSquare`, `NonFinite`.
pub fn is_power_partial_isometry(t: &Matrix, tol: Tol) -> Result<PowerReport> {
    let d = check_square(t)?;
    check_finite(t)?;
    let mut p = identity(d);
    let mut residuals = Vec::new();
    for n in 1..=d + 1 {
        p = &p * t;
        let r = pi_residual(&p, tol);
        residuals.push(r);
        if r > tol.residual_abs {
            return Ok(PowerReport {
                is_ppi: false,
                first_fail: Some(n),
                residuals,
            });
        }
    }
    Ok(PowerReport {
        is_ppi: true,
        first_fail: None,
        residuals,
    })
}

/// Powers `T^0..=T^n`, each verified to be a partial isometry.
fn verified_powers(t: &Matrix, n: usize, tol: Tol) -> Result<Vec<Matrix>> {
    let d = check_square(t)?;
    check_finite(t)?;
    let mut powers = vec![identity(d)];
    for p in 1..=n {
        let next = &powers[p - 1] * t;
        let r = pi_residual(&next, tol);
        if r > tol.residual_abs {
            return Err(Error::NotPpi { power: p, residual: r });
        }
        powers.push(next);
    }
    Ok(powers)
}

/// `(E_n, F_n) = (T^{*n}T^n, T^nT^{*n})`.
///
/// # Errors
/// `NotPpi` if some power `≤ n` is not a partial isometry.
pub fn defect_projections(t: &Matrix, n: usize, tol: Tol) -> Result<(Matrix, Matrix)> {
    let powers = verified_powers(t, n, tol)?;
    let tn = &powers[n];
    Ok((tn.adjoint() * tn, tn * tn.adjoint()))
}

/// Maximal residuals of the `E_k`/`F_k` identities over `0 ≤ k, l ≤ max_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCalculusReport {
    /// `E_kE_l = E_lE_k` and `F_kF_l = F_lF_k`.
    pub commute_same: f64,
    /// `E_kF_l = F_lE_k`.
    pub commute_mixed: f64,
    /// `E_kF_l` and `E_kE_l` are orthogonal projections.
    pub products_are_projections: f64,
    /// `TE_{k+1} = E_kT`.
    pub shift_initial: f64,
    /// `TF_k = F_{k+1}T`.
    pub shift_final: f64,
}

impl ProjectionCalculusReport {
    pub fn max(&self) -> f64 {
        [
            self.commute_same,
            self.commute_mixed,
            self.products_are_projections,
            self.shift_initial,
            self.shift_final,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Evaluates the commutation and shift identities of the projections `E_k`, `F_k`.
///
/// # Errors
/// `NotPpi` if some power `≤ max_k + 1` is not a partial isometry.
pub fn projection_calculus_check(t: &Matrix, max_k: usize, tol: Tol) -> Result<ProjectionCalculusReport> {
    let powers = verified_powers(t, max_k + 1, tol)?;
    let e: Vec<Matrix> = powers.iter().map(|p| p.adjoint() * p).collect();
    let f: Vec<Matrix> = powers.iter().map(|p| p * p.adjoint()).collect();
    let b = tol.residual_abs;
    let proj = |p: &Matrix| residual_norm(&(p * p - p), b).max(residual_norm(&(p - p.adjoint()), b));
    let mut rep = ProjectionCalculusReport {
        commute_same: 0.0,
        commute_mixed: 0.0,
        products_are_projections: 0.0,
        shift_initial: 0.0,
        shift_final: 0.0,
    };
    for k in 0..=max_k {
        for l in 0..=max_k {
            let ee = &e[k] * &e[l];
            let ff = &f[k] * &f[l];
            let ef = &e[k] * &f[l];
            rep.commute_same = rep
                .commute_same
                .max(residual_norm(&(&ee - &e[l] * &e[k]), b))
                .max(residual_norm(&(&ff - &f[l] * &f[k]), b));
            rep.commute_mixed = rep
                .commute_mixed
                .max(residual_norm(&(&ef - &f[l] * &e[k]), b));
            rep.products_are_projections = rep.products_are_projections.max(proj(&ef)).max(proj(&ee));
        }
        rep.shift_initial = rep
            .shift_initial
            .max(residual_norm(&(t * &e[k + 1] - &e[k] * t), b));
        rep.shift_final = rep
            .shift_final
            .max(residual_norm(&(t * &f[k] - &f[k + 1] * t), b));
    }
    Ok(rep)
}

/// Image of `s` under a map whose restriction to `s` has singular values in `{0, 1}`.
fn pi_image(a: &Matrix, s: &Subspace) -> Result<Subspace> {
    if s.dim() == 0 {
        return Ok(Subspace::zero(a.nrows()));
    }
    range_above(&(a * s.basis()), PI_CUTOFF)
}

/// Powers of `T` and `T^*` with the kernels `N(T)`, `N(T^*)`.
struct PowerTable {
    fwd: Vec<Matrix>,
    bwd: Vec<Matrix>,
    ker: Subspace,
    ker_adj: Subspace,
}

impl PowerTable {
    fn new(t: &Matrix, n: usize, tol: Tol) -> Result<Self> {
        let fwd = verified_powers(t, n.max(1), tol)?;
        let bwd = fwd.iter().map(|p| p.adjoint()).collect();
        Ok(PowerTable {
            ker: kernel_below(t, PI_CUTOFF)?,
            ker_adj: kernel_below(&t.adjoint(), PI_CUTOFF)?,
            fwd,
            bwd,
        })
    }

    fn slot(&self, k: usize, n: usize, tol: Tol) -> Result<Subspace> {
        let a = pi_image(&self.fwd[n - 1], &self.ker_adj)?;
        let b = pi_image(&self.bwd[k - n], &self.ker)?;
        intersect(&a, &b, tol)
    }
}

/// `T^{n-1}(N(T^*)) ∩ T^{*(k-n)}(N(T))`, the `n`-th slot of the index-`k` part.
///
/// # Errors
/// `BadSpec` unless `1 ≤ n ≤ k`; `NotPpi` if a needed power fails.
pub fn slot_subspace(t: &Matrix, k: usize, n: usize, tol: Tol) -> Result<Subspace> {
    if n == 0 || n > k {
        return Err(Error::BadSpec(format!("slot needs 1 <= n <= k, got k={k}, n={n}")));
    }
    PowerTable::new(t, k, tol)?.slot(k, n, tol)
}

/// Gap between `R(F_{p-1} - F_p)` and `T^{p-1}(N(T^*))`.
///
/// # Errors
/// `BadSpec` for `p = 0`; `NotPpi` if a power `≤ p` fails.
pub fn burdak_identity_check(t: &Matrix, p: usize, tol: Tol) -> Result<f64> {
    if p == 0 {
        return Err(Error::BadSpec("p must be at least 1".into()));
    }
    let table = PowerTable::new(t, p, tol)?;
    let f = |n: usize| &table.fwd[n] * &table.bwd[n];
    let lhs = range_above(&(f(p - 1) - f(p)), PI_CUTOFF)?;
    let rhs = pi_image(&table.fwd[p - 1], &table.ker_adj)?;
    subspace_gap(&lhs, &rhs)
}

/// Halmos–Wallen decomposition of a power partial isometry on `C^d`.
///
/// The unilateral and backward shift parts are always zero in finite
/// dimension; they are reported explicitly as `shift_dim` and
/// `backward_shift_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub unitary_dim: usize,
    /// Index `k` to the multiplicity of `J_k`.
    pub multiplicities: BTreeMap<usize, usize>,
    /// Unitary `Q` with `Q^*TQ ≈ canonical`.
    pub conjugator: Matrix,
    /// `U ⊕ (⊕_k m_k copies of J_k)`, unitary block first, then increasing `k`.
    pub canonical: Matrix,
    pub residual: f64,
}

impl Decomposition {
    pub fn shift_dim(&self) -> usize {
        0
    }

    pub fn backward_shift_dim(&self) -> usize {
        0
    }

    pub fn to_json(&self, with_conjugator: bool) -> DecompositionJson {
        DecompositionJson {
            unitary_dim: self.unitary_dim,
            multiplicities: self
                .multiplicities
                .iter()
                .map(|(k, m)| (k.to_string(), *m))
                .collect(),
            residual: self.residual,
            shift_dim: 0,
            backward_shift_dim: 0,
            conjugator: with_conjugator.then(|| MatrixJson::from_matrix(&self.conjugator)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub unitary_dim: usize,
    pub multiplicities: BTreeMap<String, usize>,
    pub residual: f64,
    pub shift_dim: usize,
    pub backward_shift_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conjugator: Option<MatrixJson>,
}

/// Computes the canonical decomposition `Q^*TQ = U ⊕ ⊕ J_k`.
///
/// # Errors
/// `NotPpi` if `T` is not a power partial isometry; `ResidualExceeded` if the
/// assembled basis does not reproduce `T` within `tol.residual_abs`.
pub fn hw_decompose(t: &Matrix, tol: Tol) -> Result<Decomposition> {
    let d = check_square(t)?;
    let report = is_power_partial_isometry(t, tol)?;
    if let Some(power) = report.first_fail {
        return Err(Error::NotPpi {
            power,
            residual: *report.residuals.last().unwrap_or(&f64::NAN),
        });
    }
    let table = PowerTable::new(t, d, tol)?;

    // Ranges of T^n and T*^n form nonincreasing chains; once a dimension
    // repeats the chain is constant.
    let mut fwd = Subspace::full(d);
    let mut bwd = Subspace::full(d);
    for n in 1..=d {
        let f = range_above(&table.fwd[n], PI_CUTOFF)?;
        let b = range_above(&table.bwd[n], PI_CUTOFF)?;
        let stable = f.dim() == fwd.dim() && b.dim() == bwd.dim();
        fwd = f;
        bwd = b;
        if stable {
            break;
        }
    }
    let unitary_part = intersect(&fwd, &bwd, tol)?;

    let mut columns = vec![unitary_part.basis().clone()];
    let mut multiplicities = BTreeMap::new();
    let mut covered = unitary_part.dim();
    for k in 1..=d {
        if covered >= d {
            break;
        }
        let first = table.slot(k, 1, tol)?;
        let m = first.dim();
        if m == 0 {
            continue;
        }
        multiplicities.insert(k, m);
        let images: Vec<Matrix> = (1..=k).map(|n| &table.fwd[n - 1] * first.basis()).collect();
        for i in 0..m {
            for img in &images {
                columns.push(img.columns(i, 1).into_owned());
            }
        }
        covered += k * m;
    }
    if covered != d {
        return Err(Error::ResidualExceeded { residual: 1.0 });
    }
    let refs: Vec<&Matrix> = columns.iter().collect();
    let q = hstack(&refs);
    let qu = unitary_part.basis();
    let mut blocks = vec![qu.adjoint() * t * qu];
    for (&k, &m) in &multiplicities {
        for _ in 0..m {
            blocks.push(jk_matrix(1, k));
        }
    }
    let canonical = block_diag(&blocks);
    let unitarity = residual_norm(&(q.adjoint() * &q - identity(d)), tol.residual_abs);
    let conj = residual_norm(&(q.adjoint() * t * &q - &canonical), tol.residual_abs);
    let residual = unitarity.max(conj);
    if residual > tol.residual_abs {
        return Err(Error::ResidualExceeded { residual });
    }
    Ok(Decomposition {
        unitary_dim: unitary_part.dim(),
        multiplicities,
        conjugator: q,
        canonical,
        residual,
    })
}
