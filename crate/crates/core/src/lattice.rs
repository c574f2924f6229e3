//! Commutants, intertwiners, invariance predicates, and the lattice of
//! hyperinvariant subspaces of finite direct sums of truncated shifts.
//!
//! A direct sum `⊕_k J_k` is described by its parts `(k, m_k)`: the block for
//! index `k` is `J_k` acting on `C^{m_k} ⊗ C^k`, blocks ordered as listed and
//! each block in the degree-major basis of [`crate::hardy`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardy::jk_matrix;
use crate::numkit::{
    block_diag, check_dim, check_square, hstack, identity, kernel_scaled, kron, op_norm,
    orthonormal_range, range_scaled, residual_norm, subspace_gap, Matrix, Subspace, Tol, Vector,
    ONE,
};

/// Basis of `{S : S T1 = T2 S}`, orthonormal in the Frobenius inner product.
///
/// Solved as the nullspace of `T1^T ⊗ I - I ⊗ T2` acting on column-major
/// `vec(S)`; elements are `T2.nrows() x T1.nrows()` matrices.
///
/// # Errors
/// `NotSquare` if either operator is not square.
pub fn intertwiner_basis(t1: &Matrix, t2: &Matrix, tol: Tol) -> Result<Vec<Matrix>> {
    let d1 = check_square(t1)?;
    let d2 = check_square(t2)?;
    if d1 == 0 || d2 == 0 {
        return Ok(Vec::new());
    }
    let l = kron(&t1.transpose(), &identity(d2)) - kron(&identity(d1), t2);
    let scale = op_norm(t1).max(op_norm(t2));
    let ker = kernel_scaled(&l, tol, scale)?;
    Ok(ker
        .basis()
        .column_iter()
        .map(|v| Matrix::from_column_slice(d2, d1, v.as_slice()))
        .collect())
}

/// Basis of the commutant `{T}'`.
///
/// # Errors
/// `NotSquare`.
pub fn commutant_basis(t: &Matrix, tol: Tol) -> Result<Vec<Matrix>> {
    intertwiner_basis(t, t, tol)
}

/// Basis of the commutant of a block-diagonal operator, assembled from the
/// intertwiner spaces between its diagonal blocks.
///
/// # Errors
/// `NotSquare` if a block is not square.
pub fn commutant_basis_blocks(blocks: &[Matrix], tol: Tol) -> Result<Vec<Matrix>> {
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut d = 0;
    for b in blocks {
        offsets.push(d);
        d += check_square(b)?;
    }
    let mut out = Vec::new();
    for (r, tr) in blocks.iter().enumerate() {
        for (c, tc) in blocks.iter().enumerate() {
            for s in intertwiner_basis(tc, tr, tol)? {
                let mut big = Matrix::zeros(d, d);
                big.view_mut((offsets[r], offsets[c]), s.shape()).copy_from(&s);
                out.push(big);
            }
        }
    }
    Ok(out)
}

/// Basis of the joint commutant of several operators on the same space.
///
/// # Errors
/// `NotSquare`, `DimMismatch`.
pub fn joint_commutant_basis(ops: &[Matrix], tol: Tol) -> Result<Vec<Matrix>> {
    let Some(first) = ops.first() else {
        return Err(Error::BadSpec("no operators given".into()));
    };
    let d = check_square(first)?;
    let mut rows = Vec::with_capacity(ops.len());
    let mut scale: f64 = 0.0;
    for t in ops {
        check_dim(d, check_square(t)?)?;
        rows.push(kron(&t.transpose(), &identity(d)) - kron(&identity(d), t));
        scale = scale.max(op_norm(t));
    }
    let refs: Vec<&Matrix> = rows.iter().collect();
    let ker = kernel_scaled(&crate::numkit::vstack(&refs), tol, scale)?;
    Ok(ker
        .basis()
        .column_iter()
        .map(|v| Matrix::from_column_slice(d, d, v.as_slice()))
        .collect())
}

/// Distance of an intertwiner between truncated-shift blocks from the padded
/// lower-triangular block-Toeplitz pattern.
///
/// `s` maps `C^{e_src} ⊗ C^{k_src}` into `C^{e_dst} ⊗ C^{k_dst}`. Block
/// `(r, c)` must vanish when `r - c < max(0, k_dst - k_src)` and otherwise
/// depend only on `r - c`. Returns the Frobenius norm of the deviation.
pub fn toeplitz_pattern_residual(
    s: &Matrix,
    (k_dst, e_dst): (usize, usize),
    (k_src, e_src): (usize, usize),
) -> f64 {
    assert_eq!(s.shape(), (k_dst * e_dst, k_src * e_src));
    let pad = k_dst.saturating_sub(k_src) as i64;
    let block = |r: usize, c: usize| s.view((r * e_dst, c * e_src), (e_dst, e_src)).into_owned();
    let mut dev = 0.0;
    for diag in -(k_src as i64 - 1)..=(k_dst as i64 - 1) {
        let cells: Vec<(usize, usize)> = (0..k_dst)
            .filter_map(|r| {
                let c = r as i64 - diag;
                (c >= 0 && (c as usize) < k_src).then_some((r, c as usize))
            })
            .collect();
        if diag < pad {
            dev += cells.iter().map(|&(r, c)| block(r, c).norm_squared()).sum::<f64>();
        } else {
            let mut mean = Matrix::zeros(e_dst, e_src);
            for &(r, c) in &cells {
                mean += block(r, c);
            }
            mean /= crate::numkit::C64::new(cells.len() as f64, 0.0);
            dev += cells
                .iter()
                .map(|&(r, c)| (block(r, c) - &mean).norm_squared())
                .sum::<f64>();
        }
    }
    dev.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub invariant: bool,
    /// `‖(I - P_M) T P_M‖`.
    pub residual: f64,
}

fn invariance_residual(m: &Subspace, t: &Matrix, bound: f64) -> f64 {
    if m.dim() == 0 {
        return 0.0;
    }
    let b = m.basis();
    let tb = t * b;
    let inside = b * (b.adjoint() * &tb);
    residual_norm(&(tb - inside), bound)
}

/// # Errors
/// `NotSquare`, `DimMismatch`.
pub fn is_invariant(m: &Subspace, t: &Matrix, tol: Tol) -> Result<InvarianceReport> {
    check_dim(check_square(t)?, m.ambient_dim())?;
    let residual = invariance_residual(m, t, tol.residual_abs);
    Ok(InvarianceReport {
        invariant: residual <= tol.residual_abs,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducingReport {
    pub reducing: bool,
    pub residual: f64,
    pub adjoint_residual: f64,
}

/// Invariance under both `T` and `T^*`.
///
/// # Errors
/// `NotSquare`, `DimMismatch`.
pub fn is_reducing(m: &Subspace, t: &Matrix, tol: Tol) -> Result<ReducingReport> {
    let fwd = is_invariant(m, t, tol)?;
    let bwd = is_invariant(m, &t.adjoint(), tol)?;
    Ok(ReducingReport {
        reducing: fwd.invariant && bwd.invariant,
        residual: fwd.residual,
        adjoint_residual: bwd.residual,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperinvarianceReport {
    pub hyperinvariant: bool,
    pub worst_residual: f64,
    /// Commutant basis element attaining `worst_residual`.
    pub witness: Option<Matrix>,
    pub witness_index: Option<usize>,
    pub basis_size: usize,
}

/// Invariance of `M` under every element of a given commutant basis.
///
/// # Errors
/// `DimMismatch` if a basis element does not act on the ambient space of `M`.
pub fn is_hyperinvariant_with(
    m: &Subspace,
    basis: &[Matrix],
    tol: Tol,
) -> Result<HyperinvarianceReport> {
    let mut worst = 0.0;
    let mut idx = None;
    for (i, s) in basis.iter().enumerate() {
        check_dim(m.ambient_dim(), s.ncols())?;
        let r = invariance_residual(m, s, tol.residual_abs);
        if idx.is_none() || r > worst {
            worst = r;
            idx = Some(i);
        }
    }
    Ok(HyperinvarianceReport {
        hyperinvariant: worst <= tol.residual_abs,
        worst_residual: worst,
        witness: idx.map(|i| basis[i].clone()),
        witness_index: idx,
        basis_size: basis.len(),
    })
}

/// Invariance under every element of the commutant of `T`.
///
/// # Errors
/// `NotSquare`, `DimMismatch`.
pub fn is_hyperinvariant(m: &Subspace, t: &Matrix, tol: Tol) -> Result<HyperinvarianceReport> {
    check_dim(check_square(t)?, m.ambient_dim())?;
    let basis = commutant_basis(t, tol)?;
    is_hyperinvariant_with(m, &basis, tol)
}

/// Smallest subspace containing `x` and invariant under every element of `basis`.
pub fn cyclic_closure(x: &Vector, basis: &[Matrix], tol: Tol) -> Result<Subspace> {
    let d = x.len();
    let mut span = orthonormal_range(&Matrix::from_column_slice(d, 1, x.as_slice()), tol)?;
    for _ in 0..=d {
        if span.dim() == 0 || span.dim() == d {
            break;
        }
        let mut cols = vec![span.basis().clone()];
        for s in basis {
            check_dim(d, s.ncols())?;
            cols.push(s * span.basis());
        }
        let refs: Vec<&Matrix> = cols.iter().collect();
        let next = range_scaled(&hstack(&refs), tol, 1.0)?;
        let grew = next.dim() > span.dim();
        span = next;
        if !grew {
            break;
        }
    }
    Ok(span)
}

/// Smallest hyperinvariant subspace of `T` containing `x`.
///
/// # Errors
/// `NotSquare`, `DimMismatch`.
pub fn cyclic_hyperinvariant(x: &Vector, t: &Matrix, tol: Tol) -> Result<Subspace> {
    check_dim(check_square(t)?, x.len())?;
    cyclic_closure(x, &commutant_basis(t, tol)?, tol)
}

/// `S ⊗ C^k` inside `E ⊗ C^k`, degree-major.
pub fn product_subspace(s: &Subspace, k: usize) -> Subspace {
    Subspace::direct_sum(&vec![s.clone(); k])
}

/// Recovers `S` with `M = S ⊗ C^k` for a reducing subspace `M` of `J_k`.
///
/// # Errors
/// `DimMismatch`; `NotReducing`; `NotProductForm` if `M` is not `S ⊗ C^k`
/// within `tol.residual_abs`.
pub fn reducing_factor_jk(m: &Subspace, coeff_dim: usize, k: usize, tol: Tol) -> Result<Subspace> {
    let jk = jk_matrix(coeff_dim, k);
    check_dim(jk.nrows(), m.ambient_dim())?;
    let red = is_reducing(m, &jk, tol)?;
    if !red.reducing {
        return Err(Error::NotReducing {
            residual: red.residual.max(red.adjoint_residual),
        });
    }
    let s = m.restrict_rows(0, coeff_dim, tol)?;
    let prod = product_subspace(&s, k);
    let gap = if prod.dim() == m.dim() {
        subspace_gap(&prod, m)?
    } else {
        1.0
    };
    if gap > tol.residual_abs {
        return Err(Error::NotProductForm { gap });
    }
    Ok(s)
}

/// Kernel orders `n_k` for each part `(k, m_k)` of `⊕_k J_k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chain {
    pub parts: Vec<(usize, usize)>,
    pub values: Vec<usize>,
}

/// Label attached to reports: admissibility and divisibility are only imposed
/// at indices that carry a nonzero multiplicity.
pub const FINITE_SUPPORT_CONVENTION: &str = "finite-support convention";

/// # Errors
/// `BadSpec` unless indices are positive and strictly increasing.
pub fn validate_parts(parts: &[(usize, usize)]) -> Result<()> {
    for (i, &(k, _)) in parts.iter().enumerate() {
        if k == 0 {
            return Err(Error::BadSpec("part index k must be at least 1".into()));
        }
        if i > 0 && parts[i - 1].0 >= k {
            return Err(Error::BadSpec("part indices must be strictly increasing".into()));
        }
    }
    Ok(())
}

impl Chain {
    /// # Errors
    /// `BadSpec` for malformed parts, a length mismatch, or some `n_k > k`.
    pub fn new(parts: Vec<(usize, usize)>, values: Vec<usize>) -> Result<Self> {
        validate_parts(&parts)?;
        if parts.len() != values.len() {
            return Err(Error::BadSpec(format!(
                "{} parts but {} values",
                parts.len(),
                values.len()
            )));
        }
        for (&(k, _), &n) in parts.iter().zip(&values) {
            if n > k {
                return Err(Error::BadSpec(format!("value {n} exceeds index {k}")));
            }
        }
        Ok(Chain { parts, values })
    }

    /// Dimension of `⊕_k C^{m_k} ⊗ C^k`.
    pub fn ambient_dim(&self) -> usize {
        self.parts.iter().map(|&(k, m)| k * m).sum()
    }

    /// Dimension of `⊕_k N(J_k^{n_k})`.
    pub fn dim(&self) -> usize {
        self.parts.iter().zip(&self.values).map(|(&(_, m), &n)| m * n).sum()
    }

    /// First pair of present parts `(i, j)`, as positions with `i < j`, that
    /// violates `n_i ≤ n_j` or `n_j - n_i ≤ k_j - k_i`.
    pub fn violation(&self) -> Option<(usize, usize)> {
        let present: Vec<usize> = (0..self.parts.len()).filter(|&p| self.parts[p].1 > 0).collect();
        for (a, &i) in present.iter().enumerate() {
            for &j in &present[a + 1..] {
                let (ki, kj) = (self.parts[i].0, self.parts[j].0);
                let (ni, nj) = (self.values[i], self.values[j]);
                if ni > nj || nj - ni > kj - ki {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn is_admissible(&self) -> bool {
        self.violation().is_none()
    }

    /// # Errors
    /// `ChainInadmissible` naming the first violating pair of indices.
    pub fn check_admissible(&self) -> Result<()> {
        match self.violation() {
            None => Ok(()),
            Some((i, j)) => Err(Error::ChainInadmissible {
                i: self.parts[i].0,
                j: self.parts[j].0,
                n_i: self.values[i],
                n_j: self.values[j],
            }),
        }
    }

    /// Offsets of each block inside the direct sum.
    pub fn offsets(&self) -> Vec<usize> {
        part_offsets(&self.parts)
    }
}

pub fn part_offsets(parts: &[(usize, usize)]) -> Vec<usize> {
    let mut off = 0;
    parts
        .iter()
        .map(|&(k, m)| {
            let o = off;
            off += k * m;
            o
        })
        .collect()
}

/// `⊕_k J_k` with `J_k` acting on `C^{m_k} ⊗ C^k`.
pub fn shift_sum(parts: &[(usize, usize)]) -> Matrix {
    let blocks: Vec<Matrix> = parts.iter().map(|&(k, m)| jk_matrix(m, k)).collect();
    block_diag(&blocks)
}

/// The diagonal blocks of [`shift_sum`].
pub fn shift_blocks(parts: &[(usize, usize)]) -> Vec<Matrix> {
    parts.iter().map(|&(k, m)| jk_matrix(m, k)).collect()
}

/// All admissible chains over the parts with nonzero multiplicity, in
/// lexicographic order of values.
///
/// # Errors
/// `BadSpec` for malformed parts.
pub fn enumerate_admissible_chains(parts: &[(usize, usize)]) -> Result<Vec<Chain>> {
    Ok(enumerate_assignments(parts)?
        .into_iter()
        .filter(Chain::is_admissible)
        .collect())
}

/// Every assignment `0 ≤ n_k ≤ k` over the parts with nonzero multiplicity.
///
/// # Errors
/// `BadSpec` for malformed parts.
pub fn enumerate_assignments(parts: &[(usize, usize)]) -> Result<Vec<Chain>> {
    validate_parts(parts)?;
    let present: Vec<(usize, usize)> = parts.iter().copied().filter(|&(_, m)| m > 0).collect();
    let mut out = vec![Vec::new()];
    for &(k, _) in &present {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<usize>| {
                (0..=k).map(move |n| {
                    let mut v = prefix.clone();
                    v.push(n);
                    v
                })
            })
            .collect();
    }
    Ok(out
        .into_iter()
        .map(|values| Chain {
            parts: present.clone(),
            values,
        })
        .collect())
}

/// `⊕_k N(J_k^{n_k})`: in each block the top `n_k` degree slots.
pub fn chain_subspace(chain: &Chain) -> Subspace {
    let offsets = chain.offsets();
    let mut axes = Vec::new();
    for ((&(k, m), &n), &off) in chain.parts.iter().zip(&chain.values).zip(&offsets) {
        axes.extend(off + (k - n) * m..off + k * m);
    }
    Subspace::coordinate(chain.ambient_dim(), &axes)
}

/// Intertwiner of `⊕J_k` moving the first coordinate of one block into
/// another so that it leaves the chain subspace; `None` for admissible chains.
///
/// For a violation `n_i > n_j` (with `k_i < k_j`) the map is multiplication by
/// `z^{k_j - k_i}` from block `i` to block `j`; for `n_j - n_i > k_j - k_i` it
/// is truncation from block `j` to block `i`.
pub fn chain_violation_witness(chain: &Chain) -> Option<Matrix> {
    let (i, j) = chain.violation()?;
    let (ki, mi) = chain.parts[i];
    let (kj, mj) = chain.parts[j];
    let offsets = chain.offsets();
    let d = chain.ambient_dim();
    let mut s = Matrix::zeros(d, d);
    if chain.values[i] > chain.values[j] {
        for deg in 0..ki {
            s[(offsets[j] + (deg + kj - ki) * mj, offsets[i] + deg * mi)] = ONE;
        }
    } else {
        for deg in 0..ki {
            s[(offsets[i] + deg * mi, offsets[j] + deg * mj)] = ONE;
        }
    }
    Some(s)
}
