//! Dense complex linear algebra and subspace arithmetic.
//!
//! Matrices are `nalgebra` dense matrices over [`C64`]. A [`Subspace`] stores an
//! orthonormal basis of a subspace of `C^d`. Rank decisions count singular values
//! above `rank_rel * sigma_max`; a few callers that know the scale of their input
//! (projector stacks, partial isometries) use an absolute cutoff instead.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;
pub type Vector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Numerical tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tol {
    /// Singular values at or below `rank_rel * sigma_max` count as zero.
    pub rank_rel: f64,
    /// Absolute bound on operator-norm residuals.
    pub residual_abs: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol {
            rank_rel: 1e-10,
            residual_abs: 1e-8,
        }
    }
}

impl Tol {
    /// # Errors
    /// `BadTolerance` unless both values are positive and `rank_rel < 1`.
    pub fn new(rank_rel: f64, residual_abs: f64) -> Result<Self> {
        if !(rank_rel > 0.0 && rank_rel < 1.0) {
            return Err(Error::BadTolerance(format!(
                "rank_rel must lie in (0, 1), got {rank_rel}"
            )));
        }
        if !(residual_abs > 0.0 && residual_abs.is_finite()) {
            return Err(Error::BadTolerance(format!(
                "residual_abs must be positive, got {residual_abs}"
            )));
        }
        Ok(Tol {
            rank_rel,
            residual_abs,
        })
    }

    pub fn with_residual(self, residual_abs: f64) -> Self {
        Tol {
            residual_abs,
            ..self
        }
    }
}

pub fn check_finite(a: &Matrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn check_square(a: &Matrix) -> Result<usize> {
    if a.nrows() == a.ncols() {
        Ok(a.nrows())
    } else {
        Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        })
    }
}

pub fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, found })
    }
}

pub fn identity(d: usize) -> Matrix {
    Matrix::identity(d, d)
}

pub fn zeros(r: usize, c: usize) -> Matrix {
    Matrix::zeros(r, c)
}

/// Real matrix from row-major entries.
pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> Matrix {
    assert_eq!(rows * cols, entries.len());
    Matrix::from_row_iterator(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)))
}

pub fn matrix_power(a: &Matrix, n: usize) -> Matrix {
    let mut p = identity(a.nrows());
    for _ in 0..n {
        p = &p * a;
    }
    p
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Stacks matrices with equal column counts vertically.
pub fn vstack(blocks: &[&Matrix]) -> Matrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols);
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Stacks matrices with equal row counts horizontally.
pub fn hstack(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows);
        out.view_mut((0, c), b.shape()).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Singular values in descending order.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s = to_faer(a)
        .singular_values()
        .expect("svd converges on finite input");
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

// nalgebra's complex SVD can return a wrong factorization for
// rank-deficient inputs, so decompositions go through faer.
fn to_faer(a: &Matrix) -> faer::Mat<C64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, C64>) -> Matrix {
    Matrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Spectral norm; zero for empty matrices.
pub fn op_norm(a: &Matrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Operator norm of a residual matrix, short-circuited by the Frobenius norm.
///
/// When the Frobenius norm is already at most `bound` it is returned as is (it
/// dominates the operator norm), which saves an SVD on the common passing path.
pub fn residual_norm(a: &Matrix, bound: f64) -> f64 {
    let f = a.norm();
    if f <= bound {
        f
    } else {
        op_norm(a)
    }
}

/// Left singular vectors and singular values, descending.
fn thin_svd(a: &Matrix) -> (Matrix, Vec<f64>) {
    let svd = to_faer(a).thin_svd().expect("svd converges on finite input");
    let s = svd.S().column_vector();
    let s: Vec<f64> = (0..s.nrows()).map(|i| s[i].re).collect();
    (from_faer(svd.U()), s)
}

/// Full set of right singular vectors (`n x n`) with singular values padded by
/// zeros to length `n`, descending.
fn full_right_svd(a: &Matrix) -> (Matrix, Vec<f64>) {
    let n = a.ncols();
    let svd = to_faer(a).svd().expect("svd converges on finite input");
    let s = svd.S().column_vector();
    let mut vals: Vec<f64> = (0..s.nrows()).map(|i| s[i].re).collect();
    vals.resize(n, 0.0);
    (from_faer(svd.V()), vals)
}

fn range_with_cutoff(a: &Matrix, cutoff: impl Fn(f64) -> f64) -> Result<Subspace> {
    check_finite(a)?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Subspace::zero(m));
    }
    let (u, s) = thin_svd(a);
    let c = cutoff(s[0]);
    let r = s.iter().filter(|&&x| x > c).count();
    Ok(Subspace {
        ambient_dim: m,
        basis: u.columns(0, r).into_owned(),
    })
}

fn kernel_with_cutoff(a: &Matrix, cutoff: impl Fn(f64) -> f64) -> Result<Subspace> {
    check_finite(a)?;
    let (m, n) = a.shape();
    if n == 0 {
        return Ok(Subspace::zero(0));
    }
    if m == 0 {
        return Ok(Subspace::full(n));
    }
    let (v, s) = full_right_svd(a);
    let c = cutoff(s[0]);
    let r = s.iter().filter(|&&x| x > c).count();
    Ok(Subspace {
        ambient_dim: n,
        basis: v.columns(r, n - r).into_owned(),
    })
}

/// Orthonormal basis of the column space of `a`.
///
/// # Errors
/// `NonFinite` if `a` has NaN or infinite entries.
pub fn orthonormal_range(a: &Matrix, tol: Tol) -> Result<Subspace> {
    range_with_cutoff(a, |smax| tol.rank_rel * smax)
}

/// Orthonormal basis of the numerical nullspace of `a`, same cutoff rule as
/// [`orthonormal_range`].
///
/// # Errors
/// `NonFinite` if `a` has NaN or infinite entries.
pub fn kernel(a: &Matrix, tol: Tol) -> Result<Subspace> {
    kernel_with_cutoff(a, |smax| tol.rank_rel * smax)
}

/// Column space keeping singular values above an absolute `cutoff`.
pub fn range_above(a: &Matrix, cutoff: f64) -> Result<Subspace> {
    range_with_cutoff(a, |_| cutoff)
}

/// Nullspace treating singular values at or below an absolute `cutoff` as zero.
pub fn kernel_below(a: &Matrix, cutoff: f64) -> Result<Subspace> {
    kernel_with_cutoff(a, |_| cutoff)
}

/// Nullspace with the relative cutoff measured against `max(sigma_max, scale)`.
///
/// Used when the natural size of the matrix is known, so that an input made
/// only of rounding noise is not mistaken for a full-rank matrix.
pub fn kernel_scaled(a: &Matrix, tol: Tol, scale: f64) -> Result<Subspace> {
    kernel_with_cutoff(a, |smax| tol.rank_rel * smax.max(scale))
}

/// Column space with the relative cutoff measured against `max(sigma_max, scale)`.
pub fn range_scaled(a: &Matrix, tol: Tol, scale: f64) -> Result<Subspace> {
    range_with_cutoff(a, |smax| tol.rank_rel * smax.max(scale))
}

/// `S1 ∩ S2`, as the kernel of `[(I - P1); (I - P2)]`.
///
/// The stacked matrix is built from projectors, so its scale is one; the cutoff
/// is taken relative to `max(sigma_max, 1)`.
///
/// # Errors
/// `DimMismatch` for different ambient dimensions.
pub fn intersect(s1: &Subspace, s2: &Subspace, tol: Tol) -> Result<Subspace> {
    intersect_all(&[s1, s2], tol)
}

/// Intersection of several subspaces of the same ambient space.
pub fn intersect_all(list: &[&Subspace], tol: Tol) -> Result<Subspace> {
    let Some(first) = list.first() else {
        return Err(Error::BadSpec("empty intersection".into()));
    };
    let d = first.ambient_dim;
    for s in list {
        check_dim(d, s.ambient_dim)?;
    }
    if list.iter().any(|s| s.dim() == 0) {
        return Ok(Subspace::zero(d));
    }
    let comps: Vec<Matrix> = list
        .iter()
        .map(|s| identity(d) - s.projector())
        .collect();
    let refs: Vec<&Matrix> = comps.iter().collect();
    kernel_scaled(&vstack(&refs), tol, 1.0)
}

/// `‖P1 - P2‖`, the operator norm of the projector difference.
///
/// # Errors
/// `DimMismatch` for different ambient dimensions.
pub fn subspace_gap(s1: &Subspace, s2: &Subspace) -> Result<f64> {
    check_dim(s1.ambient_dim, s2.ambient_dim)?;
    Ok(op_norm(&(s1.projector() - s2.projector())))
}

/// Orthogonal projector `basis * basis^*`.
pub fn project(s: &Subspace) -> Matrix {
    s.projector()
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let h = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = to_faer(&h)
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("eigendecomposition converges on finite input");
    let s = eig.S().column_vector();
    let vals = (0..n).map(|i| s[i].re).collect();
    (vals, from_faer(eig.U()))
}

/// Square root of a positive semidefinite Hermitian matrix; negative rounding
/// noise in the spectrum is clamped to zero.
pub fn psd_sqrt(a: &Matrix) -> Matrix {
    let (vals, vecs) = hermitian_eigen(a);
    let mut scaled = vecs.clone();
    for (c, &l) in vals.iter().enumerate() {
        let r = C64::new(l.max(0.0).sqrt(), 0.0);
        for x in scaled.column_mut(c).iter_mut() {
            *x *= r;
        }
    }
    &scaled * vecs.adjoint()
}

/// Subspace of `C^d` with an orthonormal basis stored as the columns of a
/// `d x r` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: Matrix,
}

impl Subspace {
    pub fn zero(d: usize) -> Self {
        Subspace {
            ambient_dim: d,
            basis: zeros(d, 0),
        }
    }

    pub fn full(d: usize) -> Self {
        Subspace {
            ambient_dim: d,
            basis: identity(d),
        }
    }

    /// Span of the listed coordinate axes (0-based), in the given order.
    pub fn coordinate(d: usize, axes: &[usize]) -> Self {
        let mut basis = zeros(d, axes.len());
        for (c, &i) in axes.iter().enumerate() {
            basis[(i, c)] = ONE;
        }
        Subspace {
            ambient_dim: d,
            basis,
        }
    }

    /// Wraps a basis that is orthonormal to within `tol.residual_abs`.
    ///
    /// # Errors
    /// `NonFinite`, or `ResidualExceeded` if the columns are not orthonormal.
    pub fn from_orthonormal(basis: Matrix, tol: Tol) -> Result<Self> {
        check_finite(&basis)?;
        let r = basis.ncols();
        let res = residual_norm(&(basis.adjoint() * &basis - identity(r)), tol.residual_abs);
        if res > tol.residual_abs {
            return Err(Error::ResidualExceeded { residual: res });
        }
        Ok(Subspace {
            ambient_dim: basis.nrows(),
            basis,
        })
    }

    /// Span of the columns of `vectors`.
    pub fn span(vectors: &Matrix, tol: Tol) -> Result<Self> {
        orthonormal_range(vectors, tol)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn projector(&self) -> Matrix {
        &self.basis * self.basis.adjoint()
    }

    /// Orthogonal complement in the ambient space.
    pub fn complement(&self) -> Self {
        if self.dim() == 0 {
            return Subspace::full(self.ambient_dim);
        }
        // The rows of basis^* are orthonormal: singular values are exactly one.
        kernel_below(&self.basis.adjoint(), 0.5).expect("finite basis")
    }

    /// Closed span of `self` and `other`.
    pub fn join(&self, other: &Subspace, tol: Tol) -> Result<Self> {
        check_dim(self.ambient_dim, other.ambient_dim)?;
        range_scaled(&hstack(&[&self.basis, &other.basis]), tol, 1.0)
    }

    /// `a(S)`, the image under a linear map.
    pub fn image(&self, a: &Matrix, tol: Tol) -> Result<Self> {
        check_dim(a.ncols(), self.ambient_dim)?;
        if self.dim() == 0 {
            return Ok(Subspace::zero(a.nrows()));
        }
        orthonormal_range(&(a * &self.basis), tol)
    }

    /// Distance of `v` from the subspace.
    pub fn distance(&self, v: &Vector) -> f64 {
        let p = &self.basis * (self.basis.adjoint() * v);
        (v - p).norm()
    }

    /// Equality up to `tol.residual_abs`; different dimensions are never equal.
    pub fn approx_eq(&self, other: &Subspace, tol: Tol) -> Result<bool> {
        if self.dim() != other.dim() {
            check_dim(self.ambient_dim, other.ambient_dim)?;
            return Ok(false);
        }
        Ok(subspace_gap(self, other)? <= tol.residual_abs)
    }

    /// `S1 ⊕ S2 ⊕ ...` inside the direct sum of the ambient spaces.
    pub fn direct_sum(parts: &[Subspace]) -> Self {
        let bases: Vec<Matrix> = parts.iter().map(|s| s.basis.clone()).collect();
        let basis = block_diag(&bases);
        Subspace {
            ambient_dim: basis.nrows(),
            basis,
        }
    }

    /// Coordinates `offset..offset+len` of the subspace, re-orthonormalized.
    pub fn restrict_rows(&self, offset: usize, len: usize, tol: Tol) -> Result<Self> {
        let rows = self.basis.rows(offset, len).into_owned();
        range_scaled(&rows, tol, 1.0)
    }

    /// Embeds into a larger space at coordinate `offset`.
    pub fn embed(&self, ambient: usize, offset: usize) -> Self {
        let mut basis = zeros(ambient, self.dim());
        basis
            .view_mut((offset, 0), self.basis.shape())
            .copy_from(&self.basis);
        Subspace {
            ambient_dim: ambient,
            basis,
        }
    }
}

/// JSON carrier for a matrix: row-major real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(a: &Matrix) -> Self {
        let (rows, cols) = a.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                re.push(a[(i, j)].re);
                im.push(a[(i, j)].im);
            }
        }
        MatrixJson { rows, cols, re, im }
    }

    /// # Errors
    /// `Parse` on inconsistent lengths, `NonFinite` on NaN or infinite entries.
    pub fn to_matrix(&self) -> Result<Matrix> {
        let n = self.rows * self.cols;
        if self.re.len() != n {
            return Err(Error::Parse(format!(
                "expected {n} real parts, found {}",
                self.re.len()
            )));
        }
        if !self.im.is_empty() && self.im.len() != n {
            return Err(Error::Parse(format!(
                "expected {n} imaginary parts, found {}",
                self.im.len()
            )));
        }
        let a = Matrix::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            C64::new(self.re[k], self.im.get(k).copied().unwrap_or(0.0))
        });
        check_finite(&a)?;
        Ok(a)
    }
}

/// JSON carrier for a subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceJson {
    pub ambient_dim: usize,
    pub basis: MatrixJson,
}

impl SubspaceJson {
    pub fn from_subspace(s: &Subspace) -> Self {
        SubspaceJson {
            ambient_dim: s.ambient_dim,
            basis: MatrixJson::from_matrix(&s.basis),
        }
    }

    /// Re-orthonormalizes the stored basis, so any spanning set is accepted.
    ///
    /// # Errors
    /// `Parse`/`NonFinite` from the matrix, `DimMismatch` if the row count
    /// disagrees with `ambient_dim`.
    pub fn to_subspace(&self, tol: Tol) -> Result<Subspace> {
        let b = self.basis.to_matrix()?;
        check_dim(self.ambient_dim, b.nrows())?;
        if b.ncols() == 0 {
            return Ok(Subspace::zero(self.ambient_dim));
        }
        orthonormal_range(&b, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tol {
        Tol::default()
    }

    #[test]
    fn range_of_identity_is_full() {
        let s = orthonormal_range(&identity(2), tol()).unwrap();
        assert_eq!(s.dim(), 2);
    }

    #[test]
    fn range_of_zero_is_trivial() {
        let s = orthonormal_range(&zeros(3, 3), tol()).unwrap();
        assert_eq!(s.dim(), 0);
        assert_eq!(s.ambient_dim(), 3);
    }

    #[test]
    fn range_of_rank_one_ones() {
        let a = real_matrix(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = orthonormal_range(&a, tol()).unwrap();
        assert_eq!(s.dim(), 1);
        let expected = real_matrix(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!((s.projector() - expected).norm() < 1e-14);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel(&identity(2), tol()).unwrap().dim(), 0);
        let j2 = real_matrix(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let k = kernel(&j2, tol()).unwrap();
        assert!(k.approx_eq(&Subspace::coordinate(2, &[1]), tol()).unwrap());
        let a = real_matrix(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let k = kernel(&a, tol()).unwrap();
        let expected = real_matrix(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((k.projector() - expected).norm() < 1e-14);
    }

    #[test]
    fn kernel_of_wide_matrix_is_complete() {
        let a = real_matrix(1, 3, &[1.0, 0.0, 0.0]);
        let k = kernel(&a, tol()).unwrap();
        assert!(k.approx_eq(&Subspace::coordinate(3, &[1, 2]), tol()).unwrap());
    }

    #[test]
    fn intersection_examples() {
        let e1 = Subspace::coordinate(2, &[0]);
        let e2 = Subspace::coordinate(2, &[1]);
        assert_eq!(intersect(&e1, &e2, tol()).unwrap().dim(), 0);
        assert!(intersect(&e1, &e1, tol()).unwrap().approx_eq(&e1, tol()).unwrap());
        let a = Subspace::coordinate(3, &[0, 1]);
        let b = Subspace::coordinate(3, &[1, 2]);
        let c = intersect(&a, &b, tol()).unwrap();
        assert!(c.approx_eq(&Subspace::coordinate(3, &[1]), tol()).unwrap());
    }

    #[test]
    fn intersection_of_rotated_full_spaces_stays_full() {
        let h = 1.0 / 2f64.sqrt();
        let q = real_matrix(2, 2, &[h, h, h, -h]);
        let s = Subspace::from_orthonormal(q, tol()).unwrap();
        let full = Subspace::full(2);
        assert_eq!(intersect(&s, &full, tol()).unwrap().dim(), 2);
    }

    #[test]
    fn intersection_dimension_mismatch() {
        let err = intersect(&Subspace::full(2), &Subspace::full(3), tol()).unwrap_err();
        assert_eq!(err, Error::DimMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn gap_examples() {
        let e1 = Subspace::coordinate(2, &[0]);
        let e2 = Subspace::coordinate(2, &[1]);
        assert!(subspace_gap(&e1, &e1).unwrap() < 1e-15);
        assert!((subspace_gap(&e1, &e2).unwrap() - 1.0).abs() < 1e-14);
        let h = 1.0 / 2f64.sqrt();
        let d = Subspace::from_orthonormal(real_matrix(2, 1, &[h, h]), tol()).unwrap();
        // P1 - P2 = [[1/2, -1/2], [-1/2, -1/2]] has eigenvalues ±1/√2.
        assert!((subspace_gap(&e1, &d).unwrap() - h).abs() < 1e-14);
    }

    #[test]
    fn different_ranks_are_never_equal() {
        let a = Subspace::coordinate(3, &[0]);
        let b = Subspace::coordinate(3, &[0, 1]);
        assert!(!a.approx_eq(&b, Tol::default().with_residual(10.0)).unwrap());
    }

    #[test]
    fn projector_examples() {
        assert_eq!(project(&Subspace::full(3)), identity(3));
        assert_eq!(project(&Subspace::zero(3)), zeros(3, 3));
    }

    #[test]
    fn non_finite_rejected() {
        let mut a = identity(2);
        a[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert_eq!(orthonormal_range(&a, tol()).unwrap_err(), Error::NonFinite);
        assert_eq!(kernel(&a, tol()).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tol::new(0.0, 1e-8).is_err());
        assert!(Tol::new(1.0, 1e-8).is_err());
        assert!(Tol::new(1e-10, 0.0).is_err());
        assert!(Tol::new(1e-10, 1e-8).is_ok());
    }

    #[test]
    fn kron_matches_definition() {
        let a = real_matrix(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = real_matrix(1, 2, &[0.0, 1.0]);
        let k = kron(&a, &b);
        let expected = real_matrix(2, 4, &[0.0, 1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0]);
        assert_eq!(k, expected);
    }

    #[test]
    fn psd_sqrt_of_projection_is_itself() {
        let p = real_matrix(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!((psd_sqrt(&p) - &p).norm() < 1e-12);
    }

    #[test]
    fn matrix_json_round_trip() {
        let a = Matrix::from_fn(2, 3, |i, j| C64::new(i as f64, j as f64 - 1.0));
        let j = MatrixJson::from_matrix(&a);
        assert_eq!(j.re, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(j.im, vec![-1.0, 0.0, 1.0, -1.0, 0.0, 1.0]);
        assert_eq!(j.to_matrix().unwrap(), a);
    }

    #[test]
    fn matrix_json_rejects_bad_lengths() {
        let j = MatrixJson {
            rows: 2,
            cols: 2,
            re: vec![1.0; 3],
            im: vec![],
        };
        assert!(matches!(j.to_matrix(), Err(Error::Parse(_))));
    }
}
