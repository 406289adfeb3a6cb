//! Subspace algebra on finite-horizon behaviors.
//!
//! Subspaces are carried as orthonormal bases ([`BehaviorBasis`]) or orthogonal
//! projectors ([`Projector`]). Bases are never compared entry-wise; equality and
//! inclusion go through principal angles and projection residuals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dense::{symmetric_eigen, thin_svd};
use crate::error::{Error, Result};

/// Default angle tolerance for subspace equality.
pub const ANGLE_TOL: f64 = 1e-8;

/// Relative tolerance for numerical rank decisions.
///
/// A singular value counts toward the rank when it exceeds
/// `rel * sigma_max * max(rows, cols)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTolerance {
    pub rel: f64,
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self { rel: 1e-10 }
    }
}

impl RankTolerance {
    pub fn new(rel: f64) -> Self {
        Self { rel }
    }

    pub fn threshold(&self, sigma_max: f64, rows: usize, cols: usize) -> f64 {
        self.rel * sigma_max * rows.max(cols) as f64
    }

    /// Rank implied by a list of singular values of a `rows x cols` matrix.
    pub fn rank_from(&self, sv: &[f64], rows: usize, cols: usize) -> usize {
        let smax = sv.iter().copied().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        let thr = self.threshold(smax, rows, cols);
        sv.iter().filter(|&&s| s > thr).count()
    }

    pub fn rank(&self, m: &DMatrix<f64>) -> usize {
        self.rank_from(&singular_values(m), m.nrows(), m.ncols())
    }
}

/// Singular values in nonincreasing order (empty for empty matrices).
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    crate::dense::singular_values(m)
}

/// Rows of `m` picked by index, in the given order.
pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// An orthonormal basis of a subspace of `R^ambient_dim`.
///
/// Zero-dimensional subspaces are represented by an `ambient_dim x 0` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorBasis {
    basis: DMatrix<f64>,
    tol: RankTolerance,
}

impl BehaviorBasis {
    /// Wraps a matrix that is already known to have orthonormal columns.
    pub fn from_orthonormal(basis: DMatrix<f64>, tol: RankTolerance) -> Self {
        Self { basis, tol }
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Self::from_orthonormal(DMatrix::zeros(ambient_dim, 0), RankTolerance::default())
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self::from_orthonormal(DMatrix::identity(ambient_dim, ambient_dim), RankTolerance::default())
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Dimension `r` of the subspace.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.basis
    }

    pub fn tol(&self) -> RankTolerance {
        self.tol
    }

    /// Basis of the image of `rows(Q)`, i.e. the coordinate projection onto `rows`.
    pub fn select_rows(&self, rows: &[usize]) -> BehaviorBasis {
        orthonormal_basis_scaled(&select_rows(&self.basis, rows), self.tol, 1.0)
    }

    /// Orthogonal projector onto this subspace.
    pub fn projector(&self) -> Projector {
        projector_onto(self)
    }

    /// Distance of `v` from the subspace.
    pub fn residual_of(&self, v: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(v);
        let coeffs = self.basis.transpose() * &v;
        (v - &self.basis * coeffs).norm()
    }
}

/// Orthonormal basis of `Image m`, with dimension equal to the numerical rank of `m`.
pub fn orthonormal_basis(m: &DMatrix<f64>, tol: RankTolerance) -> BehaviorBasis {
    orthonormal_basis_scaled(m, tol, 0.0)
}

/// Like [`orthonormal_basis`], but the rank threshold is taken relative to
/// `max(sigma_max(m), scale)`.
///
/// Use this when `m` is a product whose factors set the magnitude, e.g. a data
/// matrix times an annihilator: a product that should vanish is then reported as
/// `{0}` instead of having its round-off normalized into a basis.
pub fn orthonormal_basis_scaled(m: &DMatrix<f64>, tol: RankTolerance, scale: f64) -> BehaviorBasis {
    let ambient = m.nrows();
    if m.is_empty() {
        return BehaviorBasis::from_orthonormal(DMatrix::zeros(ambient, 0), tol);
    }
    let svd = thin_svd(m);
    let smax = svd.s.iter().copied().fold(scale, f64::max);
    let thr = tol.threshold(smax, m.nrows(), m.ncols());
    let rank = if smax == 0.0 { 0 } else { svd.s.iter().filter(|&&s| s > thr).count() };
    let basis = svd.u.columns(0, rank).into_owned();
    BehaviorBasis::from_orthonormal(basis, tol)
}

/// Orthonormal basis of the left singular vectors of `m` whose singular values
/// exceed the absolute `threshold`.
pub fn orthonormal_basis_above(m: &DMatrix<f64>, threshold: f64, tol: RankTolerance) -> BehaviorBasis {
    if m.is_empty() {
        return BehaviorBasis::from_orthonormal(DMatrix::zeros(m.nrows(), 0), tol);
    }
    let svd = thin_svd(m);
    let rank = svd.s.iter().filter(|&&s| s > threshold).count();
    BehaviorBasis::from_orthonormal(svd.u.columns(0, rank).into_owned(), tol)
}

/// Moore-Penrose pseudoinverse through a truncated SVD.
pub fn pinv(m: &DMatrix<f64>, tol: RankTolerance) -> DMatrix<f64> {
    if m.is_empty() {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = thin_svd(m);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let thr = tol.threshold(smax, m.nrows(), m.ncols());
    let rank = svd.s.iter().filter(|&&s| s > thr).count();
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for j in 0..rank {
        out += (svd.v.column(j) / svd.s[j]) * svd.u.column(j).transpose();
    }
    out
}

/// Pseudoinverse of a symmetric matrix through its eigendecomposition; the
/// result is exactly symmetric.
pub fn symmetric_pinv(s: &DMatrix<f64>, tol: RankTolerance) -> DMatrix<f64> {
    let n = s.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let (values, vectors) = symmetric_eigen(s);
    let lmax = values.iter().fold(0.0, |acc: f64, l| acc.max(l.abs()));
    if lmax == 0.0 {
        return DMatrix::zeros(n, n);
    }
    let thr = tol.threshold(lmax, n, n);
    let mut out = DMatrix::zeros(n, n);
    for (j, &l) in values.iter().enumerate() {
        if l.abs() > thr {
            let v = vectors.column(j);
            out += (v * v.transpose()) / l;
        }
    }
    symmetrize(&out)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Orthogonal complement of a subspace inside its ambient space.
pub fn orthogonal_complement(b: &BehaviorBasis) -> BehaviorBasis {
    let n = b.ambient_dim();
    if b.is_zero() {
        return BehaviorBasis::full(n);
    }
    if b.dim() == n {
        return BehaviorBasis::zero(n);
    }
    let q = b.matrix();
    let residual_projector = DMatrix::identity(n, n) - q * q.transpose();
    image_of_symmetric(&residual_projector, b.tol())
}

/// Basis of `ker m` as a subspace of `R^{ncols}`.
pub fn kernel(m: &DMatrix<f64>, tol: RankTolerance) -> BehaviorBasis {
    let row_space = orthonormal_basis(&m.transpose(), tol);
    orthogonal_complement(&row_space)
}

fn image_of_symmetric(p: &DMatrix<f64>, tol: RankTolerance) -> BehaviorBasis {
    let n = p.nrows();
    let (values, vectors) = symmetric_eigen(p);
    // Largest eigenvalues first, matching the SVD-based bases.
    let cols: Vec<_> = values
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, &l)| l > 0.5)
        .map(|(j, _)| vectors.column(j).into_owned())
        .collect();
    if cols.is_empty() {
        BehaviorBasis::from_orthonormal(DMatrix::zeros(n, 0), tol)
    } else {
        BehaviorBasis::from_orthonormal(DMatrix::from_columns(&cols), tol)
    }
}

/// Orthogonal projector, stored as a dense symmetric idempotent matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    p: DMatrix<f64>,
}

impl Projector {
    /// Accepts `p` if it passes the symmetry and idempotence checks.
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        let proj = Self { p };
        proj.check()?;
        Ok(proj)
    }

    pub(crate) fn new_unchecked(p: DMatrix<f64>) -> Self {
        Self { p }
    }

    pub fn zero(n: usize) -> Self {
        Self::new_unchecked(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self::new_unchecked(DMatrix::identity(n, n))
    }

    pub fn ambient_dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.p
    }

    /// Rank of a projector, read off its trace.
    pub fn rank(&self) -> usize {
        self.p.trace().round().max(0.0) as usize
    }

    /// `||P - P^T||_F`.
    pub fn symmetry_defect(&self) -> f64 {
        (&self.p - self.p.transpose()).norm()
    }

    /// `||P^2 - P||_F`.
    pub fn idempotence_defect(&self) -> f64 {
        (&self.p * &self.p - &self.p).norm()
    }

    pub fn check(&self) -> Result<()> {
        let scale = 1.0 + self.p.norm();
        let sym = self.symmetry_defect();
        if sym > 1e-10 * scale {
            return Err(Error::NumericalDegeneracy(format!("projector asymmetry {sym:.3e}")));
        }
        let idem = self.idempotence_defect();
        if idem > 1e-8 * scale {
            return Err(Error::NumericalDegeneracy(format!("projector not idempotent ({idem:.3e})")));
        }
        Ok(())
    }

    /// Orthonormal basis of the image.
    pub fn image(&self) -> BehaviorBasis {
        image_of_symmetric(&self.p, RankTolerance::default())
    }

    /// Conjugates by a coordinate permutation: `out[perm[i], perm[j]] = P[i, j]`.
    pub fn permuted(&self, perm: &[usize]) -> Projector {
        let n = self.ambient_dim();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(perm[i], perm[j])] = self.p[(i, j)];
            }
        }
        Projector::new_unchecked(out)
    }
}

/// `P = Q Q^T` for the orthonormal basis `Q`.
pub fn projector_onto(b: &BehaviorBasis) -> Projector {
    let q = b.matrix();
    Projector::new_unchecked(symmetrize(&(q * q.transpose())))
}

/// Orthogonal projector on `V ∩ W` from the projectors on `V` and `W`:
/// `2 P_V (P_V + P_W)^† P_W`, re-symmetrized and checked.
pub fn intersect(pv: &Projector, pw: &Projector) -> Result<Projector> {
    intersect_with(pv, pw, RankTolerance::default())
}

pub fn intersect_with(pv: &Projector, pw: &Projector, tol: RankTolerance) -> Result<Projector> {
    let n = pv.ambient_dim();
    if pw.ambient_dim() != n {
        return Err(Error::Dimension(format!(
            "cannot intersect subspaces of R^{n} and R^{}",
            pw.ambient_dim()
        )));
    }
    let sum_pinv = symmetric_pinv(&(pv.matrix() + pw.matrix()), tol);
    let raw = pv.matrix() * sum_pinv * pw.matrix() * 2.0;
    Projector::new(symmetrize(&raw))
}

/// Result of an inclusion test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub included: bool,
    /// `||(I - P_sup) Q_sub||_F`.
    pub residual: f64,
}

/// Tests `Image sub ⊆ Image sup` through the residual of projecting `sub` onto `sup`.
pub fn is_subspace_of(sub: &BehaviorBasis, sup: &BehaviorBasis, tol: f64) -> Result<Inclusion> {
    if sub.ambient_dim() != sup.ambient_dim() {
        return Err(Error::Dimension(format!(
            "subspaces live in R^{} and R^{}",
            sub.ambient_dim(),
            sup.ambient_dim()
        )));
    }
    let qs = sub.matrix();
    let qp = sup.matrix();
    let residual = (qs - qp * (qp.transpose() * qs)).norm();
    Ok(Inclusion {
        included: residual <= tol * (1.0 + qs.norm()),
        residual,
    })
}

/// Principal angles between two subspaces, largest first.
///
/// Returns `min(dim a, dim b)` angles in `[0, π/2]`. Small angles are recovered
/// from sines so that they stay accurate well below `1e-8`.
pub fn principal_angles(a: &BehaviorBasis, b: &BehaviorBasis) -> Result<Vec<f64>> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::Dimension(format!(
            "subspaces live in R^{} and R^{}",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    let (big, small) = if a.dim() >= b.dim() { (a, b) } else { (b, a) };
    if small.is_zero() {
        return Ok(Vec::new());
    }
    let qa = big.matrix();
    let qb = small.matrix();
    let cross = qa.transpose() * qb;
    let cosines = singular_values(&cross);
    let mut sines = singular_values(&(qb - qa * &cross));
    sines.reverse();
    let mut angles: Vec<f64> = cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            if c * c >= 0.5 {
                s.clamp(-1.0, 1.0).asin()
            } else {
                c.clamp(-1.0, 1.0).acos()
            }
        })
        .collect();
    angles.sort_by(|x, y| y.total_cmp(x));
    Ok(angles)
}

/// Largest principal angle (0 when either subspace is trivial).
pub fn max_angle(a: &BehaviorBasis, b: &BehaviorBasis) -> Result<f64> {
    Ok(principal_angles(a, b)?.first().copied().unwrap_or(0.0))
}

/// Equal dimensions and every principal angle below `tol`.
pub fn subspaces_equal(a: &BehaviorBasis, b: &BehaviorBasis, tol: f64) -> Result<bool> {
    Ok(a.dim() == b.dim() && max_angle(a, b)? < tol)
}
