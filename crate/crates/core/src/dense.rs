//! Dense decompositions delegated to `faer`.
//!
//! nalgebra's SVD can lose accuracy badly on wide, rank-deficient matrices
//! (reconstruction errors around 1e-4 were observed on Hankel matrices), which is
//! fatal for rank and angle decisions at 1e-8. Matrices stay nalgebra on the API.
//!
//! The decompositions only fail to converge on non-finite input; that is treated
//! as a bug in the caller.

use faer::{Mat, Side};
use nalgebra::DMatrix;

/// `m / scale` as a faer matrix, with `scale` the largest magnitude (1 for a
/// zero matrix); normalizing keeps the iterations clear of overflow.
fn to_faer(m: &DMatrix<f64>) -> (Mat<f64>, f64) {
    let amax = m.amax();
    let scale = if amax > 0.0 { amax } else { 1.0 };
    (Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] / scale), scale)
}

/// Thin SVD `m = U diag(s) Vᵀ` with singular values in nonincreasing order.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return ThinSvd {
            u: DMatrix::zeros(r, 0),
            s: Vec::new(),
            v: DMatrix::zeros(c, 0),
        };
    }
    let (fm, scale) = to_faer(m);
    let svd = fm.thin_svd().expect("SVD of a finite matrix converges");
    let diag = svd.S().column_vector();
    let s: Vec<f64> = (0..k).map(|i| diag[i] * scale).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let (fu, fv) = (svd.U(), svd.V());
    ThinSvd {
        u: DMatrix::from_fn(r, k, |i, j| fu[(i, order[j])]),
        s: order.iter().map(|&j| s[j]).collect(),
        v: DMatrix::from_fn(c, k, |i, j| fv[(i, order[j])]),
    }
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let (fm, scale) = to_faer(m);
    let mut sv: Vec<f64> = fm
        .singular_values()
        .expect("SVD of a finite matrix converges")
        .into_iter()
        .map(|s| s * scale)
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Eigenvalues (nondecreasing) and orthonormal eigenvectors of a symmetric matrix.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let (fm, scale) = to_faer(m);
    let eig = fm
        .self_adjoint_eigen(Side::Lower)
        .expect("eigendecomposition of a finite matrix converges");
    let diag = eig.S().column_vector();
    let values: Vec<f64> = (0..n).map(|i| diag[i] * scale).collect();
    let u = eig.U();
    (values, DMatrix::from_fn(n, n, |i, j| u[(i, j)]))
}
