//! Independent oracles: pivoted-QR linear algebra and closed-form restricted behaviors.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;

/// Orthonormal basis of the column span by column-pivoted QR; `|R_ii|` above
/// `1e-10 * |R_11| * max(dims)` counts toward the rank.
pub fn orth(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (q, r) = pivoted_qr(m);
    q.columns(0, r).into_owned()
}

/// Full orthogonal `Q` of a column-pivoted QR of `m`, plus the numerical rank.
fn pivoted_qr(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return (DMatrix::identity(rows, rows), 0);
    }
    // Pad with zero columns so Q comes out square.
    let mut padded = DMatrix::zeros(rows, cols.max(rows));
    padded.columns_mut(0, cols).copy_from(m);
    let qr = padded.col_piv_qr();
    let r = qr.r();
    let top = r[(0, 0)].abs();
    let thr = 1e-10 * top * rows.max(cols) as f64;
    let rank = (0..rows.min(cols)).take_while(|&i| top > 0.0 && r[(i, i)].abs() > thr).count();
    (qr.q(), rank)
}

pub fn rank(m: &DMatrix<f64>) -> usize {
    orth(m).ncols()
}

/// Largest principal angle via `asin ‖(I - QaQaᵀ)Qb‖₂`, symmetrized; π/2 on a dimension mismatch.
pub fn max_angle(qa: &DMatrix<f64>, qb: &DMatrix<f64>) -> f64 {
    if qa.ncols() != qb.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    // ‖r‖₂ = sqrt(λ_max(rᵀr)); no cancellation when r is small.
    let gap = |x: &DMatrix<f64>, y: &DMatrix<f64>| {
        let r = y - x * (x.transpose() * y);
        (r.transpose() * &r).symmetric_eigenvalues().max().max(0.0).sqrt()
    };
    gap(qa, qb).max(gap(qb, qa)).min(1.0).asin()
}

/// `V ∩ W` through the null space of `[B_V, -B_W]`.
pub fn kernel_intersection(bv: &DMatrix<f64>, bw: &DMatrix<f64>) -> DMatrix<f64> {
    let n = bv.nrows();
    let (a, b) = (bv.ncols(), bw.ncols());
    if a == 0 || b == 0 {
        return DMatrix::zeros(n, 0);
    }
    let mut m = DMatrix::zeros(n, a + b);
    m.view_mut((0, 0), (n, a)).copy_from(bv);
    m.view_mut((0, a), (n, b)).copy_from(&(-bw));
    // Null space of M = trailing columns of a full Q of Mᵀ.
    let (q, rank) = pivoted_qr(&m.transpose());
    let z = q.columns(rank, a + b - rank);
    orth(&(bv * z.rows(0, a)))
}

/// Random `rows x cols` matrix, entries uniform in `[-1, 1]`.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Closed-form `[O_L, T_L]` of `σx = Ax + Bv, w = Cx + Dv` in interleaved layout:
/// `w(t) = C A^t x0 + Σ_{s<t} C A^{t-1-s} B v(s) + D v(t)`.
pub fn restricted_matrix(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    horizon: usize,
) -> DMatrix<f64> {
    let (q, n, nv) = (c.nrows(), a.nrows(), d.ncols());
    let mut out = DMatrix::zeros(q * horizon, n + nv * horizon);
    let mut powers = vec![DMatrix::identity(n, n)];
    for t in 1..horizon {
        let next = a * &powers[t - 1];
        powers.push(next);
    }
    for t in 0..horizon {
        out.view_mut((q * t, 0), (q, n)).copy_from(&(c * &powers[t]));
        out.view_mut((q * t, n + nv * t), (q, nv)).copy_from(d);
        for s in 0..t {
            out.view_mut((q * t, n + nv * s), (q, nv))
                .copy_from(&(c * &powers[t - 1 - s] * b));
        }
    }
    out
}

pub fn latent_basis(model: &ddimpl::LatentModel, horizon: usize) -> DMatrix<f64> {
    orth(&restricted_matrix(model.a(), model.b(), model.c(), model.d(), horizon))
}

/// Rows picked from `m`.
pub fn rows(m: &DMatrix<f64>, picks: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(picks.len(), m.ncols(), |i, j| m[(picks[i], j)])
}

/// Row indices of the channels `picks` in an interleaved `q`-channel stack of depth `horizon`.
pub fn channel_rows(q: usize, picks: &[usize], horizon: usize) -> Vec<usize> {
    (0..horizon).flat_map(|t| picks.iter().map(move |&p| q * t + p)).collect()
}

/// Random minimal input/state/output model as a latent model, `m` inputs, `p` outputs, order `n`.
pub fn random_latent<R: Rng>(rng: &mut R, m: usize, p: usize, n: usize) -> ddimpl::LatentModel {
    ddimpl::lti::random_iso(rng, m, p, n, true).unwrap().to_latent()
}

/// Whether `b1 ∩ b2` has a numerically tame realization: `[D1, -D2]` well
/// conditioned and the intersected dynamics stable.
pub fn tame_intersection(b1: &ddimpl::LatentModel, b2: &ddimpl::LatentModel) -> bool {
    let q = b1.variables();
    let (v1, v2) = (b1.input_dim(), b2.input_dim());
    let mut m = DMatrix::zeros(q, v1 + v2);
    m.view_mut((0, 0), (q, v1)).copy_from(b1.d());
    m.view_mut((0, v1), (q, v2)).copy_from(&(-b2.d()));
    let sv = m.singular_values();
    if sv.len() < q || sv.min() < 1e-2 * sv.max() {
        return false;
    }
    let Ok(both) = b1.intersection(b2) else {
        return false;
    };
    both.a().is_empty() || both.a().complex_eigenvalues().iter().all(|z| z.norm() < 1.0)
}
