//! State-space models and exact restricted-behavior bases.
//!
//! This is the model-based side of the crate: everything here knows the system
//! matrices and serves as ground truth for the data-driven routines.
//!
//! Two representations are used:
//!
//! * [`StateSpaceModel`]: `σx = Ax + Bu, y = Cx + Du`. The manifest variable vector
//!   is `(u, y)` in that order, so a model with `m` inputs and `p` outputs has
//!   `m + p` channels and channel `i < m` is input `i`.
//! * [`LatentModel`]: `σx = Ax + Bv, w = Cx + Dv` with both `x` and the driving
//!   input `v` latent. Projections, products and interconnections of behaviors
//!   stay in this class, which is what the oracles need.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Partition, Trajectory};
use crate::subspace::{kernel, orthonormal_basis, pinv, BehaviorBasis, RankTolerance};

/// Draw budget for rejection sampling of random models.
pub const MAX_DRAWS: usize = 1000;

/// Input/state/output model with an optional `w`/`c` role assignment of its channels.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    partition: Option<Partition>,
    controllable: bool,
    observable: bool,
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        partition: Option<Partition>,
    ) -> Result<Self> {
        let n = a.nrows();
        let (p, m) = d.shape();
        if a.ncols() != n || b.shape() != (n, m) || c.shape() != (p, n) {
            return Err(Error::Dimension(format!(
                "inconsistent model: A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        if m + p == 0 {
            return Err(Error::Dimension("model has no variables".into()));
        }
        if let Some(part) = &partition {
            if part.total() != m + p {
                return Err(Error::Dimension(format!(
                    "partition covers {} channels, model has {}",
                    part.total(),
                    m + p
                )));
            }
        }
        let tol = RankTolerance::default();
        let controllable = tol.rank(&controllability_matrix(&a, &b)) == n;
        let observable = tol.rank(&observability_matrix(&a, &c, n.max(1))) == n;
        Ok(Self {
            a,
            b,
            c,
            d,
            partition,
            controllable,
            observable,
        })
    }

    /// Static model `y = D u`.
    pub fn static_gain(d: DMatrix<f64>, partition: Option<Partition>) -> Result<Self> {
        let (p, m) = d.shape();
        Self::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, m), DMatrix::zeros(p, 0), d, partition)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// Number of inputs.
    pub fn m(&self) -> usize {
        self.d.ncols()
    }

    /// Number of outputs.
    pub fn p(&self) -> usize {
        self.d.nrows()
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn variables(&self) -> usize {
        self.m() + self.p()
    }

    pub fn partition(&self) -> Option<&Partition> {
        self.partition.as_ref()
    }

    pub fn with_partition(mut self, partition: Partition) -> Result<Self> {
        if partition.total() != self.variables() {
            return Err(Error::Dimension(format!(
                "partition covers {} channels, model has {}",
                partition.total(),
                self.variables()
            )));
        }
        self.partition = Some(partition);
        Ok(self)
    }

    pub fn is_controllable(&self) -> bool {
        self.controllable
    }

    pub fn is_observable(&self) -> bool {
        self.observable
    }

    /// Controllable and observable.
    pub fn is_minimal(&self) -> bool {
        self.controllable && self.observable
    }

    /// The same behavior as a latent-variable model with `v = u`.
    pub fn to_latent(&self) -> LatentModel {
        let (n, m, p) = (self.n(), self.m(), self.p());
        let mut c = DMatrix::zeros(m + p, n);
        c.view_mut((m, 0), (p, n)).copy_from(&self.c);
        let mut d = DMatrix::zeros(m + p, m);
        d.view_mut((0, 0), (m, m)).fill_with_identity();
        d.view_mut((m, 0), (p, m)).copy_from(&self.d);
        LatentModel::new(self.a.clone(), self.b.clone(), c, d).expect("consistent by construction")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("model JSON: {e}")))?;
        file.into_model()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from_model(self)).expect("model serializes")
    }
}

/// On-disk model: row-major nested arrays plus optional 1-based `picks_w`/`picks_c`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ModelFile {
    A: Vec<Vec<f64>>,
    B: Vec<Vec<f64>>,
    C: Vec<Vec<f64>>,
    D: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    picks_w: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    picks_c: Option<Vec<usize>>,
}

impl ModelFile {
    fn into_model(self) -> Result<StateSpaceModel> {
        let n = self.A.len();
        let p = self.D.len();
        if p == 0 {
            return Err(Error::Parse("D must have at least one row".into()));
        }
        let m = self.D[0].len();
        let a = dense("A", &self.A, n, n)?;
        let b = dense("B", &self.B, n, m)?;
        let c = dense("C", &self.C, p, n)?;
        let d = dense("D", &self.D, p, m)?;
        let partition = match (self.picks_w, self.picks_c) {
            (Some(w), Some(cc)) => Some(Partition::from_one_based(m + p, &w, &cc)?),
            (None, None) => None,
            _ => return Err(Error::Parse("picks_w and picks_c must be given together".into())),
        };
        StateSpaceModel::new(a, b, c, d, partition)
    }

    fn from_model(model: &StateSpaceModel) -> Self {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let mut b = rows(model.b());
        if model.n() == 0 {
            b.clear();
        }
        Self {
            A: rows(model.a()),
            B: b,
            C: rows(model.c()),
            D: rows(model.d()),
            picks_w: model.partition().map(Partition::picks_w_one_based),
            picks_c: model.partition().map(Partition::picks_c_one_based),
        }
    }
}

fn dense(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    // A state-free model may write B as [] regardless of m, and an
    // input-free one may write B and D as [].
    if nrows == 0 || (ncols == 0 && rows.is_empty()) {
        return Ok(DMatrix::zeros(nrows, ncols));
    }
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("{name} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// `[B, AB, ..., A^{n-1}B]`.
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        out.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}

/// `[C; CA; ...; CA^{blocks-1}]`.
pub fn observability_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>, blocks: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let p = c.nrows();
    let mut out = DMatrix::zeros(p * blocks, n);
    let mut block = c.clone();
    for i in 0..blocks {
        out.view_mut((i * p, 0), (p, n)).copy_from(&block);
        block *= a;
    }
    out
}

/// Simulates `model` from `x0` under the input `u`; the result has channels `(u, y)`.
pub fn simulate(model: &StateSpaceModel, u: &Trajectory, x0: &[f64]) -> Result<Trajectory> {
    if u.channels() != model.m() {
        return Err(Error::Dimension(format!(
            "input has {} channels, model expects {}",
            u.channels(),
            model.m()
        )));
    }
    model.to_latent().simulate(u.as_slice(), u.len(), x0)
}

/// Integer invariants `m(B)`, `p(B)`, `n(B)` and `ℓ(B)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerInvariants {
    pub m_inputs: usize,
    pub p_outputs: usize,
    pub n_order: usize,
    pub lag: usize,
}

impl IntegerInvariants {
    /// `m L + n`, the dimension of the restricted behavior for `L > lag`.
    pub fn restricted_dim(&self, horizon: usize) -> usize {
        self.m_inputs * horizon + self.n_order
    }
}

/// Invariants of a state-space model, with the lag taken as the observability index.
///
/// The state of a behavior is latent, so state minimality only needs `(A, C)`
/// observable; uncontrollable models describe behaviors with autonomous parts.
pub fn invariants_of(model: &StateSpaceModel) -> Result<IntegerInvariants> {
    if !model.is_observable() {
        return Err(Error::Minimality("(A, C) is not observable".into()));
    }
    let n = model.n();
    let tol = RankTolerance::default();
    let lag = if n == 0 {
        0
    } else {
        (1..=n)
            .find(|&l| tol.rank(&observability_matrix(model.a(), model.c(), l)) == n)
            .unwrap_or(n)
    };
    Ok(IntegerInvariants {
        m_inputs: model.m(),
        p_outputs: model.p(),
        n_order: n,
        lag,
    })
}

/// Matrix whose columns span `B|_L`: one simulated response per unit vector of `(x0, u(1..L))`.
pub fn restricted_behavior_matrix(model: &StateSpaceModel, horizon: usize) -> Result<DMatrix<f64>> {
    model.to_latent().restricted_matrix(horizon)
}

/// Orthonormal basis of `B|_L`.
pub fn restricted_behavior_basis(
    model: &StateSpaceModel,
    horizon: usize,
    tol: RankTolerance,
) -> Result<BehaviorBasis> {
    Ok(orthonormal_basis(&restricted_behavior_matrix(model, horizon)?, tol))
}

/// Latent-variable state model `σx = Ax + Bv, w = Cx + Dv`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl LatentModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let (q, nv) = d.shape();
        if a.ncols() != n || b.shape() != (n, nv) || c.shape() != (q, n) {
            return Err(Error::Dimension(format!(
                "inconsistent latent model: A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// The behavior `(R^q)^N`: every trajectory allowed.
    pub fn free(q: usize) -> Self {
        Self::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, q), DMatrix::zeros(q, 0), DMatrix::identity(q, q))
            .expect("consistent by construction")
    }

    /// The behavior `{0}` on `q` channels.
    pub fn zero(q: usize) -> Self {
        Self::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, 0), DMatrix::zeros(q, 0), DMatrix::zeros(q, 0))
            .expect("consistent by construction")
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn variables(&self) -> usize {
        self.d.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.d.ncols()
    }

    /// Simulates from `x0` with driving input `v` (time-major, `len * input_dim` values).
    pub fn simulate(&self, v: &[f64], len: usize, x0: &[f64]) -> Result<Trajectory> {
        let (n, nv, q) = (self.state_dim(), self.input_dim(), self.variables());
        if v.len() != len * nv {
            return Err(Error::Dimension(format!(
                "driving input has {} values, expected {len} x {nv}",
                v.len()
            )));
        }
        if x0.len() != n {
            return Err(Error::Dimension(format!("x0 has {} entries, state is {n}", x0.len())));
        }
        if len == 0 {
            return Err(Error::Range("simulation length must be positive".into()));
        }
        let mut x = DVector::from_column_slice(x0);
        let mut out = Vec::with_capacity(len * q);
        for t in 0..len {
            let vt = DVector::from_column_slice(&v[t * nv..(t + 1) * nv]);
            let w = &self.c * &x + &self.d * &vt;
            out.extend(w.iter());
            x = &self.a * &x + &self.b * &vt;
        }
        Trajectory::new(q, out)
    }

    /// `[O_L, T_L]` in the stacked time-major layout, `qL x (n + nv L)`.
    pub fn restricted_matrix(&self, horizon: usize) -> Result<DMatrix<f64>> {
        if horizon == 0 {
            return Err(Error::Range("horizon must be positive".into()));
        }
        let (n, nv, q) = (self.state_dim(), self.input_dim(), self.variables());
        let cols = n + nv * horizon;
        let mut out = DMatrix::zeros(q * horizon, cols);
        let zeros_v = vec![0.0; nv * horizon];
        for j in 0..cols {
            let mut x0 = vec![0.0; n];
            let mut v = zeros_v.clone();
            if j < n {
                x0[j] = 1.0;
            } else {
                v[j - n] = 1.0;
            }
            let traj = self.simulate(&v, horizon, &x0)?;
            out.column_mut(j).copy_from_slice(traj.as_slice());
        }
        Ok(out)
    }

    pub fn restricted_basis(&self, horizon: usize, tol: RankTolerance) -> Result<BehaviorBasis> {
        Ok(orthonormal_basis(&self.restricted_matrix(horizon)?, tol))
    }

    /// Keeps the listed channels in the listed order (projection and/or reordering).
    pub fn select(&self, channels: &[usize]) -> Result<Self> {
        if let Some(&bad) = channels.iter().find(|&&ch| ch >= self.variables()) {
            return Err(Error::Dimension(format!("channel {bad} out of range")));
        }
        let c = DMatrix::from_fn(channels.len(), self.state_dim(), |i, j| self.c[(channels[i], j)]);
        let d = DMatrix::from_fn(channels.len(), self.input_dim(), |i, j| self.d[(channels[i], j)]);
        Self::new(self.a.clone(), self.b.clone(), c, d)
    }

    /// Cartesian product with channels `(self, other)`.
    pub fn product(&self, other: &LatentModel) -> Self {
        Self::new(
            block_diag(&self.a, &other.a),
            block_diag(&self.b, &other.b),
            block_diag(&self.c, &other.c),
            block_diag(&self.d, &other.d),
        )
        .expect("consistent by construction")
    }

    /// Intersection of two behaviors on the same channels.
    ///
    /// Requires `[D_1, -D_2]` to have full row rank so that the matching condition
    /// can be solved for the driving inputs at every state; otherwise the
    /// interconnection would constrain the state and is reported as not well posed.
    pub fn intersection(&self, other: &LatentModel) -> Result<Self> {
        let q = self.variables();
        if other.variables() != q {
            return Err(Error::Dimension(format!(
                "cannot intersect behaviors on {q} and {} channels",
                other.variables()
            )));
        }
        let tol = RankTolerance::default();
        let (n1, n2) = (self.state_dim(), other.state_dim());
        let (v1, v2) = (self.input_dim(), other.input_dim());
        let mut m = DMatrix::zeros(q, v1 + v2);
        m.view_mut((0, 0), (q, v1)).copy_from(&self.d);
        m.view_mut((0, v1), (q, v2)).copy_from(&(-&other.d));
        if tol.rank(&m) != q {
            return Err(Error::NotWellPosed(
                "matching condition constrains the state; driving inputs cannot absorb it".into(),
            ));
        }
        let mut e = DMatrix::zeros(q, n1 + n2);
        e.view_mut((0, 0), (q, n1)).copy_from(&(-&self.c));
        e.view_mut((0, n1), (q, n2)).copy_from(&other.c);
        let feedback = pinv(&m, tol) * &e;
        let free = kernel(&m, tol).into_matrix();

        let a = block_diag(&self.a, &other.a);
        let b = block_diag(&self.b, &other.b);
        let mut c_top = DMatrix::zeros(q, n1 + n2);
        c_top.view_mut((0, 0), (q, n1)).copy_from(&self.c);
        let mut d_top = DMatrix::zeros(q, v1 + v2);
        d_top.view_mut((0, 0), (q, v1)).copy_from(&self.d);

        Self::new(
            &a + &b * &feedback,
            &b * &free,
            &c_top + &d_top * &feedback,
            &d_top * &free,
        )
    }
}

impl From<&StateSpaceModel> for LatentModel {
    fn from(model: &StateSpaceModel) -> Self {
        model.to_latent()
    }
}

fn block_diag(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let (r1, c1) = x.shape();
    let (r2, c2) = y.shape();
    let mut out = DMatrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(x);
    out.view_mut((r1, c1), (r2, c2)).copy_from(y);
    out
}

/// Integer invariants of any latent model, read off the dimensions of its restricted behaviors.
///
/// `dim B|_L - dim B|_{L-1} = m + #{rows with lag >= L}`, so the increments settle
/// at `m` right after the lag; the state dimension bounds the lag from above.
pub fn behavior_invariants(model: &LatentModel, tol: RankTolerance) -> Result<IntegerInvariants> {
    let top = model.state_dim() + 2;
    let mut dims = vec![0usize];
    for horizon in 1..=top {
        dims.push(tol.rank(&model.restricted_matrix(horizon)?));
    }
    let inconsistent = || Error::NumericalDegeneracy("restricted-behavior ranks are not monotone affine".into());
    let steps: Vec<usize> = dims
        .windows(2)
        .map(|w| w[1].checked_sub(w[0]))
        .collect::<Option<_>>()
        .ok_or_else(inconsistent)?;
    let m = steps[top - 1];
    let n = dims[top - 1].checked_sub(m * (top - 1)).ok_or_else(inconsistent)?;
    let lag = steps.iter().position(|&s| s == m).ok_or_else(inconsistent)?;
    Ok(IntegerInvariants {
        m_inputs: m,
        p_outputs: model.variables() - m,
        n_order: n,
        lag,
    })
}

/// Random matrix with entries uniform in `[-1, 1]`.
pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random stable state-space model with `m` inputs, `p` outputs and order `n`.
///
/// The spectral radius is drawn from `[0.5, 0.95]`. Draws are rejected until
/// `(A, C)` is observable and, when `controllable` is set, `(A, B)` controllable.
pub fn random_iso<R: Rng>(rng: &mut R, m: usize, p: usize, n: usize, controllable: bool) -> Result<StateSpaceModel> {
    for _ in 0..MAX_DRAWS {
        let mut a = random_matrix(rng, n, n);
        if n > 0 {
            let radius = a
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if radius < 1e-6 {
                continue;
            }
            a *= rng.gen_range(0.5..0.95) / radius;
        }
        let model = StateSpaceModel::new(
            a,
            random_matrix(rng, n, m),
            random_matrix(rng, p, n),
            random_matrix(rng, p, m),
            None,
        )?;
        if model.is_observable() && (!controllable || model.is_controllable()) {
            return Ok(model);
        }
    }
    Err(Error::Generation(MAX_DRAWS))
}

/// Deterministic random minimal plant with `q_w` to-be-controlled and `q_c` control channels.
///
/// The number of inputs is drawn from `1..q_w + q_c` and the `w`/`c` roles are
/// assigned to a random permutation of the `(u, y)` channels.
pub fn random_minimal_model(q_w: usize, q_c: usize, n: usize, seed: u64) -> Result<(StateSpaceModel, Partition)> {
    if q_w == 0 || q_c == 0 {
        return Err(Error::Partition("plants need at least one w and one c channel".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = q_w + q_c;
    let m = rng.gen_range(1..total);
    let model = random_iso(&mut rng, m, total - m, n, true)?;
    let mut channels: Vec<usize> = (0..total).collect();
    shuffle(&mut rng, &mut channels);
    let partition = Partition::new(total, channels[..q_w].to_vec(), channels[q_w..].to_vec())?;
    let model = model.with_partition(partition.clone())?;
    Ok((model, partition))
}

/// Fisher-Yates shuffle.
pub fn shuffle<R: Rng, T>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}
