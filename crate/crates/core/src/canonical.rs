//! Canonical controller `C = π_c(P ∥_w R)` from data.
//!
//! Restricted to a horizon `L`, the controller is
//! `C|_L = Image Π_c P_r (P_r + P_p)^† P_p`, where `P_p` projects onto `P|_L`
//! and `P_r` onto `R|_L × R^{kL}`. All matrices here live in the interleaved
//! layout `(w(1), c(1), ..., w(L), c(L))`; [`PermutationPlan`] converts from the
//! block layout `(w(1..L), c(1..L))` in which `P_r` is naturally written.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{LatentModel, StateSpaceModel};
use crate::signal::{hankel, Partition, Trajectory};
use crate::subspace::{
    intersect_with, orthonormal_basis, orthonormal_basis_above, orthonormal_basis_scaled, principal_angles, projector_onto, select_rows, singular_values, symmetric_pinv,
    BehaviorBasis, Projector, RankTolerance, ANGLE_TOL,
};

/// Coordinate permutation from block order to interleaved order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationPlan {
    q: usize,
    k: usize,
    horizon: usize,
    /// `perm[i]` is the interleaved position of block coordinate `i`.
    perm: Vec<usize>,
}

impl PermutationPlan {
    pub fn new(q: usize, k: usize, horizon: usize) -> Self {
        let stride = q + k;
        let w = (0..q * horizon).map(|i| (i / q) * stride + i % q);
        let c = (0..k * horizon).map(|i| (i / k) * stride + q + i % k);
        Self {
            q,
            k,
            horizon,
            perm: w.chain(c).collect(),
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn ambient_dim(&self) -> usize {
        (self.q + self.k) * self.horizon
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        inv
    }

    /// Block-ordered vector to interleaved order.
    pub fn to_interleaved(&self, block: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; block.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = block[i];
        }
        out
    }

    /// Interleaved vector to block order.
    pub fn to_block(&self, interleaved: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&p| interleaved[p]).collect()
    }

    /// Interleaved positions of the `w` coordinates; the rows kept by `Π_w`.
    pub fn w_rows(&self) -> &[usize] {
        &self.perm[..self.q * self.horizon]
    }

    /// Interleaved positions of the `c` coordinates; the rows kept by `Π_c`.
    pub fn c_rows(&self) -> &[usize] {
        &self.perm[self.q * self.horizon..]
    }

    /// `Π_w` as a `qL x (q+k)L` selection matrix.
    pub fn pi_w(&self) -> DMatrix<f64> {
        selection(self.w_rows(), self.ambient_dim())
    }

    /// `Π_c` as a `kL x (q+k)L` selection matrix.
    pub fn pi_c(&self) -> DMatrix<f64> {
        selection(self.c_rows(), self.ambient_dim())
    }

    /// Rows of a block-ordered matrix moved to interleaved positions.
    pub fn rows_to_interleaved(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(block.nrows(), block.ncols());
        for (i, &p) in self.perm.iter().enumerate() {
            out.row_mut(p).copy_from(&block.row(i));
        }
        out
    }
}

fn selection(rows: &[usize], cols: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(rows.len(), cols);
    for (i, &r) in rows.iter().enumerate() {
        s[(i, r)] = 1.0;
    }
    s
}

/// Restricted behavior `C|_L` of a controller, in time-major `c` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerBasis {
    basis: BehaviorBasis,
    k: usize,
    horizon: usize,
}

#[derive(Serialize, Deserialize)]
struct ControllerSidecar {
    k: usize,
    #[serde(rename = "L")]
    horizon: usize,
    layout: String,
}

impl ControllerBasis {
    pub fn new(basis: BehaviorBasis, k: usize, horizon: usize) -> Result<Self> {
        if basis.ambient_dim() != k * horizon {
            return Err(Error::Dimension(format!(
                "controller basis lives in R^{}, expected R^{}",
                basis.ambient_dim(),
                k * horizon
            )));
        }
        Ok(Self { basis, k, horizon })
    }

    pub fn basis(&self) -> &BehaviorBasis {
        &self.basis
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// CSV export: `kL` rows, one column per basis vector, no header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let q = self.basis.matrix();
        for i in 0..q.nrows() {
            let row: Vec<String> = q.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// JSON sidecar describing the CSV layout.
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&ControllerSidecar {
            k: self.k,
            horizon: self.horizon,
            layout: "interleaved-time-major".into(),
        })
        .expect("sidecar serializes")
    }
}

/// `P_p`: projector onto `Image H_L((w, c))`, the plant's restricted behavior.
///
/// The plant data is reordered to `(w, c)` channels first. The projector is
/// formed from an orthonormal basis of the Hankel image, which equals `M M^†`.
pub fn plant_projector(
    plant_traj: &Trajectory,
    partition: &Partition,
    horizon: usize,
    tol: RankTolerance,
) -> Result<Projector> {
    Ok(projector_onto(&plant_basis(plant_traj, partition, horizon, tol)?))
}

/// `Image H_L((w, c))` in interleaved layout.
pub fn plant_basis(
    plant_traj: &Trajectory,
    partition: &Partition,
    horizon: usize,
    tol: RankTolerance,
) -> Result<BehaviorBasis> {
    let wc = partition.to_wc_order(plant_traj)?;
    Ok(orthonormal_basis(&hankel(&wc, horizon)?, tol))
}

/// `P_r`: projector onto `R|_L × R^{kL}` built as `blockdiag(R R^†, I)` and
/// permuted into interleaved layout.
pub fn reference_lift_projector(
    ref_traj: &Trajectory,
    k: usize,
    horizon: usize,
    tol: RankTolerance,
    plan: &PermutationPlan,
) -> Result<Projector> {
    check_plan(plan, ref_traj.channels(), k, horizon)?;
    let r = orthonormal_basis(&hankel(ref_traj, horizon)?, tol);
    Ok(lift_projector(&r, plan))
}

/// `blockdiag(P_R, I_{kL})` permuted into interleaved layout.
pub fn lift_projector(reference: &BehaviorBasis, plan: &PermutationPlan) -> Projector {
    let ql = plan.q() * plan.horizon();
    let n = plan.ambient_dim();
    let mut block = DMatrix::zeros(n, n);
    block.view_mut((0, 0), (ql, ql)).copy_from(projector_onto(reference).matrix());
    for i in ql..n {
        block[(i, i)] = 1.0;
    }
    Projector::new_unchecked(block).permuted(plan.perm())
}

fn check_plan(plan: &PermutationPlan, q: usize, k: usize, horizon: usize) -> Result<()> {
    if (plan.q(), plan.k(), plan.horizon()) != (q, k, horizon) {
        return Err(Error::Dimension(format!(
            "plan is for (q, k, L) = ({}, {}, {}), data needs ({q}, {k}, {horizon})",
            plan.q(),
            plan.k(),
            plan.horizon()
        )));
    }
    Ok(())
}

fn check_ambient(p: &Projector, plan: &PermutationPlan) -> Result<()> {
    if p.ambient_dim() != plan.ambient_dim() {
        return Err(Error::Dimension(format!(
            "projector on R^{} does not match plan ambient R^{}",
            p.ambient_dim(),
            plan.ambient_dim()
        )));
    }
    Ok(())
}

/// `C|_L = Image Π_c P_r (P_r + P_p)^† P_p`.
///
/// Evaluated for any inputs; whether the result actually implements the
/// reference is decided by [`verify_closed_loop`].
pub fn controller_basis(
    p_r: &Projector,
    p_p: &Projector,
    plan: &PermutationPlan,
    tol: RankTolerance,
) -> Result<ControllerBasis> {
    check_ambient(p_r, plan)?;
    check_ambient(p_p, plan)?;
    let n = plan.ambient_dim();
    let sum_pinv = symmetric_pinv(&(p_r.matrix() + p_p.matrix()), tol);
    // The product is half the projector onto the intersection, so its singular
    // values are 1/2 or 0; what is left of a zero one is round-off amplified by
    // the pseudoinverse. Decide the image of the product above that floor, then
    // take its c rows: Image Π_c X = Π_c Image X.
    let floor = n as f64 * f64::EPSILON * singular_values(&sum_pinv).first().copied().unwrap_or(0.0);
    let x = p_r.matrix() * sum_pinv * p_p.matrix();
    let image = orthonormal_basis_above(&x, tol.threshold(1.0, n, n).max(floor), tol);
    let basis = orthonormal_basis_scaled(&select_rows(image.matrix(), plan.c_rows()), tol, 1.0);
    ControllerBasis::new(basis, plan.k(), plan.horizon())
}

/// Everything the data-driven synthesis produces for one horizon.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub plan: PermutationPlan,
    pub plant: BehaviorBasis,
    pub reference: BehaviorBasis,
    pub controller: ControllerBasis,
}

/// Canonical controller from plant and reference trajectories.
pub fn synthesize(
    plant_traj: &Trajectory,
    ref_traj: &Trajectory,
    partition: &Partition,
    horizon: usize,
    tol: RankTolerance,
) -> Result<Synthesis> {
    if ref_traj.channels() != partition.q() {
        return Err(Error::Dimension(format!(
            "reference has {} channels, partition has {} w channels",
            ref_traj.channels(),
            partition.q()
        )));
    }
    let plan = PermutationPlan::new(partition.q(), partition.k(), horizon);
    let plant = plant_basis(plant_traj, partition, horizon, tol)?;
    let reference = orthonormal_basis(&hankel(ref_traj, horizon)?, tol);
    let controller = controller_basis(&lift_projector(&reference, &plan), &projector_onto(&plant), &plan, tol)?;
    Ok(Synthesis {
        plan,
        plant,
        reference,
        controller,
    })
}

/// Same subspace through the checked projector intersection `2 P_r (P_r + P_p)^† P_p`.
pub fn controller_basis_via_intersection(
    p_r: &Projector,
    p_p: &Projector,
    plan: &PermutationPlan,
    tol: RankTolerance,
) -> Result<ControllerBasis> {
    check_ambient(p_r, plan)?;
    check_ambient(p_p, plan)?;
    let inter = intersect_with(p_r, p_p, tol)?;
    let basis = inter.image().select_rows(plan.c_rows());
    ControllerBasis::new(basis, plan.k(), plan.horizon())
}

/// Outcome of the closed-loop check `Π_w((R^{qL} × C|_L) ∩ P|_L) = R|_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopReport {
    pub matches: bool,
    /// Principal angles between the controlled behavior and the reference, largest first.
    pub angles: Vec<f64>,
    pub max_angle: f64,
    pub interconnection_dim: usize,
    pub controlled_dim: usize,
    pub reference_dim: usize,
}

/// Interconnects the plant with the controller through `c` and compares the
/// resulting `w` behavior with the reference.
pub fn verify_closed_loop(
    plant: &BehaviorBasis,
    controller: &ControllerBasis,
    reference: &BehaviorBasis,
    plan: &PermutationPlan,
    tol: RankTolerance,
) -> Result<ClosedLoopReport> {
    let n = plan.ambient_dim();
    let ql = plan.q() * plan.horizon();
    if plant.ambient_dim() != n || reference.ambient_dim() != ql || controller.basis().ambient_dim() != n - ql {
        return Err(Error::Dimension("plant, controller and reference do not share (q, k, L)".into()));
    }
    let qc = controller.basis().matrix();
    let mut lift = DMatrix::zeros(n, ql + qc.ncols());
    lift.view_mut((0, 0), (ql, ql)).fill_with_identity();
    lift.view_mut((ql, ql), (n - ql, qc.ncols())).copy_from(qc);
    let lift = BehaviorBasis::from_orthonormal(plan.rows_to_interleaved(&lift), tol);

    let inter = intersect_with(&projector_onto(&lift), &projector_onto(plant), tol)?.image();
    let controlled = inter.select_rows(plan.w_rows());
    let angles = principal_angles(&controlled, reference)?;
    let max_angle = angles.first().copied().unwrap_or(0.0);
    Ok(ClosedLoopReport {
        matches: controlled.dim() == reference.dim() && max_angle < ANGLE_TOL,
        angles,
        max_angle,
        interconnection_dim: inter.dim(),
        controlled_dim: controlled.dim(),
        reference_dim: reference.dim(),
    })
}

/// A trajectory of the controller: random combination of the basis, deterministic in `seed`.
pub fn sample_controller_trajectory(controller: &ControllerBasis, seed: u64) -> Result<Trajectory> {
    if controller.dim() == 0 {
        return Err(Error::Empty("controller behavior is {0}".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = controller.basis().matrix();
    let coeffs = nalgebra::DVector::from_fn(q.ncols(), |_, _| rng.gen_range(-1.0..1.0));
    let v = q * coeffs;
    Trajectory::new(controller.k(), v.iter().copied().collect())
}

/// Model-side canonical controller `Π_c((R|_L × R^{kL}) ∩ P|_L)`.
pub fn model_controller_basis(
    plant: &StateSpaceModel,
    reference: &LatentModel,
    horizon: usize,
    tol: RankTolerance,
) -> Result<ControllerBasis> {
    let partition = plant
        .partition()
        .ok_or_else(|| Error::Partition("plant model has no w/c partition".into()))?;
    let plan = PermutationPlan::new(partition.q(), partition.k(), horizon);
    let p_p = projector_onto(&model_plant_basis(plant, horizon, tol)?);
    let p_r = lift_projector(&reference.restricted_basis(horizon, tol)?, &plan);
    controller_basis_via_intersection(&p_r, &p_p, &plan, tol)
}

/// Oracle `P|_L` of a partitioned plant in interleaved `(w, c)` layout.
pub fn model_plant_basis(plant: &StateSpaceModel, horizon: usize, tol: RankTolerance) -> Result<BehaviorBasis> {
    let partition = plant
        .partition()
        .ok_or_else(|| Error::Partition("plant model has no w/c partition".into()))?;
    let order: Vec<usize> = partition.picks_w().iter().chain(partition.picks_c()).copied().collect();
    plant.to_latent().select(&order)?.restricted_basis(horizon, tol)
}
