//! Implementability of a reference behavior by control through the `c` channels.
//!
//! A reference `R` is implementable for the plant `P` iff
//! `N|_L ⊆ R|_L ⊆ π_w(P)|_L` for `L` beyond the lags of `P`, `R` and `π_w(P)`,
//! where `N = {w : (w, 0) ∈ P}` is the hidden behavior. [`check_data`] builds the
//! three subspaces from Hankel matrices of raw trajectories; [`check_model`] builds
//! them from state-space models and is used to cross-check the data path.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{behavior_invariants, invariants_of, LatentModel, StateSpaceModel};
use crate::signal::{hankel, is_gpe, Partition, Trajectory};
use crate::subspace::{
    intersect_with, is_subspace_of, orthonormal_basis, orthonormal_basis_scaled, pinv, singular_values, projector_onto, BehaviorBasis,
    Projector, RankTolerance,
};

/// Rank and residual tolerances used by the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rank: RankTolerance,
    /// Relative residual threshold for inclusions.
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: RankTolerance::default(),
            residual: 1e-8,
        }
    }
}

/// Caller-supplied bounds `(m, n)` used for the persistency-of-excitation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GpeBounds {
    pub m: usize,
    pub n: usize,
}

/// Plant and reference measurements plus everything needed to interpret them.
#[derive(Debug, Clone)]
pub struct DataBundle {
    pub plant_traj: Trajectory,
    pub ref_traj: Trajectory,
    pub horizon: usize,
    pub partition: Partition,
    /// Upper bound on `max{ℓ(P), ℓ(R), ℓ(π_w(P))}`.
    pub lag_bound: usize,
    pub plant_bounds: Option<GpeBounds>,
    pub ref_bounds: Option<GpeBounds>,
}

impl DataBundle {
    pub fn new(
        plant_traj: Trajectory,
        ref_traj: Trajectory,
        horizon: usize,
        partition: Partition,
        lag_bound: usize,
    ) -> Result<Self> {
        if plant_traj.channels() != partition.total() {
            return Err(Error::Dimension(format!(
                "plant data has {} channels, partition expects {}",
                plant_traj.channels(),
                partition.total()
            )));
        }
        if ref_traj.channels() != partition.q() {
            return Err(Error::Dimension(format!(
                "reference data has {} channels, expected {}",
                ref_traj.channels(),
                partition.q()
            )));
        }
        let t = plant_traj.len().min(ref_traj.len());
        if horizon == 0 || horizon > t {
            return Err(Error::Range(format!("horizon {horizon} outside 1..={t}")));
        }
        Ok(Self {
            plant_traj,
            ref_traj,
            horizon,
            partition,
            lag_bound,
            plant_bounds: None,
            ref_bounds: None,
        })
    }

    pub fn with_bounds(mut self, plant: GpeBounds, reference: GpeBounds) -> Self {
        self.plant_bounds = Some(plant);
        self.ref_bounds = Some(reference);
        self
    }
}

/// Dimensions of the three subspaces entering the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceRanks {
    #[serde(rename = "N")]
    pub hidden: usize,
    #[serde(rename = "R")]
    pub reference: usize,
    #[serde(rename = "Pw")]
    pub uncontrolled: usize,
}

/// Decision plus certificates and diagnostics.
///
/// `inclusions_hold` is the verdict on the data seen; `implementable` additionally
/// requires both persistency-of-excitation flags, without which the data test is
/// not conclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplementabilityVerdict {
    pub implementable: bool,
    pub inclusions_hold: bool,
    /// Least-squares solution of `N = R Φ` in orthonormal coordinates, when it holds.
    pub phi: Option<DMatrix<f64>>,
    /// Least-squares solution of `R = P_w Ψ` in orthonormal coordinates, when it holds.
    pub psi: Option<DMatrix<f64>>,
    pub residual_hidden_in_ref: f64,
    pub residual_ref_in_plant: f64,
    pub gpe_plant: bool,
    pub gpe_ref: bool,
    pub ranks: SubspaceRanks,
}

#[derive(Serialize)]
struct VerdictJson {
    implementable: bool,
    inclusions_hold: bool,
    residuals: ResidualsJson,
    gpe: GpeJson,
    ranks: SubspaceRanks,
}

#[derive(Serialize)]
struct ResidualsJson {
    hidden_in_ref: f64,
    ref_in_plant: f64,
}

#[derive(Serialize)]
struct GpeJson {
    plant: bool,
    #[serde(rename = "ref")]
    reference: bool,
}

impl ImplementabilityVerdict {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(VerdictJson {
            implementable: self.implementable,
            inclusions_hold: self.inclusions_hold,
            residuals: ResidualsJson {
                hidden_in_ref: self.residual_hidden_in_ref,
                ref_in_plant: self.residual_ref_in_plant,
            },
            gpe: GpeJson {
                plant: self.gpe_plant,
                reference: self.gpe_ref,
            },
            ranks: self.ranks,
        })
        .expect("verdict serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("verdict serializes")
    }
}

/// `Image H_L(w) (I - H_L(c)^† H_L(c))`: windows of `w` compatible with `c = 0`.
pub fn hidden_basis(
    plant_traj: &Trajectory,
    partition: &Partition,
    horizon: usize,
    tol: RankTolerance,
) -> Result<BehaviorBasis> {
    let (w, c) = partition.split(plant_traj)?;
    let hw = hankel(&w, horizon)?;
    let hc = hankel(&c, horizon)?;
    let cols = hc.ncols();
    let annihilator = DMatrix::identity(cols, cols) - pinv(&hc, tol) * &hc;
    let scale = singular_values(&hw).first().copied().unwrap_or(0.0);
    Ok(orthonormal_basis_scaled(&(hw * annihilator), tol, scale))
}

/// `Image H_L(r)`.
pub fn reference_basis(ref_traj: &Trajectory, horizon: usize, tol: RankTolerance) -> Result<BehaviorBasis> {
    Ok(orthonormal_basis(&hankel(ref_traj, horizon)?, tol))
}

/// `Image H_L(w)` for the `w` channels of the plant data.
pub fn uncontrolled_basis(
    plant_traj: &Trajectory,
    partition: &Partition,
    horizon: usize,
    tol: RankTolerance,
) -> Result<BehaviorBasis> {
    let (w, _) = partition.split(plant_traj)?;
    Ok(orthonormal_basis(&hankel(&w, horizon)?, tol))
}

/// Tests both inclusions on already-built bases and assembles the verdict.
pub fn decide(
    hidden: &BehaviorBasis,
    reference: &BehaviorBasis,
    uncontrolled: &BehaviorBasis,
    residual_tol: f64,
    gpe_plant: bool,
    gpe_ref: bool,
) -> Result<ImplementabilityVerdict> {
    let left = is_subspace_of(hidden, reference, residual_tol)?;
    let right = is_subspace_of(reference, uncontrolled, residual_tol)?;
    let inclusions_hold = left.included && right.included;
    let (phi, psi) = if inclusions_hold {
        (
            Some(reference.matrix().transpose() * hidden.matrix()),
            Some(uncontrolled.matrix().transpose() * reference.matrix()),
        )
    } else {
        (None, None)
    };
    Ok(ImplementabilityVerdict {
        implementable: inclusions_hold && gpe_plant && gpe_ref,
        inclusions_hold,
        phi,
        psi,
        residual_hidden_in_ref: left.residual,
        residual_ref_in_plant: right.residual,
        gpe_plant,
        gpe_ref,
        ranks: SubspaceRanks {
            hidden: hidden.dim(),
            reference: reference.dim(),
            uncontrolled: uncontrolled.dim(),
        },
    })
}

fn gpe_flag(traj: &Trajectory, horizon: usize, bounds: Option<GpeBounds>, tol: RankTolerance) -> Result<bool> {
    let Some(b) = bounds else {
        return Ok(false);
    };
    match is_gpe(traj, horizon, b.m, b.n, tol) {
        Ok(report) => Ok(report.gpe),
        // Too few samples for the bound: the data cannot be exciting enough.
        Err(Error::InfeasibleRank { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Data-driven implementability test from raw plant and reference trajectories.
pub fn check_data(bundle: &DataBundle, tol: Tolerances) -> Result<ImplementabilityVerdict> {
    let l = bundle.horizon;
    if l <= bundle.lag_bound {
        return Err(Error::Horizon {
            horizon: l,
            lag_bound: bundle.lag_bound,
        });
    }
    let gpe_plant = gpe_flag(&bundle.plant_traj, l, bundle.plant_bounds, tol.rank)?;
    let gpe_ref = gpe_flag(&bundle.ref_traj, l, bundle.ref_bounds, tol.rank)?;
    let hidden = hidden_basis(&bundle.plant_traj, &bundle.partition, l, tol.rank)?;
    let reference = reference_basis(&bundle.ref_traj, l, tol.rank)?;
    let uncontrolled = uncontrolled_basis(&bundle.plant_traj, &bundle.partition, l, tol.rank)?;
    decide(&hidden, &reference, &uncontrolled, tol.residual, gpe_plant, gpe_ref)
}

/// Model-side restricted behaviors `N|_L`, `π_w(P)|_L` of a partitioned plant.
pub struct PlantBases {
    pub hidden: BehaviorBasis,
    pub uncontrolled: BehaviorBasis,
}

fn plant_partition(plant: &StateSpaceModel) -> Result<&Partition> {
    plant
        .partition()
        .ok_or_else(|| Error::Partition("plant model has no w/c partition".into()))
}

/// `N|_L` and `π_w(P)|_L` from the plant model.
///
/// The hidden behavior is the plant's restricted behavior intersected with
/// `{c = 0}` (projector intersection), then projected onto the `w` rows.
pub fn plant_bases(plant: &StateSpaceModel, horizon: usize, tol: RankTolerance) -> Result<PlantBases> {
    let partition = plant_partition(plant)?;
    let full = plant.to_latent().restricted_basis(horizon, tol)?;
    let ambient = full.ambient_dim();
    let w_rows = partition.w_rows(horizon);

    let mut c_free = DMatrix::zeros(ambient, ambient);
    for &r in &w_rows {
        c_free[(r, r)] = 1.0;
    }
    let clamped = intersect_with(&projector_onto(&full), &Projector::new(c_free)?, tol)?;
    let hidden = clamped.image().select_rows(&w_rows);
    let uncontrolled = full.select_rows(&w_rows);
    Ok(PlantBases { hidden, uncontrolled })
}

/// `max{ℓ(P), ℓ(R), ℓ(π_w(P))}` computed from the models.
pub fn model_lag_bound(plant: &StateSpaceModel, reference: &LatentModel, tol: RankTolerance) -> Result<usize> {
    let partition = plant_partition(plant)?;
    let lag_p = invariants_of(plant)?.lag;
    let lag_r = behavior_invariants(reference, tol)?.lag;
    let lag_pw = behavior_invariants(&plant.to_latent().select(partition.picks_w())?, tol)?.lag;
    Ok(lag_p.max(lag_r).max(lag_pw))
}

/// Model-based finite-horizon implementability test.
pub fn check_model(
    plant: &StateSpaceModel,
    reference: &LatentModel,
    horizon: usize,
    tol: Tolerances,
) -> Result<ImplementabilityVerdict> {
    let partition = plant_partition(plant)?;
    if reference.variables() != partition.q() {
        return Err(Error::Dimension(format!(
            "reference has {} channels, plant has {} w channels",
            reference.variables(),
            partition.q()
        )));
    }
    let lag_bound = model_lag_bound(plant, reference, tol.rank)?;
    if horizon <= lag_bound {
        return Err(Error::Horizon { horizon, lag_bound });
    }
    let bases = plant_bases(plant, horizon, tol.rank)?;
    let reference = reference.restricted_basis(horizon, tol.rank)?;
    decide(&bases.hidden, &reference, &bases.uncontrolled, tol.residual, true, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::simulate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(seed: u64, len: usize) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Trajectory::scalar(&(0..len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap()
    }

    fn one(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    /// `w = c`, channels `(c, w)`.
    fn static_plant() -> StateSpaceModel {
        StateSpaceModel::static_gain(one(1.0), Some(Partition::new(2, vec![1], vec![0]).unwrap())).unwrap()
    }

    /// `σw = w + c`, channels `(c, w)`.
    fn integrator_plant() -> StateSpaceModel {
        StateSpaceModel::new(one(1.0), one(1.0), one(1.0), one(0.0), Some(Partition::new(2, vec![1], vec![0]).unwrap()))
            .unwrap()
    }

    fn decaying() -> StateSpaceModel {
        StateSpaceModel::new(one(0.5), DMatrix::zeros(1, 0), one(1.0), DMatrix::zeros(1, 0), None).unwrap()
    }

    fn decaying_data(len: usize) -> Trajectory {
        decaying().to_latent().simulate(&[], len, &[1.0]).unwrap()
    }

    fn assert_span(b: &BehaviorBasis, dir: &[f64]) {
        assert_eq!(b.dim(), 1);
        assert!(b.residual_of(dir) < 1e-12 * (1.0 + dir.iter().map(|x| x * x).sum::<f64>().sqrt()));
    }

    #[test]
    fn hidden_of_static_plant_is_zero() {
        let data = simulate(&static_plant(), &noise(1, 40), &[]).unwrap();
        let part = static_plant().partition().unwrap().clone();
        assert!(hidden_basis(&data, &part, 2, RankTolerance::default()).unwrap().is_zero());
    }

    #[test]
    fn hidden_of_integrator_is_constants() {
        let data = simulate(&integrator_plant(), &noise(2, 40), &[0.3]).unwrap();
        let part = integrator_plant().partition().unwrap().clone();
        assert_span(&hidden_basis(&data, &part, 2, RankTolerance::default()).unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn hidden_with_silent_control_is_whole_image() {
        let w = noise(3, 30);
        let data = Trajectory::stack(&Trajectory::zeros(1, 30).unwrap(), &w).unwrap();
        let part = Partition::new(2, vec![1], vec![0]).unwrap();
        let tol = RankTolerance::default();
        let hidden = hidden_basis(&data, &part, 3, tol).unwrap();
        let image = orthonormal_basis(&hankel(&w, 3).unwrap(), tol);
        assert_eq!(hidden.dim(), image.dim());
        assert!(crate::subspace::max_angle(&hidden, &image).unwrap() < 1e-10);
    }

    #[test]
    fn reference_examples() {
        let tol = RankTolerance::default();
        let impulse = Trajectory::scalar(&[2.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_span(&reference_basis(&impulse, 2, tol).unwrap(), &[1.0, 0.0]);
        assert_span(&reference_basis(&decaying_data(20), 2, tol).unwrap(), &[1.0, 0.5]);
        assert!(reference_basis(&Trajectory::zeros(1, 10).unwrap(), 2, tol).unwrap().is_zero());
    }

    #[test]
    fn uncontrolled_examples() {
        let tol = RankTolerance::default();
        let part = Partition::new(2, vec![1], vec![0]).unwrap();
        let s = simulate(&static_plant(), &noise(4, 40), &[]).unwrap();
        assert_eq!(uncontrolled_basis(&s, &part, 3, tol).unwrap().dim(), 3);
        let i = simulate(&integrator_plant(), &noise(5, 40), &[0.0]).unwrap();
        assert_eq!(uncontrolled_basis(&i, &part, 2, tol).unwrap().dim(), 2);
        let silent = Trajectory::stack(&noise(6, 20), &Trajectory::zeros(1, 20).unwrap()).unwrap();
        assert!(uncontrolled_basis(&silent, &part, 2, tol).unwrap().is_zero());
    }

    fn bundle(plant: &StateSpaceModel, x0: &[f64], plant_gpe: GpeBounds) -> DataBundle {
        let data = simulate(plant, &noise(7, 60), x0).unwrap();
        DataBundle::new(data, decaying_data(60), 2, plant.partition().unwrap().clone(), 1)
            .unwrap()
            .with_bounds(plant_gpe, GpeBounds { m: 0, n: 1 })
    }

    #[test]
    fn static_plant_implements_decaying_reference() {
        let v = check_data(&bundle(&static_plant(), &[], GpeBounds { m: 1, n: 0 }), Tolerances::default()).unwrap();
        assert!(v.implementable && v.gpe_plant && v.gpe_ref);
        assert_eq!((v.ranks.hidden, v.ranks.reference, v.ranks.uncontrolled), (0, 1, 2));
        assert!(v.phi.is_some() && v.psi.is_some());
    }

    #[test]
    fn integrator_cannot_implement_decaying_reference() {
        let v = check_data(&bundle(&integrator_plant(), &[0.2], GpeBounds { m: 1, n: 1 }), Tolerances::default())
            .unwrap();
        assert!(!v.implementable && !v.inclusions_hold);
        assert!(v.gpe_plant && v.gpe_ref);
        assert!(v.residual_hidden_in_ref > 0.1);
        assert!(v.phi.is_none());
    }

    #[test]
    fn own_w_data_is_implementable() {
        let plant = integrator_plant();
        let data = simulate(&plant, &noise(8, 60), &[0.1]).unwrap();
        let part = plant.partition().unwrap().clone();
        let (w, _) = part.split(&data).unwrap();
        let b = DataBundle::new(data, w, 3, part, 1)
            .unwrap()
            .with_bounds(GpeBounds { m: 1, n: 1 }, GpeBounds { m: 1, n: 0 });
        let v = check_data(&b, Tolerances::default()).unwrap();
        assert!(v.implementable, "{v:?}");
    }

    #[test]
    fn horizon_must_exceed_lag_bound() {
        let mut b = bundle(&static_plant(), &[], GpeBounds { m: 1, n: 0 });
        b.lag_bound = 2;
        assert!(matches!(check_data(&b, Tolerances::default()), Err(Error::Horizon { .. })));
    }

    #[test]
    fn missing_bounds_leave_verdict_unreliable() {
        let mut b = bundle(&static_plant(), &[], GpeBounds { m: 1, n: 0 });
        b.plant_bounds = None;
        let v = check_data(&b, Tolerances::default()).unwrap();
        assert!(v.inclusions_hold && !v.gpe_plant && !v.implementable);
    }

    #[test]
    fn model_check_on_hand_examples() {
        let r = decaying().to_latent();
        let tol = Tolerances::default();
        assert!(check_model(&static_plant(), &r, 2, tol).unwrap().implementable);
        let v = check_model(&integrator_plant(), &r, 2, tol).unwrap();
        assert!(!v.implementable);
        assert!(matches!(check_model(&integrator_plant(), &r, 1, tol), Err(Error::Horizon { .. })));
    }

    #[test]
    fn model_check_extreme_references() {
        let plant = integrator_plant();
        let part = plant.partition().unwrap().clone();
        let tol = Tolerances::default();
        // Constants: the behavior of c = 0 in closed loop, i.e. the hidden behavior.
        let hidden = StateSpaceModel::new(one(1.0), DMatrix::zeros(1, 0), one(1.0), DMatrix::zeros(1, 0), None)
            .unwrap()
            .to_latent();
        assert!(check_model(&plant, &hidden, 3, tol).unwrap().implementable);
        let uncontrolled = plant.to_latent().select(part.picks_w()).unwrap();
        assert!(check_model(&plant, &uncontrolled, 3, tol).unwrap().implementable);
    }

    #[test]
    fn verdict_json_shape() {
        let v = check_model(&static_plant(), &decaying().to_latent(), 2, Tolerances::default()).unwrap();
        let j = v.to_json_value();
        assert_eq!(j["implementable"], true);
        assert!(j["residuals"]["hidden_in_ref"].is_number());
        assert_eq!(j["gpe"]["ref"], true);
        assert_eq!(j["ranks"]["Pw"], 2);
    }
}
