//! Seeded random problem instances for property experiments.
//!
//! An [`Instance`] bundles a random minimal plant, a reference behavior (either
//! the closed loop of the plant with a random controller, or an unrelated random
//! behavior), exactly known models of both, and persistently exciting data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::implementability::{model_lag_bound, DataBundle, GpeBounds};
use crate::lti::{behavior_invariants, invariants_of, random_iso, shuffle, IntegerInvariants, LatentModel, StateSpaceModel};
use crate::signal::{is_gpe, Partition, Trajectory};
use crate::subspace::RankTolerance;

/// How the reference of an instance is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    /// `π_w(P ∥_c C)` for a random controller `C`: implementable by construction.
    ClosedLoop,
    /// A random behavior on the `w` channels, unrelated to the plant.
    Adversarial,
}

/// Size limits for random instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub max_q: usize,
    pub max_k: usize,
    pub max_order: usize,
    pub max_controller_order: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            max_q: 2,
            max_k: 2,
            max_order: 3,
            max_controller_order: 2,
        }
    }
}

/// A random plant/reference pair with models and data.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub kind: ReferenceKind,
    pub plant: StateSpaceModel,
    pub partition: Partition,
    pub reference: LatentModel,
    pub plant_invariants: IntegerInvariants,
    pub reference_invariants: IntegerInvariants,
    /// `max{ℓ(P), ℓ(R), ℓ(π_w(P))}`.
    pub lag_bound: usize,
    pub horizon: usize,
    pub plant_traj: Trajectory,
    pub ref_traj: Trajectory,
}

impl Instance {
    pub fn bundle(&self) -> Result<DataBundle> {
        self.bundle_at(self.horizon)
    }

    pub fn bundle_at(&self, horizon: usize) -> Result<DataBundle> {
        let inv = |i: &IntegerInvariants| GpeBounds {
            m: i.m_inputs,
            n: i.n_order,
        };
        Ok(DataBundle::new(
            self.plant_traj.clone(),
            self.ref_traj.clone(),
            horizon,
            self.partition.clone(),
            self.lag_bound,
        )?
        .with_bounds(inv(&self.plant_invariants), inv(&self.reference_invariants)))
    }
}

/// Random controller on `k` channels as a latent model with channels in `c` order.
pub fn random_controller<R: Rng>(rng: &mut R, k: usize, max_order: usize) -> Result<LatentModel> {
    let m = rng.gen_range(0..=k);
    let n = if m == k { 0 } else { rng.gen_range(0..=max_order) };
    let model = random_iso(rng, m, k - m, n, false)?;
    let mut order: Vec<usize> = (0..k).collect();
    shuffle(rng, &mut order);
    model.to_latent().select(&order)
}

/// `P ∥_c C` with channels in the plant's order.
pub fn interconnect(plant: &StateSpaceModel, controller: &LatentModel) -> Result<LatentModel> {
    let partition = plant
        .partition()
        .ok_or_else(|| Error::Partition("plant model has no w/c partition".into()))?;
    let q = partition.q();
    // Channels of (R^q × C) are (w, c); route each plant channel to its source.
    let mut source = vec![0; partition.total()];
    for (i, &ch) in partition.picks_w().iter().enumerate() {
        source[ch] = i;
    }
    for (j, &ch) in partition.picks_c().iter().enumerate() {
        source[ch] = q + j;
    }
    let lifted = LatentModel::free(q).product(controller).select(&source)?;
    plant.to_latent().intersection(&lifted)
}

/// `π_w(P ∥_c C)`.
pub fn controlled_behavior(plant: &StateSpaceModel, controller: &LatentModel) -> Result<LatentModel> {
    let partition = plant
        .partition()
        .ok_or_else(|| Error::Partition("plant model has no w/c partition".into()))?;
    interconnect(plant, controller)?.select(partition.picks_w())
}

/// Simulates `model` from a random initial state under a random driving input.
pub fn random_trajectory<R: Rng>(rng: &mut R, model: &LatentModel, len: usize) -> Result<Trajectory> {
    let v: Vec<f64> = (0..len * model.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x0: Vec<f64> = (0..model.state_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    model.simulate(&v, len, &x0)
}

/// Random trajectory of length at least `min_len` that is persistently exciting of
/// order `horizon` for the given invariants; the length doubles on failure.
pub fn gpe_trajectory<R: Rng>(
    rng: &mut R,
    model: &LatentModel,
    inv: &IntegerInvariants,
    horizon: usize,
    min_len: usize,
) -> Result<Trajectory> {
    let mut len = min_len.max(horizon);
    for _ in 0..4 {
        let traj = random_trajectory(rng, model, len)?;
        match is_gpe(&traj, horizon, inv.m_inputs, inv.n_order, RankTolerance::default()) {
            Ok(r) if r.gpe => return Ok(traj),
            Ok(_) | Err(Error::InfeasibleRank { .. }) => len *= 2,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NumericalDegeneracy(format!(
        "could not excite the behavior to order {horizon} within {len} samples"
    )))
}

/// Sample count sufficient for generic persistency of excitation: `(m+1)(L+n)+n`,
/// padded for slack.
pub fn sufficient_length(inv: &IntegerInvariants, horizon: usize) -> usize {
    (inv.m_inputs + 1) * (horizon + inv.n_order) + inv.n_order + 10
}

fn spectral_radius(a: &nalgebra::DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Builds a random instance; deterministic in `seed`.
///
/// `extra_horizon` selects `L = lag_bound + 1 + extra_horizon`. Draws that lead to
/// ill-posed interconnections or unstable references are retried with the same
/// generator.
pub fn generate(seed: u64, kind: ReferenceKind, dims: Dims, extra_horizon: usize) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = RankTolerance::default();
    for _ in 0..crate::lti::MAX_DRAWS {
        let q = rng.gen_range(1..=dims.max_q);
        let k = rng.gen_range(1..=dims.max_k);
        let n = rng.gen_range(0..=dims.max_order);
        let m = rng.gen_range(1..q + k);
        let Ok(model) = random_iso(&mut rng, m, q + k - m, n, true) else {
            continue;
        };
        let mut channels: Vec<usize> = (0..q + k).collect();
        shuffle(&mut rng, &mut channels);
        let partition = Partition::new(q + k, channels[..q].to_vec(), channels[q..].to_vec())?;
        let plant = model.with_partition(partition.clone())?;

        let reference = match kind {
            ReferenceKind::ClosedLoop => {
                let Ok(controller) = random_controller(&mut rng, k, dims.max_controller_order) else {
                    continue;
                };
                match controlled_behavior(&plant, &controller) {
                    Ok(r) => r,
                    Err(Error::NotWellPosed(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            ReferenceKind::Adversarial => {
                let m_r = rng.gen_range(0..q);
                let n_r = rng.gen_range(0..=dims.max_order);
                match random_iso(&mut rng, m_r, q - m_r, n_r, false) {
                    Ok(r) => r.to_latent(),
                    Err(_) => continue,
                }
            }
        };

        // Unstable realizations make long simulations overflow; redraw.
        if spectral_radius(reference.a()) >= 1.0 {
            continue;
        }

        let plant_invariants = invariants_of(&plant)?;
        let reference_invariants = behavior_invariants(&reference, tol)?;
        let lag_bound = model_lag_bound(&plant, &reference, tol)?;
        let horizon = lag_bound + 1 + extra_horizon;

        let plant_latent = plant.to_latent();
        let plant_len = sufficient_length(&plant_invariants, horizon);
        let ref_len = sufficient_length(&reference_invariants, horizon);
        let len = plant_len.max(ref_len);
        let Ok(plant_traj) = gpe_trajectory(&mut rng, &plant_latent, &plant_invariants, horizon, len) else {
            continue;
        };
        let Ok(ref_traj) = gpe_trajectory(&mut rng, &reference, &reference_invariants, horizon, len) else {
            continue;
        };
        return Ok(Instance {
            seed,
            kind,
            plant,
            partition,
            reference,
            plant_invariants,
            reference_invariants,
            lag_bound,
            horizon,
            plant_traj,
            ref_traj,
        });
    }
    Err(Error::Generation(crate::lti::MAX_DRAWS))
}
