//! Data-driven controller implementability for finite-horizon LTI behaviors.
//!
//! Finite-horizon behaviors are handled as subspaces: from raw trajectories via
//! Hankel matrices, or exactly from state-space models. On top of that sit the
//! implementability test (`hidden ⊆ reference ⊆ uncontrolled plant`) and the
//! synthesis of the canonical controller's restricted behavior.

pub mod canonical;
mod dense;
pub mod error;
pub mod implementability;
pub mod lti;
pub mod scenario;
pub mod signal;
pub mod subspace;

pub use error::{Error, Result};
pub use lti::{IntegerInvariants, LatentModel, StateSpaceModel};
pub use signal::{Partition, Trajectory};
pub use subspace::{BehaviorBasis, Projector, RankTolerance};
