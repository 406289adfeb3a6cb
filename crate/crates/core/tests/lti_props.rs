mod common;

use ddimpl::lti::{behavior_invariants, invariants_of, random_iso, random_minimal_model, simulate, LatentModel};
use ddimpl::scenario::{random_trajectory, sufficient_length};
use ddimpl::signal::{hankel, is_gpe};
use ddimpl::subspace::orthonormal_basis;
use ddimpl::{RankTolerance, StateSpaceModel, Trajectory};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> RankTolerance {
    RankTolerance::default()
}

/// `(q, m, n)` with `1 <= m < q <= 4`, `n <= 4`.
fn sizes() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..=4).prop_flat_map(|q| (Just(q), 1..q, 0usize..=4))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restricted_dimension_is_affine_above_the_lag((q, m, n) in sizes(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_iso(&mut rng, m, q - m, n, true).unwrap();
        let inv = invariants_of(&model).unwrap();
        for horizon in inv.lag + 1..inv.lag + 4 {
            let oracle = common::latent_basis(&model.to_latent(), horizon);
            prop_assert_eq!(oracle.ncols(), m * horizon + n);
            prop_assert_eq!(inv.restricted_dim(horizon), m * horizon + n);
        }
    }

    #[test]
    fn library_basis_matches_closed_form((q, m, n) in sizes(), seed in any::<u64>(), extra in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent = random_iso(&mut rng, m, q - m, n, false).unwrap().to_latent();
        let horizon = 1 + extra + n;
        let ours = latent.restricted_basis(horizon, tol()).unwrap();
        let oracle = common::latent_basis(&latent, horizon);
        prop_assert!(common::max_angle(ours.matrix(), &oracle) < 1e-8);
    }

    #[test]
    fn fundamental_lemma((q, m, n) in sizes(), seed in any::<u64>(), extra in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_iso(&mut rng, m, q - m, n, true).unwrap();
        let inv = invariants_of(&model).unwrap();
        let horizon = inv.lag + extra;
        let w = random_trajectory(&mut rng, &model.to_latent(), sufficient_length(&inv, horizon)).unwrap();
        let report = is_gpe(&w, horizon, m, n, tol()).unwrap();
        prop_assert!(report.gpe, "{:?}", report);
        let image = orthonormal_basis(&hankel(&w, horizon).unwrap(), tol());
        prop_assert!(common::max_angle(image.matrix(), &common::latent_basis(&model.to_latent(), horizon)) < 1e-8);
    }

    #[test]
    fn invariants_from_dimensions_match_state_space((q, m, n) in sizes(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_iso(&mut rng, m, q - m, n, true).unwrap();
        prop_assert_eq!(behavior_invariants(&model.to_latent(), tol()).unwrap(), invariants_of(&model).unwrap());
    }

    #[test]
    fn simulation_matches_closed_form((q, m, n) in sizes(), seed in any::<u64>(), len in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_iso(&mut rng, m, q - m, n, false).unwrap();
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..m * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = simulate(&model, &Trajectory::new(m, u.clone()).unwrap(), &x0).unwrap();
        let latent = model.to_latent();
        let big = common::restricted_matrix(latent.a(), latent.b(), latent.c(), latent.d(), len);
        let coeffs = DVector::from_iterator(n + m * len, x0.iter().chain(&u).copied());
        let expected = big * coeffs;
        prop_assert!((DVector::from_column_slice(w.as_slice()) - expected).norm() < 1e-12);
        for t in 1..=len {
            prop_assert_eq!(&w.sample(t)[..m], &u[(t - 1) * m..t * m]);
        }
    }

    #[test]
    fn model_json_round_trip(seed in any::<u64>()) {
        let (model, partition) = random_minimal_model(1, 2, 2, seed).unwrap();
        let back = StateSpaceModel::from_json(&model.to_json()).unwrap();
        prop_assert_eq!(back.partition(), Some(&partition));
        prop_assert_eq!(back, model);
    }

    /// Coordinate projection: `π(B)|_L = Π(B|_L)`.
    #[test]
    fn projection_commutes_with_restriction((q, m, n) in sizes(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent = random_iso(&mut rng, m, q - m, n, true).unwrap().to_latent();
        let keep: Vec<usize> = (0..q).filter(|_| rng.gen_bool(0.6)).collect();
        prop_assume!(!keep.is_empty());
        let horizon = n + 2;
        let full = common::latent_basis(&latent, horizon);
        let projected = common::orth(&common::rows(&full, &common::channel_rows(q, &keep, horizon)));
        let oracle = common::latent_basis(&latent.select(&keep).unwrap(), horizon);
        prop_assert!(common::max_angle(&projected, &oracle) < 1e-8);
    }

    /// Intersection above the lags, and inclusion at every horizon.
    #[test]
    fn intersection_commutes_with_restriction(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b1, b2) = loop {
            let (n1, n2) = (rng.gen_range(0..=3), rng.gen_range(0..=3));
            let b1 = common::random_latent(&mut rng, 1, 1, n1);
            let b2 = common::random_latent(&mut rng, 1, 1, n2);
            if common::tame_intersection(&b1, &b2) {
                break (b1, b2);
            }
        };
        let both = b1.intersection(&b2).unwrap();
        let lag = |b: &LatentModel| behavior_invariants(b, tol()).unwrap().lag;
        let top = lag(&b1).max(lag(&b2));
        for horizon in 1..=top + 2 {
            let inter = common::kernel_intersection(&common::latent_basis(&b1, horizon), &common::latent_basis(&b2, horizon));
            let exact = common::latent_basis(&both, horizon);
            let leak = (&exact - &inter * (inter.transpose() * &exact)).norm();
            prop_assert!(leak < 1e-8);
            if horizon > top {
                prop_assert!(common::max_angle(&inter, &exact) < 1e-8);
            }
        }
    }
}

#[test]
fn free_and_zero_behaviors() {
    let free = LatentModel::free(2);
    assert_eq!(free.restricted_basis(3, tol()).unwrap().dim(), 6);
    assert!(LatentModel::zero(2).restricted_basis(3, tol()).unwrap().is_zero());
    let inv = behavior_invariants(&free, tol()).unwrap();
    assert_eq!((inv.m_inputs, inv.n_order, inv.lag), (2, 0, 0));
}

#[test]
fn ill_posed_intersection_is_reported() {
    // Two autonomous behaviors on one channel: matching them constrains the state.
    let one = DMatrix::from_element(1, 1, 1.0);
    let a = LatentModel::new(one.clone() * 0.5, DMatrix::zeros(1, 0), one.clone(), DMatrix::zeros(1, 0)).unwrap();
    let b = LatentModel::new(one.clone() * 0.3, DMatrix::zeros(1, 0), one, DMatrix::zeros(1, 0)).unwrap();
    assert!(matches!(a.intersection(&b), Err(ddimpl::Error::NotWellPosed(_))));
}
