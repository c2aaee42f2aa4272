//! Property tests for the kinematic identities and the positivity of the
//! exponential-Euler step.

use proptest::prelude::*;
use relboltz::collision::post_collision;
use relboltz::grid::{GridFunction, MomentumGrid};
use relboltz::kinematics::{com_boost, g_relative, lift, s_invariant};
use relboltz::solver::{SimConfig, Stepper};

fn momentum() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-10.0f64..10.0)
}

fn unit_vector() -> impl Strategy<Value = [f64; 3]> {
    (-1.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(z, phi)| {
        let rho = (1.0 - z * z).max(0.0).sqrt();
        [rho * phi.cos(), rho * phi.sin(), z]
    })
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

proptest! {
    #[test]
    fn s_minus_g_squared_is_four(pv in momentum(), qv in momentum()) {
        let p = lift(pv);
        let q = lift(qv);
        let s = s_invariant(p, q);
        let g = g_relative(p, q);
        prop_assert!((s - g * g - 4.0).abs() < 1e-9 * s);
    }

    #[test]
    fn relative_momentum_two_sided_bound(pv in momentum(), qv in momentum()) {
        let p = lift(pv);
        let q = lift(qv);
        let g = g_relative(p, q);
        let diff = norm3([pv[0] - qv[0], pv[1] - qv[1], pv[2] - qv[2]]);
        let lower = diff / (p.energy() * q.energy()).sqrt();
        prop_assert!(g >= lower - 1e-10 * (1.0 + diff));
        prop_assert!(g <= diff + 1e-10 * (1.0 + diff));
    }

    #[test]
    fn boost_first_row_bounded(pv in momentum(), qv in momentum()) {
        let p = lift(pv);
        let q = lift(qv);
        prop_assume!(g_relative(p, q) > 1e-6);
        let lambda = com_boost(p, q).unwrap();
        let bound = std::f64::consts::SQRT_2 * (p.energy() * q.energy()).sqrt();
        for nu in 0..4 {
            prop_assert!(lambda.0[0][nu].abs() <= bound * (1.0 + 1e-10));
        }
    }

    #[test]
    fn collision_conserves_invariants(pv in momentum(), qv in momentum(), w in unit_vector()) {
        let p = lift(pv);
        let q = lift(qv);
        let (pp, qp) = post_collision(p, q, w);
        let e0 = p.energy() + q.energy();
        prop_assert!(((pp.energy() + qp.energy()) - e0).abs() < 1e-9 * e0);
        for d in 0..3 {
            let before = pv[d] + qv[d];
            let after = pp.spatial()[d] + qp.spatial()[d];
            prop_assert!((after - before).abs() < 1e-9 * e0);
        }
        let s0 = s_invariant(p, q);
        let s1 = s_invariant(pp, qp);
        prop_assert!((s1 - s0).abs() < 1e-9 * s0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exp_euler_step_stays_nonnegative(
        values in prop::collection::vec(0.0f64..1.0, 216),
        dt in 0.01f64..0.5,
    ) {
        let mut cfg = SimConfig::default();
        cfg.n_per_axis = 6;
        cfg.p_max = 3.0;
        cfg.n_polar = 4;
        cfg.n_azimuth = 4;
        let grid = MomentumGrid::new(cfg.n_per_axis, cfg.p_max);
        let f = GridFunction { grid, values };
        let stepper = Stepper::from_config(&cfg);
        let (next, _) = stepper.step_exp_euler(&f, dt);
        for &v in &next.values {
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }
}
