use std::f64::consts::{FRAC_PI_4, PI};

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use proptest::prelude::*;
use ptpb_core::presets::r2_box;
use ptpb_core::{
    estimate_bounds, forward_dynamics, rk4_step, spectral_norm, ArmParams, BoundsOptions,
    DynamicsProvider, JointState, TwoLinkArm,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent Lagrangian model built from link kinematics; M and V are differentiated numerically.
struct Oracle(ArmParams);

impl Oracle {
    fn coms(&self, q: Vector2<f64>) -> [Vector2<f64>; 2] {
        let p = &self.0;
        let dir = |a: f64| Vector2::new(a.sin(), -a.cos());
        let c1 = dir(q[0]) * p.lc1;
        let c2 = dir(q[0]) * p.l1 + dir(q[0] + q[1]) * p.lc2;
        [c1, c2]
    }

    fn jacobians(&self, q: Vector2<f64>) -> [Matrix2<f64>; 2] {
        let p = &self.0;
        let ddir = |a: f64| Vector2::new(a.cos(), a.sin());
        let a12 = q[0] + q[1];
        let j1 = Matrix2::from_columns(&[ddir(q[0]) * p.lc1, Vector2::zeros()]);
        let j2 = Matrix2::from_columns(&[ddir(q[0]) * p.l1 + ddir(a12) * p.lc2, ddir(a12) * p.lc2]);
        [j1, j2]
    }

    fn mass(&self, q: Vector2<f64>) -> Matrix2<f64> {
        let p = &self.0;
        let [j1, j2] = self.jacobians(q);
        let w1 = Matrix2::new(1.0, 0.0, 0.0, 0.0);
        let w2 = Matrix2::new(1.0, 1.0, 1.0, 1.0);
        j1.transpose() * j1 * p.m1 + j2.transpose() * j2 * p.m2 + w1 * p.i1 + w2 * p.i2
    }

    fn potential(&self, q: Vector2<f64>) -> f64 {
        let [c1, c2] = self.coms(q);
        self.0.g * (self.0.m1 * c1[1] + self.0.m2 * c2[1])
    }

    fn accel(&self, q: Vector2<f64>, dq: Vector2<f64>, u: Vector2<f64>) -> Vector2<f64> {
        let h = 1e-5;
        let mut dm = [Matrix2::zeros(); 2];
        let mut g = Vector2::zeros();
        for k in 0..2 {
            let mut e = Vector2::zeros();
            e[k] = h;
            dm[k] = (self.mass(q + e) - self.mass(q - e)) / (2.0 * h);
            g[k] = (self.potential(q + e) - self.potential(q - e)) / (2.0 * h);
        }
        // Christoffel symbols of the first kind contracted with dq twice
        let mut cdq = Vector2::zeros();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    cdq[k] += 0.5 * (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)]) * dq[i] * dq[j];
                }
            }
        }
        let f = Vector2::new(self.0.b1 * dq[0], self.0.b2 * dq[1]);
        self.mass(q).try_inverse().unwrap() * (u - cdq - g - f)
    }
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

#[test]
fn forward_dynamics_matches_lagrangian_oracle() {
    let arm = TwoLinkArm::default();
    let oracle = Oracle(arm.params);
    let q = [FRAC_PI_4, -FRAC_PI_4];
    for (dq, u) in [
        ([0.0, 0.0], [0.0, 0.0]),
        ([0.7, -1.1], [2.0, -3.0]),
        ([-0.4, 0.9], [-5.0, 1.5]),
    ] {
        let s = JointState::new(v(&q), v(&dq)).unwrap();
        let got = forward_dynamics(&arm, &s, &v(&u), &DVector::zeros(2)).unwrap();
        let want = oracle.accel(Vector2::from(q), Vector2::from(dq), Vector2::from(u));
        for i in 0..2 {
            assert_relative_eq!(got[i], want[i], epsilon = 1e-6, max_relative = 1e-6);
        }
    }
}

#[test]
fn mass_matches_kinematic_oracle() {
    let arm = TwoLinkArm::default();
    let oracle = Oracle(arm.params);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let q = Vector2::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let m = arm.mass(&v(q.as_slice()));
        let o = oracle.mass(q);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(m[(i, j)], o[(i, j)], epsilon = 1e-8);
            }
        }
    }
}

#[test]
fn mdot_minus_two_c_is_skew_symmetric() {
    let arm = TwoLinkArm::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let q = v(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
        let dq = v(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        let residual = |h: f64| {
            let mdot = (arm.mass(&(&q + &dq * h)) - arm.mass(&(&q - &dq * h))) / (2.0 * h);
            let n = mdot - arm.coriolis(&q, &dq) * 2.0;
            (&n + n.transpose()).amax()
        };
        let (a, b) = (residual(1e-3), residual(5e-4));
        assert!(b < 1e-6, "residual {b}");
        // central differences converge at second order
        assert!(a < 1e-12 || b <= a / 3.0, "{a} {b}");
    }
}

#[test]
fn energy_is_conserved_without_friction() {
    let arm = TwoLinkArm::new(ArmParams {
        b1: 0.0,
        b2: 0.0,
        ..ArmParams::default()
    })
    .unwrap();
    let energy = |x: &DVector<f64>| {
        let s = JointState::new(x.rows(0, 2).into_owned(), x.rows(2, 2).into_owned()).unwrap();
        arm.kinetic_energy(&s) + arm.potential_energy(&s.q)
    };
    let f = |_t: f64, x: &DVector<f64>| -> ptpb_core::Result<DVector<f64>> {
        let s = JointState::new(x.rows(0, 2).into_owned(), x.rows(2, 2).into_owned()).unwrap();
        let a = forward_dynamics(&arm, &s, &DVector::zeros(2), &DVector::zeros(2)).unwrap();
        Ok(DVector::from_iterator(
            4,
            s.dq.iter().chain(a.iter()).copied(),
        ))
    };
    let mut x = v(&[1.0, -0.5, 0.3, 0.2]);
    let e0 = energy(&x);
    let dt = 1e-3;
    for k in 0..1000 {
        let t = k as f64 * dt;
        let k1 = f(t, &x).unwrap();
        x = rk4_step(f, t, &x, &k1, dt).unwrap();
    }
    let drift = (energy(&x) - e0).abs() / e0.abs();
    assert!(drift < 1e-6, "relative drift {drift}");
}

#[test]
fn bounds_agree_with_dense_scan() {
    let arm = TwoLinkArm::default();
    let bx = r2_box();
    let est = estimate_bounds(
        &arm,
        &bx,
        BoundsOptions {
            inflation: 1.0,
            ..BoundsOptions::default()
        },
    )
    .unwrap();
    // Regular grid over the position box; C is linear in dq so its ratio peaks on the dq sphere.
    let steps = 400;
    let (mut lo, mut hi, mut g, mut c) = (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..=steps {
        for j in 0..=steps {
            let q = v(&[
                bx.theta_minus[0]
                    + (bx.theta_plus[0] - bx.theta_minus[0]) * i as f64 / steps as f64,
                bx.theta_minus[1]
                    + (bx.theta_plus[1] - bx.theta_minus[1]) * j as f64 / steps as f64,
            ]);
            let eig = arm.mass(&q).symmetric_eigenvalues();
            lo = lo.min(eig.min());
            hi = hi.max(eig.max());
            g = g.max(arm.gravity(&q).norm());
            for a in 0..16 {
                let ang = a as f64 * PI / 8.0;
                let dq = v(&[ang.cos(), ang.sin()]);
                c = c.max(spectral_norm(&arm.coriolis(&q, &dq)));
            }
        }
    }
    let within = |est: f64, exact: f64| (est / exact - 1.0).abs() < 0.05;
    assert!(within(est.m_lower, lo), "{} {lo}", est.m_lower);
    assert!(within(est.m_upper, hi), "{} {hi}", est.m_upper);
    assert!(within(est.g_bar, g), "{} {g}", est.g_bar);
    assert!(within(est.c_bar, c), "{} {c}", est.c_bar);
    assert_relative_eq!(est.f_bar, 0.1, epsilon = 1e-12);
}

#[test]
fn bounds_are_reproducible() {
    let arm = TwoLinkArm::default();
    let a = estimate_bounds(&arm, &r2_box(), BoundsOptions::default()).unwrap();
    let b = estimate_bounds(&arm, &r2_box(), BoundsOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let arm = TwoLinkArm::default();
    let s = JointState::rest(DVector::zeros(2));
    assert!(forward_dynamics(&arm, &s, &DVector::zeros(3), &DVector::zeros(2)).is_err());
}

proptest! {
    #[test]
    fn estimated_bounds_are_ordered(seed in 0u64..1000, samples in 1usize..500, inflation in 1.0f64..2.0) {
        let arm = TwoLinkArm::default();
        let b = estimate_bounds(&arm, &r2_box(), BoundsOptions { samples, seed, inflation }).unwrap();
        prop_assert!(0.0 < b.m_lower && b.m_lower <= b.m_upper);
        prop_assert!(b.minv_lower <= b.minv_upper);
        prop_assert!((b.minv_upper * b.m_lower - 1.0).abs() < 1e-12);
        prop_assert!(b.c_bar >= 0.0 && b.g_bar >= 0.0 && b.f_bar >= 0.0);
    }

    #[test]
    fn sampled_states_respect_estimated_bounds(q1 in -2.0f64..2.0, q2 in -2.0f64..2.0, d1 in -1.0f64..1.0, d2 in -1.0f64..1.0) {
        let arm = TwoLinkArm::default();
        let b = estimate_bounds(&arm, &r2_box(), BoundsOptions::default()).unwrap();
        let (q, dq) = (v(&[q1, q2]), v(&[d1, d2]));
        let eig = arm.mass(&q).symmetric_eigenvalues();
        prop_assert!(eig.min() >= b.m_lower && eig.max() <= b.m_upper);
        prop_assert!(arm.gravity(&q).norm() <= b.g_bar);
        let c: DMatrix<f64> = arm.coriolis(&q, &dq);
        prop_assert!(spectral_norm(&c) <= b.c_bar * dq.norm() + 1e-12);
    }
}
