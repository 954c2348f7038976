use nalgebra::DVector;
use proptest::prelude::*;
use ptpb_core::presets::r2_box;
use ptpb_core::{
    estimate_bounds, monte_carlo_region, t_star, BoundsOptions, FeasibilityProblem, JointState,
    ModelBounds, Region, TwoLinkArm,
};

fn bounds() -> ModelBounds {
    estimate_bounds(
        &TwoLinkArm::default(),
        &r2_box(),
        BoundsOptions {
            samples: 2000,
            ..BoundsOptions::default()
        },
    )
    .unwrap()
}

fn problem(horizon: f64) -> FeasibilityProblem {
    FeasibilityProblem::new(bounds(), r2_box(), horizon, DVector::zeros(2)).unwrap()
}

#[test]
fn sigma_range_is_nonempty_for_the_arm() {
    let (lo, hi) = problem(2.0).sigma_bounds().unwrap();
    assert!(0.0 < lo && lo < hi, "{lo} {hi}");
}

#[test]
fn sigma_outside_range_is_rejected() {
    let p = problem(2.0);
    let (lo, hi) = p.sigma_bounds().unwrap();
    let s = JointState::rest(DVector::zeros(2));
    assert!(p.viable_membership(0.5 * lo, &s).is_err());
    assert!(p.viable_membership(2.0 * hi, &s).is_err());
    assert!(p.viable_membership(0.5 * (lo + hi), &s).unwrap());
}

#[test]
fn report_is_consistent() {
    let p = problem(2.7);
    let r = p
        .report(None, &Region::StateBox { rest: true }, 0.1)
        .unwrap();
    assert!((r.sigma - 0.5 * (r.sigma_lower + r.sigma_upper)).abs() < 1e-12);
    assert!(r.nonempty && r.viable_radius > 0.0);
    assert!(r.d_bar >= 0.0);
    assert!((r.d_bar - (r.u_star - r.u_min).max(0.0)).abs() < 1e-12);
    assert!(r.u_min >= r.eta);
    assert_eq!(r.t_star, 0.1);
}

#[test]
fn t_star_scales_with_distance() {
    let b = bounds();
    let bx = r2_box();
    let xr = DVector::zeros(4);
    let near = JointState::rest(DVector::from_element(2, 0.1));
    let far = JointState::rest(DVector::from_element(2, 0.2));
    let a = t_star(&b, &bx, 0.0, &xr, std::slice::from_ref(&near)).unwrap();
    let c = t_star(&b, &bx, 0.0, &xr, &[near.clone(), far]).unwrap();
    assert!((c / a - 2.0).abs() < 1e-12);
    assert_eq!(t_star(&b, &bx, 1.0, &xr, &[near]).unwrap(), 0.0);
    assert!(t_star(&b, &bx, 0.0, &DVector::zeros(2), &[]).is_err());
}

#[test]
fn monte_carlo_ignores_thread_count() {
    let p = problem(2.7);
    let (lo, hi) = p.sigma_bounds().unwrap();
    let s = 0.5 * (lo + hi);
    let pred = |x: &JointState| p.member_unchecked(s, x);
    let a = monte_carlo_region(pred, &p.bx, 5000, 3).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let b = pool.install(|| monte_carlo_region(pred, &p.bx, 5000, 3).unwrap());
    assert_eq!(a, b);
    assert!(a.accepted.iter().all(pred));
    assert!((a.ratio - a.accepted.len() as f64 / 5000.0).abs() < 1e-15);
}

proptest! {
    #[test]
    fn radius_grows_with_horizon(t1 in 0.2f64..6.0, dt in 0.0f64..3.0) {
        let (a, b) = (problem(t1), problem(t1 + dt));
        let (lo, hi) = a.sigma_bounds().unwrap();
        let s = 0.5 * (lo + hi);
        prop_assert_eq!(a.eta(s), b.eta(s));
        prop_assert!(b.viable_radius(s) >= a.viable_radius(s));
    }

    #[test]
    fn radius_grows_with_authority(u in 22.0f64..40.0, du in 0.0f64..10.0) {
        let p = problem(2.0);
        let (lo, hi) = p.clone().with_u_star(u).sigma_bounds().unwrap();
        prop_assume!(lo < hi);
        let s = lo + 0.01 * (hi - lo);
        let a = p.clone().with_u_star(u).viable_radius(s);
        let b = p.with_u_star(u + du).viable_radius(s);
        prop_assert!(b >= a);
    }

    #[test]
    fn rest_states_near_the_target_are_viable(x in -0.05f64..0.05, y in -0.05f64..0.05) {
        let p = problem(2.0);
        let (lo, hi) = p.sigma_bounds().unwrap();
        prop_assert!(p.viable_membership(0.5 * (lo + hi), &JointState::rest(DVector::from_column_slice(&[x, y]))).unwrap());
    }
}
