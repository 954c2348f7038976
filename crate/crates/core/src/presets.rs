//! Ready-made two-link arm experiment: constraint box, gains and the sinusoid scenario.

use nalgebra::DVector;
use ptpb_control::{lit, GenericConstraintBox as ConstraintBox, GenericGainSet as GainSet, Real};

use crate::model::JointState;
use crate::sim::{
    ControlHold, DisturbanceSpec, IntegrationMode, NoiseSpec, ReferenceSpec, Scenario,
};

/// `theta = +-2pi/3`, `nu = +-pi/3`, `u = +-25`.
pub fn r2_box<T: Real>() -> ConstraintBox<T> {
    let pi = T::PI();
    ConstraintBox::symmetric(2, pi * lit(2.0 / 3.0), pi / lit(3.0), lit(25.0))
        .expect("preset box is valid")
}

/// High-gain set: `Kp = diag(2400, 1000)`, `rho = 8`, `varpi = 2`, `gamma = 1`, `alpha = 0.4`,
/// `kappa = 1`, margin `c = 0.5`.
pub fn r2_gains<T: Real>() -> GainSet<T> {
    GainSet::new(
        DVector::from_column_slice(&[lit(2400.0), lit(1000.0)]),
        lit(8.0),
        lit(2.0),
        T::one(),
        lit(0.4),
        T::one(),
    )
    .with_margin(lit(0.5))
}

/// Reduced gains for noisy measurements: `Kp = diag(60, 18)`, `varpi = 5`, others as [`r2_gains`].
pub fn r2_reduced_gains<T: Real>() -> GainSet<T> {
    GainSet::new(
        DVector::from_column_slice(&[lit(60.0), lit(18.0)]),
        lit(8.0),
        lit(5.0),
        T::one(),
        lit(0.4),
        T::one(),
    )
    .with_margin(lit(0.5))
}

/// `q_r = (0.3 sin t, 0.3 cos t)`.
pub fn r2_sinusoid_reference<T: Real>() -> ReferenceSpec<T> {
    ReferenceSpec::Sinusoid {
        offset: DVector::zeros(2),
        amplitude: DVector::from_element(2, lit(0.3)),
        frequency: DVector::from_element(2, T::one()),
        phase: DVector::from_column_slice(&[T::zero(), T::FRAC_PI_2()]),
    }
}

/// Sinusoid tracking from a 30 degree offset at rest, `T = 2`, 10 s at `dt = 1e-3`.
pub fn r2_sinusoid_scenario<T: Real>() -> Scenario<T> {
    let reference = r2_sinusoid_reference::<T>();
    let offset = lit::<T>(30f64.to_radians());
    let q0 = reference.at(T::zero()).q.add_scalar(offset);
    Scenario {
        bx: r2_box(),
        gains: r2_gains(),
        t0: T::zero(),
        horizon: lit(2.0),
        duration: lit(10.0),
        dt: lit(1e-3),
        reference,
        disturbance: DisturbanceSpec::None,
        noise: NoiseSpec::None,
        initial: JointState::rest(q0),
        mode: IntegrationMode::Xi,
        hold: ControlHold::Continuous,
        record_every: 1,
    }
}

/// Regulation to `q_star` from `initial`, otherwise as [`r2_sinusoid_scenario`].
pub fn r2_setpoint_scenario<T: Real>(q_star: DVector<T>, initial: JointState<T>) -> Scenario<T> {
    Scenario {
        reference: ReferenceSpec::SetPoint(q_star),
        initial,
        ..r2_sinusoid_scenario()
    }
}
