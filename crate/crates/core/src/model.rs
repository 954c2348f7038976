//! Euler-Lagrange dynamics contract, the built-in two-link arm and norm-bound estimation.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use ptpb_control::{lit, to_f64, GenericConstraintBox as ConstraintBox, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CoreError, Result};

/// Generalized positions and velocities of an n-DOF system.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState<T: Real> {
    pub q: DVector<T>,
    pub dq: DVector<T>,
}

impl<T: Real> JointState<T> {
    pub fn new(q: DVector<T>, dq: DVector<T>) -> Result<Self> {
        if q.is_empty() || q.len() != dq.len() {
            return Err(CoreError::InvalidState(format!(
                "q and dq must share a positive length, got {} and {}",
                q.len(),
                dq.len()
            )));
        }
        if q.iter().chain(dq.iter()).any(|x| !to_f64(*x).is_finite()) {
            return Err(CoreError::InvalidState("non-finite entry".into()));
        }
        Ok(Self { q, dq })
    }

    /// State at rest at `q`.
    pub fn rest(q: DVector<T>) -> Self {
        let n = q.len();
        Self {
            q,
            dq: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Stacked vector `(q, dq)`.
    pub fn stacked(&self) -> DVector<T> {
        let n = self.dim();
        DVector::from_fn(2 * n, |i, _| if i < n { self.q[i] } else { self.dq[i - n] })
    }
}

/// `M(q) ddq + C(q, dq) dq + G(q) + F(dq) + d = u`.
///
/// Implementations must return a symmetric positive definite `mass` inside the state box and
/// a `coriolis` for which `dM/dt - 2C` is skew-symmetric.
pub trait DynamicsProvider<T: Real>: Send + Sync {
    fn dof(&self) -> usize;
    fn mass(&self, q: &DVector<T>) -> DMatrix<T>;
    fn coriolis(&self, q: &DVector<T>, dq: &DVector<T>) -> DMatrix<T>;
    fn gravity(&self, q: &DVector<T>) -> DVector<T>;
    fn friction(&self, dq: &DVector<T>) -> DVector<T>;
}

impl<T: Real, M: DynamicsProvider<T> + ?Sized> DynamicsProvider<T> for &M {
    fn dof(&self) -> usize {
        (**self).dof()
    }
    fn mass(&self, q: &DVector<T>) -> DMatrix<T> {
        (**self).mass(q)
    }
    fn coriolis(&self, q: &DVector<T>, dq: &DVector<T>) -> DMatrix<T> {
        (**self).coriolis(q, dq)
    }
    fn gravity(&self, q: &DVector<T>) -> DVector<T> {
        (**self).gravity(q)
    }
    fn friction(&self, dq: &DVector<T>) -> DVector<T> {
        (**self).friction(dq)
    }
}

/// Solves `M(q) ddq = u - C dq - G - F - d` for `ddq` (Cholesky, LU fallback).
pub fn forward_dynamics<T: Real, M: DynamicsProvider<T> + ?Sized>(
    model: &M,
    state: &JointState<T>,
    u: &DVector<T>,
    d: &DVector<T>,
) -> Result<DVector<T>> {
    let n = model.dof();
    if state.dim() != n || u.len() != n || d.len() != n {
        return Err(CoreError::InvalidArgument(format!(
            "dimension mismatch: model has {n} DOF"
        )));
    }
    let (q, dq) = (&state.q, &state.dq);
    let m = model.mass(q);
    let rhs = u - model.coriolis(q, dq) * dq - model.gravity(q) - model.friction(dq) - d;
    let singular = || CoreError::SingularMass {
        q: q.iter().map(|x| to_f64(*x)).collect(),
    };
    let sol = match m.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => m.lu().solve(&rhs).ok_or_else(singular)?,
    };
    if sol.iter().any(|x| !to_f64(*x).is_finite()) {
        return Err(singular());
    }
    Ok(sol)
}

/// Physical parameters of a planar two-link arm with viscous joint friction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmParams<T> {
    pub m1: T,
    pub m2: T,
    pub l1: T,
    pub l2: T,
    /// Distance from each joint to the link's centre of mass.
    pub lc1: T,
    pub lc2: T,
    /// Link inertias about their centres of mass.
    pub i1: T,
    pub i2: T,
    pub g: T,
    /// Viscous friction coefficients.
    pub b1: T,
    pub b2: T,
}

impl<T: Real> Default for ArmParams<T> {
    /// Unit masses and lengths, mid-link centres of mass, rod inertias, 0.1 N m s friction.
    fn default() -> Self {
        let (m, l) = (T::one(), T::one());
        let i = m * l * l / lit(12.0);
        Self {
            m1: m,
            m2: m,
            l1: l,
            l2: l,
            lc1: l / lit(2.0),
            lc2: l / lit(2.0),
            i1: i,
            i2: i,
            g: lit(9.81),
            b1: lit(0.1),
            b2: lit(0.1),
        }
    }
}

/// Planar two-link arm in a vertical plane, angles measured from the downward vertical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLinkArm<T> {
    pub params: ArmParams<T>,
}

impl<T: Real> TwoLinkArm<T> {
    pub fn new(params: ArmParams<T>) -> Result<Self> {
        let p = &params;
        let positive = [p.m1, p.m2, p.l1, p.l2, p.i1, p.i2];
        if positive.iter().any(|x| !(*x > T::zero())) {
            return Err(CoreError::InvalidArgument(
                "masses, lengths and inertias must be positive".into(),
            ));
        }
        let nonneg = [p.lc1, p.lc2, p.g, p.b1, p.b2];
        if nonneg.iter().any(|x| *x < T::zero()) {
            return Err(CoreError::InvalidArgument(
                "com offsets, gravity and friction must be non-negative".into(),
            ));
        }
        Ok(Self { params })
    }

    /// Kinetic energy `dq' M(q) dq / 2`.
    pub fn kinetic_energy(&self, s: &JointState<T>) -> T {
        (s.dq.transpose() * self.mass(&s.q) * &s.dq)[0] * lit(0.5)
    }

    /// Gravitational potential, zero with both links horizontal.
    pub fn potential_energy(&self, q: &DVector<T>) -> T {
        let p = &self.params;
        -(p.m1 * p.lc1 + p.m2 * p.l1) * p.g * q[0].cos() - p.m2 * p.lc2 * p.g * (q[0] + q[1]).cos()
    }
}

impl<T: Real> Default for TwoLinkArm<T> {
    fn default() -> Self {
        Self {
            params: ArmParams::default(),
        }
    }
}

impl<T: Real> DynamicsProvider<T> for TwoLinkArm<T> {
    fn dof(&self) -> usize {
        2
    }

    fn mass(&self, q: &DVector<T>) -> DMatrix<T> {
        let p = &self.params;
        let c2 = q[1].cos();
        let two = lit::<T>(2.0);
        let m11 = p.m1 * p.lc1 * p.lc1
            + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + two * p.l1 * p.lc2 * c2)
            + p.i1
            + p.i2;
        let m12 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * c2) + p.i2;
        let m22 = p.m2 * p.lc2 * p.lc2 + p.i2;
        DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22])
    }

    fn coriolis(&self, q: &DVector<T>, dq: &DVector<T>) -> DMatrix<T> {
        let p = &self.params;
        let h = p.m2 * p.l1 * p.lc2 * q[1].sin();
        DMatrix::from_row_slice(
            2,
            2,
            &[-h * dq[1], -h * (dq[0] + dq[1]), h * dq[0], T::zero()],
        )
    }

    fn gravity(&self, q: &DVector<T>) -> DVector<T> {
        let p = &self.params;
        let s12 = (q[0] + q[1]).sin();
        DVector::from_column_slice(&[
            (p.m1 * p.lc1 + p.m2 * p.l1) * p.g * q[0].sin() + p.m2 * p.lc2 * p.g * s12,
            p.m2 * p.lc2 * p.g * s12,
        ])
    }

    fn friction(&self, dq: &DVector<T>) -> DVector<T> {
        DVector::from_column_slice(&[self.params.b1 * dq[0], self.params.b2 * dq[1]])
    }
}

/// Per-evaluator call counts of a [`CountingModel`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ModelCallCounts {
    pub mass: usize,
    pub coriolis: usize,
    pub gravity: usize,
    pub friction: usize,
}

/// Wraps a model and counts every evaluation.
#[derive(Debug, Default)]
pub struct CountingModel<M> {
    inner: M,
    mass: AtomicUsize,
    coriolis: AtomicUsize,
    gravity: AtomicUsize,
    friction: AtomicUsize,
}

impl<M> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            mass: AtomicUsize::new(0),
            coriolis: AtomicUsize::new(0),
            gravity: AtomicUsize::new(0),
            friction: AtomicUsize::new(0),
        }
    }

    pub fn counts(&self) -> ModelCallCounts {
        ModelCallCounts {
            mass: self.mass.load(Ordering::Relaxed),
            coriolis: self.coriolis.load(Ordering::Relaxed),
            gravity: self.gravity.load(Ordering::Relaxed),
            friction: self.friction.load(Ordering::Relaxed),
        }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<T: Real, M: DynamicsProvider<T>> DynamicsProvider<T> for CountingModel<M> {
    fn dof(&self) -> usize {
        self.inner.dof()
    }
    fn mass(&self, q: &DVector<T>) -> DMatrix<T> {
        self.mass.fetch_add(1, Ordering::Relaxed);
        self.inner.mass(q)
    }
    fn coriolis(&self, q: &DVector<T>, dq: &DVector<T>) -> DMatrix<T> {
        self.coriolis.fetch_add(1, Ordering::Relaxed);
        self.inner.coriolis(q, dq)
    }
    fn gravity(&self, q: &DVector<T>) -> DVector<T> {
        self.gravity.fetch_add(1, Ordering::Relaxed);
        self.inner.gravity(q)
    }
    fn friction(&self, dq: &DVector<T>) -> DVector<T> {
        self.friction.fetch_add(1, Ordering::Relaxed);
        self.inner.friction(dq)
    }
}

/// Spectral norm: singular values for `n <= 3`, power iteration on `A'A` above.
pub fn spectral_norm<T: Real>(a: &DMatrix<T>) -> T {
    if a.nrows() == 0 || a.ncols() == 0 {
        return T::zero();
    }
    if a.nrows().max(a.ncols()) <= 3 {
        return a.clone().singular_values().max();
    }
    let ata = a.transpose() * a;
    // irregular start vector, unlikely to be orthogonal to the dominant direction
    let mut v = DVector::from_fn(a.ncols(), |i, _| {
        lit::<T>(1.0 + (i as f64 * 0.618_034).fract())
    })
    .normalize();
    let mut lambda = T::zero();
    let tol = lit::<T>(1e-13);
    for _ in 0..500 {
        let w = &ata * &v;
        let nw = w.norm();
        if nw == T::zero() {
            return T::zero();
        }
        let next = v.dot(&w);
        v = w / nw;
        if (next - lambda).abs() <= tol * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(T::zero()).sqrt()
}

/// Eigenvalue and norm bounds of a model over a state box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelBounds<T> {
    pub m_lower: T,
    pub m_upper: T,
    pub minv_lower: T,
    pub minv_upper: T,
    pub c_bar: T,
    pub g_bar: T,
    pub f_bar: T,
}

/// Sampling options for [`estimate_bounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsOptions {
    pub samples: usize,
    pub seed: u64,
    /// Upper bounds are multiplied and lower bounds divided by this factor.
    pub inflation: f64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            samples: 20_000,
            seed: 0,
            inflation: 1.1,
        }
    }
}

/// Raw extrema accumulated over sampled states.
#[derive(Debug, Clone, Copy)]
struct Extrema<T> {
    m_lo: T,
    m_hi: T,
    c: T,
    g: T,
    f: T,
}

impl<T: Real> Extrema<T> {
    fn new() -> Self {
        Self {
            m_lo: lit(f64::INFINITY),
            m_hi: T::zero(),
            c: T::zero(),
            g: T::zero(),
            f: T::zero(),
        }
    }

    fn visit<M: DynamicsProvider<T> + ?Sized>(
        &mut self,
        model: &M,
        q: &DVector<T>,
        dq: &DVector<T>,
    ) {
        let eig = model.mass(q).symmetric_eigenvalues();
        self.m_lo = self.m_lo.min(eig.min());
        self.m_hi = self.m_hi.max(eig.max());
        self.g = self.g.max(model.gravity(q).norm());
        let ndq = dq.norm();
        if ndq > T::zero() {
            self.c = self.c.max(spectral_norm(&model.coriolis(q, dq)) / ndq);
            self.f = self.f.max(model.friction(dq).norm() / ndq);
        }
    }
}

/// Estimates [`ModelBounds`] by sampling box vertices plus seeded uniform states.
pub fn estimate_bounds<T: Real, M: DynamicsProvider<T> + ?Sized>(
    model: &M,
    bx: &ConstraintBox<T>,
    opts: BoundsOptions,
) -> Result<ModelBounds<T>> {
    bx.validate()?;
    if opts.samples == 0 {
        return Err(CoreError::InvalidArgument(
            "samples must be at least 1".into(),
        ));
    }
    if !(opts.inflation >= 1.0) {
        return Err(CoreError::InvalidArgument("inflation must be >= 1".into()));
    }
    let n = bx.dim();
    if model.dof() != n {
        return Err(CoreError::InvalidArgument(format!(
            "model has {} DOF, box has {n}",
            model.dof()
        )));
    }
    let mut ext = Extrema::new();
    if n <= 4 {
        // every vertex of the (q, dq) box
        let lo = JointState {
            q: bx.theta_minus.clone(),
            dq: bx.nu_minus.clone(),
        }
        .stacked();
        let hi = JointState {
            q: bx.theta_plus.clone(),
            dq: bx.nu_plus.clone(),
        }
        .stacked();
        for mask in 0..(1usize << (2 * n)) {
            let x = DVector::from_fn(2 * n, |i, _| if mask >> i & 1 == 1 { hi[i] } else { lo[i] });
            let q = x.rows(0, n).into_owned();
            let dq = x.rows(n, n).into_owned();
            ext.visit(model, &q, &dq);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let uniform = |rng: &mut ChaCha8Rng, lo: &DVector<T>, hi: &DVector<T>| {
        DVector::from_fn(n, |i, _| {
            let s: f64 = rng.random();
            lo[i] + (hi[i] - lo[i]) * lit::<T>(s)
        })
    };
    for _ in 0..opts.samples {
        let q = uniform(&mut rng, &bx.theta_minus, &bx.theta_plus);
        let dq = uniform(&mut rng, &bx.nu_minus, &bx.nu_plus);
        ext.visit(model, &q, &dq);
    }
    if !(ext.m_lo > T::zero()) {
        return Err(CoreError::InvalidArgument(
            "mass matrix not positive definite over the box".into(),
        ));
    }
    let k = lit::<T>(opts.inflation);
    Ok(ModelBounds {
        m_lower: ext.m_lo / k,
        m_upper: ext.m_hi * k,
        minv_lower: T::one() / (ext.m_hi * k),
        minv_upper: k / ext.m_lo,
        c_bar: ext.c * k,
        g_bar: ext.g * k,
        f_bar: ext.f * k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    struct ConstMass;

    impl DynamicsProvider<f64> for ConstMass {
        fn dof(&self) -> usize {
            2
        }
        fn mass(&self, _q: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_diagonal(&v(&[2.0, 3.0]))
        }
        fn coriolis(&self, _q: &DVector<f64>, _dq: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::zeros(2, 2)
        }
        fn gravity(&self, _q: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(2)
        }
        fn friction(&self, dq: &DVector<f64>) -> DVector<f64> {
            dq * 0.5
        }
    }

    #[test]
    fn joint_state_validation() {
        assert!(JointState::new(v(&[0.0]), v(&[0.0, 0.0])).is_err());
        assert!(JointState::new(v(&[]), v(&[])).is_err());
        assert!(JointState::new(v(&[f64::NAN]), v(&[0.0])).is_err());
        assert_eq!(
            JointState::new(v(&[1.0]), v(&[2.0])).unwrap().stacked(),
            v(&[1.0, 2.0])
        );
    }

    #[test]
    fn gravity_compensation_at_rest() {
        let arm = TwoLinkArm::default();
        for q in [v(&[0.0, 0.0]), v(&[0.7, -1.2])] {
            let s = JointState::rest(q.clone());
            let acc = forward_dynamics(&arm, &s, &arm.gravity(&q), &DVector::zeros(2)).unwrap();
            assert!(acc.norm() < 1e-12);
        }
    }

    #[test]
    fn input_cancelling_disturbance_leaves_gravity_only() {
        let arm = TwoLinkArm::default();
        let q = v(&[0.4, 0.9]);
        let s = JointState::rest(q.clone());
        let d = v(&[1.5, -0.5]);
        let acc = forward_dynamics(&arm, &s, &d, &d).unwrap();
        let expected = -arm.mass(&q).try_inverse().unwrap() * arm.gravity(&q);
        assert_relative_eq!(acc, expected, epsilon = 1e-12);
    }

    #[test]
    fn mass_is_symmetric_positive_definite() {
        let arm = TwoLinkArm::default();
        for i in 0..50 {
            let q = v(&[0.1 * f64::from(i), -0.13 * f64::from(i)]);
            let m = arm.mass(&q);
            assert_eq!(m[(0, 1)], m[(1, 0)]);
            assert!(m.symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn constant_mass_bounds() {
        let bx = ConstraintBox::symmetric(2, 1.0, 1.0, 1.0).unwrap();
        let b = estimate_bounds(
            &ConstMass,
            &bx,
            BoundsOptions {
                samples: 100,
                seed: 3,
                inflation: 1.0,
            },
        )
        .unwrap();
        assert_relative_eq!(b.m_lower, 2.0);
        assert_relative_eq!(b.m_upper, 3.0);
        assert_relative_eq!(b.minv_lower, 1.0 / 3.0);
        assert_relative_eq!(b.minv_upper, 0.5);
        assert_eq!(b.g_bar, 0.0);
        assert_eq!(b.c_bar, 0.0);
        assert_relative_eq!(b.f_bar, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn inflation_widens_bounds() {
        let bx = ConstraintBox::symmetric(2, 1.0, 1.0, 1.0).unwrap();
        let opts = BoundsOptions {
            samples: 10,
            seed: 0,
            inflation: 1.1,
        };
        let b = estimate_bounds(&ConstMass, &bx, opts).unwrap();
        assert_relative_eq!(b.m_lower, 2.0 / 1.1);
        assert_relative_eq!(b.m_upper, 3.3);
    }

    #[test]
    fn estimate_rejects_bad_options() {
        let bx = ConstraintBox::symmetric(2, 1.0, 1.0, 1.0).unwrap();
        let opts = BoundsOptions {
            samples: 0,
            ..Default::default()
        };
        assert!(estimate_bounds(&ConstMass, &bx, opts).is_err());
        let mut bad = bx.clone();
        bad.theta_minus[0] = 2.0;
        assert!(estimate_bounds(&ConstMass, &bad, BoundsOptions::default()).is_err());
    }

    #[test]
    fn spectral_norm_agrees_between_methods() {
        let a = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.7);
        let svd = a.clone().singular_values().max();
        assert_relative_eq!(spectral_norm(&a), svd, max_relative = 1e-9);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 1.0, 0.0]);
        assert_relative_eq!(spectral_norm(&b), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn counting_model_counts() {
        let m = CountingModel::new(TwoLinkArm::<f64>::default());
        let s = JointState::rest(v(&[0.1, 0.2]));
        forward_dynamics(&m, &s, &DVector::zeros(2), &DVector::zeros(2)).unwrap();
        assert_eq!(
            m.counts(),
            ModelCallCounts {
                mass: 1,
                coriolis: 1,
                gravity: 1,
                friction: 1
            }
        );
    }
}
