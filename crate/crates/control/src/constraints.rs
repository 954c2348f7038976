use nalgebra::DVector;

use crate::error::{check_dim, ControlError, Result};
use crate::scalar::{to_f64, Real};

/// Box bounds on joint positions, joint velocities and joint torques.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBox<T: Real> {
    pub theta_minus: DVector<T>,
    pub theta_plus: DVector<T>,
    pub nu_minus: DVector<T>,
    pub nu_plus: DVector<T>,
    pub u_minus: DVector<T>,
    pub u_plus: DVector<T>,
}

impl<T: Real> ConstraintBox<T> {
    /// Builds a box and checks its invariants.
    pub fn new(
        theta: (DVector<T>, DVector<T>),
        nu: (DVector<T>, DVector<T>),
        u: (DVector<T>, DVector<T>),
    ) -> Result<Self> {
        let bx = Self {
            theta_minus: theta.0,
            theta_plus: theta.1,
            nu_minus: nu.0,
            nu_plus: nu.1,
            u_minus: u.0,
            u_plus: u.1,
        };
        bx.validate()?;
        Ok(bx)
    }

    /// Symmetric box `[-theta, theta] x [-nu, nu] x [-u, u]` on every joint.
    pub fn symmetric(n: usize, theta: T, nu: T, u: T) -> Result<Self> {
        Self::new(
            (
                DVector::from_element(n, -theta),
                DVector::from_element(n, theta),
            ),
            (DVector::from_element(n, -nu), DVector::from_element(n, nu)),
            (DVector::from_element(n, -u), DVector::from_element(n, u)),
        )
    }

    pub fn dim(&self) -> usize {
        self.theta_minus.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.theta_minus.len();
        if n == 0 {
            return Err(ControlError::InvalidBox("zero degrees of freedom".into()));
        }
        for v in [
            &self.theta_plus,
            &self.nu_minus,
            &self.nu_plus,
            &self.u_minus,
            &self.u_plus,
        ] {
            check_dim(n, v.len())?;
        }
        for i in 0..n {
            let finite = [
                self.theta_minus[i],
                self.theta_plus[i],
                self.nu_minus[i],
                self.nu_plus[i],
                self.u_minus[i],
                self.u_plus[i],
            ]
            .iter()
            .all(|x| to_f64(*x).is_finite());
            if !finite {
                return Err(ControlError::InvalidBox(format!(
                    "non-finite bound at joint {i}"
                )));
            }
            if self.theta_minus[i] >= self.theta_plus[i] {
                return Err(ControlError::InvalidBox(format!(
                    "theta- must be below theta+ at joint {i}"
                )));
            }
            if self.nu_minus[i] >= self.nu_plus[i] {
                return Err(ControlError::InvalidBox(format!(
                    "nu- must be below nu+ at joint {i}"
                )));
            }
            if !(self.u_minus[i] < T::zero() && self.u_plus[i] > T::zero()) {
                return Err(ControlError::InvalidBox(format!(
                    "input box must satisfy u- < 0 < u+ at joint {i}"
                )));
            }
        }
        Ok(())
    }

    pub fn contains_position(&self, q: &DVector<T>) -> bool {
        q.len() == self.dim()
            && q.iter()
                .zip(self.theta_minus.iter().zip(self.theta_plus.iter()))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub fn contains_velocity(&self, dq: &DVector<T>) -> bool {
        dq.len() == self.dim()
            && dq
                .iter()
                .zip(self.nu_minus.iter().zip(self.nu_plus.iter()))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub fn contains_input(&self, u: &DVector<T>) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.u_minus.iter().zip(self.u_plus.iter()))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    /// Strict interior test on positions and velocities.
    pub fn strictly_contains_state(&self, q: &DVector<T>, dq: &DVector<T>) -> bool {
        let n = self.dim();
        q.len() == n
            && dq.len() == n
            && (0..n).all(|i| {
                self.theta_minus[i] < q[i]
                    && q[i] < self.theta_plus[i]
                    && self.nu_minus[i] < dq[i]
                    && dq[i] < self.nu_plus[i]
            })
    }

    /// Input budget `u* = min(|u-|, |u+|)`.
    pub fn u_star(&self) -> T {
        self.u_minus.norm().min(self.u_plus.norm())
    }

    /// Scalar velocity bound used by the feasibility calculus, `|nu+|`.
    pub fn nu_plus_norm(&self) -> T {
        self.nu_plus.norm()
    }

    /// Widest position interval, `|theta+ - theta-|_inf`.
    pub fn theta_span_inf(&self) -> T {
        (&self.theta_plus - &self.theta_minus).amax()
    }

    /// Lower bound on the dynamic-bound slope `kappa`: `max_i (nu+_i - nu-_i) / (theta+_i - theta-_i)`.
    pub fn kappa_lower_bound(&self) -> T {
        (0..self.dim())
            .map(|i| {
                (self.nu_plus[i] - self.nu_minus[i]) / (self.theta_plus[i] - self.theta_minus[i])
            })
            .fold(T::zero(), |a, b| a.max(b))
    }
}
