//! Time-based generator: quintic settling polynomials and the shaped error references.

use nalgebra::DVector;

use crate::error::{check_dim, ControlError, Result};
use crate::scalar::{lit, to_f64, Real};

/// Generator constants `(k1, k2, k3, k4)`.
pub fn k_constants<T: Real>() -> [T; 4] {
    let s3: T = lit::<T>(3.0).sqrt();
    let s19: T = lit::<T>(19.0).sqrt();
    [
        lit(2.0),
        lit(15.0 / 8.0),
        lit::<T>(10.0) * s3 / lit(3.0),
        (lit::<T>(152.0) * s19 + lit(224.0)) / lit(225.0),
    ]
}

/// `h1`, `h2` and their first two time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbgValues<T> {
    pub h1: T,
    pub h2: T,
    pub dh1: T,
    pub dh2: T,
    pub ddh1: T,
    pub ddh2: T,
}

impl<T: Real> TbgValues<T> {
    fn zero() -> Self {
        Self {
            h1: T::zero(),
            h2: T::zero(),
            dh1: T::zero(),
            dh2: T::zero(),
            ddh1: T::zero(),
            ddh2: T::zero(),
        }
    }
}

/// Shaped error references `e^d`, `de^d`, `dde^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRefs<T: Real> {
    pub e: DVector<T>,
    pub de: DVector<T>,
    pub dde: DVector<T>,
}

/// Closed-form suprema of the shaped references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbgBounds<T> {
    pub e_bar: T,
    pub ed_bar: T,
    pub edd_bar: T,
    pub k1: T,
    pub k2: T,
    pub k3: T,
    pub k4: T,
}

/// A generator anchored at `t0` with horizon `horizon` and initial error `(e0, ed0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TbgProfile<T: Real> {
    t0: T,
    horizon: T,
    e0: DVector<T>,
    ed0: DVector<T>,
}

impl<T: Real> TbgProfile<T> {
    pub fn new(t0: T, horizon: T, e0: DVector<T>, ed0: DVector<T>) -> Result<Self> {
        if !(horizon > T::zero()) || !to_f64(horizon).is_finite() {
            return Err(ControlError::InvalidArgument(format!(
                "prescribed time must be positive, got {}",
                to_f64(horizon)
            )));
        }
        check_dim(e0.len(), ed0.len())?;
        Ok(Self {
            t0,
            horizon,
            e0,
            ed0,
        })
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    /// Prescribed time `T`.
    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// `t0 + T`.
    pub fn settle_time(&self) -> T {
        self.t0 + self.horizon
    }

    pub fn e0(&self) -> &DVector<T> {
        &self.e0
    }

    pub fn ed0(&self) -> &DVector<T> {
        &self.ed0
    }

    pub fn dim(&self) -> usize {
        self.e0.len()
    }

    /// Evaluates the generator polynomials; identically zero from `t0 + T` on.
    pub fn eval_h(&self, t: T) -> Result<TbgValues<T>> {
        let s = t - self.t0;
        if s < T::zero() {
            return Err(ControlError::InvalidArgument(format!(
                "generator evaluated before t0: t - t0 = {}",
                to_f64(s)
            )));
        }
        if s >= self.horizon {
            return Ok(TbgValues::zero());
        }
        let tt = self.horizon;
        let u = s / tt;
        let (u2, u3) = (u * u, u * u * u);
        let (u4, u5) = (u3 * u, u3 * u2);
        let c = |x: f64| lit::<T>(x);
        Ok(TbgValues {
            h1: c(-6.0) * u5 + c(15.0) * u4 - c(10.0) * u3 + T::one(),
            dh1: (c(-30.0) * u4 + c(60.0) * u3 - c(30.0) * u2) / tt,
            ddh1: (c(-120.0) * u3 + c(180.0) * u2 - c(60.0) * u) / (tt * tt),
            h2: tt * (c(-3.0) * u5 + c(8.0) * u4 - c(6.0) * u3 + u),
            dh2: c(-15.0) * u4 + c(32.0) * u3 - c(18.0) * u2 + T::one(),
            ddh2: (c(-60.0) * u3 + c(96.0) * u2 - c(36.0) * u) / tt,
        })
    }

    /// `e^d = h1 e0 + h2 ed0` and its first two derivatives.
    pub fn error_refs(&self, t: T) -> Result<ErrorRefs<T>> {
        let h = self.eval_h(t)?;
        Ok(ErrorRefs {
            e: &self.e0 * h.h1 + &self.ed0 * h.h2,
            de: &self.e0 * h.dh1 + &self.ed0 * h.dh2,
            dde: &self.e0 * h.ddh1 + &self.ed0 * h.ddh2,
        })
    }

    /// Closed-form bounds on the reference norms.
    pub fn bounds(&self) -> TbgBounds<T> {
        let [k1, k2, k3, k4] = k_constants::<T>();
        let tt = self.horizon;
        let a = self.e0.norm();
        let b = self.ed0.norm();
        TbgBounds {
            e_bar: a + k1 / tt * b,
            ed_bar: k2 / tt * a + b,
            edd_bar: k3 / (tt * tt) * a + k4 / tt * b,
            k1,
            k2,
            k3,
            k4,
        }
    }
}
