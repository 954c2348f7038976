use nalgebra::DVector;

use crate::constraints::ConstraintBox;
use crate::error::{check_dim, ControlError, Result};
use crate::scalar::{to_f64, Real};

/// Spectral norm of `D = [-I; I]`.
pub fn d_norm<T: Real>() -> T {
    T::SQRT_2()
}

/// Controller gains and the state-constraint safety margin.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet<T: Real> {
    /// Diagonal of `Kp`.
    pub kp: DVector<T>,
    pub rho: T,
    pub varpi: T,
    pub gamma: T,
    pub alpha: T,
    pub kappa: T,
    /// Safety margin `c`; defaults to `varpi`.
    pub c: T,
}

impl<T: Real> GainSet<T> {
    pub fn new(kp: DVector<T>, rho: T, varpi: T, gamma: T, alpha: T, kappa: T) -> Self {
        Self {
            kp,
            rho,
            varpi,
            gamma,
            alpha,
            kappa,
            c: varpi,
        }
    }

    pub fn with_margin(mut self, c: T) -> Self {
        self.c = c;
        self
    }

    pub fn kp_min(&self) -> T {
        self.kp.min()
    }

    pub fn kp_max(&self) -> T {
        self.kp.max()
    }

    /// Prescribed tracking bound `varpi / Kp_min`.
    pub fn error_bound(&self) -> T {
        self.varpi / self.kp_min()
    }

    /// Prescribed rate bound `varpi (1 + Kp_max / Kp_min)`.
    pub fn rate_bound(&self) -> T {
        self.varpi * (T::one() + self.kp_max() / self.kp_min())
    }

    /// Bound on `|xi|`, `alpha |D| varpi`.
    pub fn xi_bound(&self) -> T {
        self.alpha * d_norm::<T>() * self.varpi
    }

    /// Bound on the barrier gain once `|chi| <= a varpi` is known, `rho a / (1 - a)`.
    pub fn gain_bound(&self, a: T) -> T {
        self.rho * a / (T::one() - a)
    }

    /// Checks positivity, `alpha |D| <= 1` and the lower bound on `kappa` for `bx`.
    pub fn validate(&self, bx: &ConstraintBox<T>) -> Result<()> {
        check_dim(bx.dim(), self.kp.len())?;
        let bad = |msg: String| Err(ControlError::InvalidGains(msg));
        if self
            .kp
            .iter()
            .any(|k| *k <= T::zero() || !to_f64(*k).is_finite())
        {
            return bad("every Kp entry must be positive and finite".into());
        }
        for (name, x) in [
            ("rho", self.rho),
            ("varpi", self.varpi),
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("kappa", self.kappa),
        ] {
            if x <= T::zero() || !to_f64(x).is_finite() {
                return bad(format!(
                    "{name} must be positive and finite, got {}",
                    to_f64(x)
                ));
            }
        }
        if self.c < T::zero() || !to_f64(self.c).is_finite() {
            return bad(format!(
                "safety margin c must be non-negative, got {}",
                to_f64(self.c)
            ));
        }
        if self.alpha * d_norm::<T>() > T::one() {
            return bad(format!(
                "alpha |D| <= 1 violated: alpha = {} exceeds 1/sqrt(2)",
                to_f64(self.alpha)
            ));
        }
        let kmin = bx.kappa_lower_bound();
        if self.kappa <= kmin {
            return bad(format!(
                "kappa > max_i (nu+_i - nu-_i)/(theta+_i - theta-_i) violated: kappa = {} <= {}",
                to_f64(self.kappa),
                to_f64(kmin)
            ));
        }
        Ok(())
    }
}
