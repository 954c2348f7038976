//! The adaptive barrier control policy and the input saturation transform.

use nalgebra::DVector;

use crate::constraints::ConstraintBox;
use crate::error::{check_dim, ControlError, Result};
use crate::gains::{d_norm, GainSet};
use crate::scalar::{lit, to_f64, Real};

/// Below this norm of `chi` the command is the continuous extension `tau = 0`.
pub const CHI_ZERO: f64 = 1e-12;

/// Result of one evaluation of the control law.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput<T: Real> {
    /// Unconstrained command.
    pub tau: DVector<T>,
    /// Applied, saturated input.
    pub u: DVector<T>,
    /// Barrier gain `K`.
    pub k: T,
    /// `Gamma(eps, epsdot)`.
    pub gamma: T,
}

/// `Gamma = 4 max{1, |eps|, |epsdot|, |eps| |epsdot|}`.
pub fn gamma_fn<T: Real>(eps: &DVector<T>, epsdot: &DVector<T>) -> T {
    let a = eps.norm();
    let b = epsdot.norm();
    lit::<T>(4.0) * T::one().max(a).max(b).max(a * b)
}

/// `K = rho |chi| / (varpi - |chi|)`; a breach of `|chi| < varpi` is an error.
pub fn barrier_gain<T: Real>(gains: &GainSet<T>, chi: &DVector<T>) -> Result<T> {
    let nc = chi.norm();
    if !(nc < gains.varpi) {
        return Err(ControlError::BarrierBreach {
            chi_norm: to_f64(nc),
            varpi: to_f64(gains.varpi),
        });
    }
    Ok(gains.rho * nc / (gains.varpi - nc))
}

/// `tau = -K (Gamma + |xi| |D|) chi / |chi|`, zero when `chi` vanishes.
pub fn raw_command<T: Real>(
    gains: &GainSet<T>,
    chi: &DVector<T>,
    eps: &DVector<T>,
    epsdot: &DVector<T>,
    xi: &DVector<T>,
) -> Result<DVector<T>> {
    check_dim(chi.len(), eps.len())?;
    check_dim(chi.len(), epsdot.len())?;
    check_dim(2 * chi.len(), xi.len())?;
    let k = barrier_gain(gains, chi)?;
    Ok(command_with(k, gamma_fn(eps, epsdot), chi, xi))
}

fn command_with<T: Real>(k: T, gamma: T, chi: &DVector<T>, xi: &DVector<T>) -> DVector<T> {
    let nc = chi.norm();
    if nc < lit::<T>(CHI_ZERO) {
        return DVector::zeros(chi.len());
    }
    let scale = -k * (gamma + xi.norm() * d_norm::<T>()) / nc;
    chi * scale
}

/// Componentwise projection of `tau` onto `[u-, u+]`.
pub fn saturate<T: Real>(bx: &ConstraintBox<T>, tau: &DVector<T>) -> DVector<T> {
    DVector::from_fn(tau.len(), |i, _| {
        let x = tau[i];
        if x > bx.u_plus[i] {
            bx.u_plus[i]
        } else if x < bx.u_minus[i] {
            bx.u_minus[i]
        } else {
            x
        }
    })
}

/// Diagonal of the saturation matrix `Pi(tau)` with `u = Pi tau`.
pub fn saturation_diag<T: Real>(bx: &ConstraintBox<T>, tau: &DVector<T>) -> DVector<T> {
    DVector::from_fn(tau.len(), |i, _| {
        let x = tau[i];
        if x > bx.u_plus[i] {
            bx.u_plus[i] / x
        } else if x < bx.u_minus[i] {
            bx.u_minus[i] / x
        } else {
            T::one()
        }
    })
}

/// Pipeline quantities the policy reads.
#[derive(Debug, Clone, Copy)]
pub struct LawInputs<'a, T: Real> {
    pub chi: &'a DVector<T>,
    pub eps: &'a DVector<T>,
    pub epsdot: &'a DVector<T>,
    pub xi: &'a DVector<T>,
}

/// Evaluates the full policy: gain, command and saturation.
pub fn control_step<T: Real>(
    gains: &GainSet<T>,
    bx: &ConstraintBox<T>,
    x: LawInputs<'_, T>,
) -> Result<ControlOutput<T>> {
    check_dim(bx.dim(), x.chi.len())?;
    check_dim(x.chi.len(), x.eps.len())?;
    check_dim(x.chi.len(), x.epsdot.len())?;
    check_dim(2 * x.chi.len(), x.xi.len())?;
    let k = barrier_gain(gains, x.chi)?;
    let gamma = gamma_fn(x.eps, x.epsdot);
    let tau = command_with(k, gamma, x.chi, x.xi);
    let u = saturate(bx, &tau);
    Ok(ControlOutput { tau, u, k, gamma })
}
