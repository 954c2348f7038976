//! Tracking errors, dynamic bounds, the filtered error and the state-constraint law.

use nalgebra::DVector;

use crate::constraints::ConstraintBox;
use crate::error::{check_dim, ControlError, Result};
use crate::gains::GainSet;
use crate::scalar::{lit, to_f64, Real};
use crate::tbg::{ErrorRefs, TbgProfile};

/// Floor on `|Upsilon_i|` below which `Lambda` is treated as singular.
pub const Y_FLOOR: f64 = 1e-9;

/// Default step for the finite-difference rate of `Phi`.
pub const PHI_RATE_STEP: f64 = 1e-6;

/// Reference trajectory sample: position, velocity, acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference<T: Real> {
    pub q: DVector<T>,
    pub dq: DVector<T>,
    pub ddq: DVector<T>,
}

impl<T: Real> Reference<T> {
    pub fn new(q: DVector<T>, dq: DVector<T>, ddq: DVector<T>) -> Self {
        Self { q, dq, ddq }
    }

    /// Constant set-point.
    pub fn fixed(q: DVector<T>) -> Self {
        let n = q.len();
        Self {
            q,
            dq: DVector::zeros(n),
            ddq: DVector::zeros(n),
        }
    }
}

/// `e = q - q_r`, `edot = dq - dq_r`.
pub fn tracking_error<T: Real>(
    r: &Reference<T>,
    q: &DVector<T>,
    dq: &DVector<T>,
) -> Result<(DVector<T>, DVector<T>)> {
    check_dim(r.q.len(), q.len())?;
    check_dim(r.dq.len(), dq.len())?;
    Ok((q - &r.q, dq - &r.dq))
}

/// `eps = e - e^d(t)`, `epsdot = edot - de^d(t)`.
pub fn transformed_error<T: Real>(
    profile: &TbgProfile<T>,
    t: T,
    e: &DVector<T>,
    edot: &DVector<T>,
) -> Result<(DVector<T>, DVector<T>)> {
    check_dim(profile.dim(), e.len())?;
    check_dim(profile.dim(), edot.len())?;
    let r = profile.error_refs(t)?;
    Ok((e - r.e, edot - r.de))
}

/// `chi = epsdot + Kp eps`.
pub fn filtered_error<T: Real>(
    gains: &GainSet<T>,
    eps: &DVector<T>,
    epsdot: &DVector<T>,
) -> DVector<T> {
    epsdot + gains.kp.component_mul(eps)
}

/// Which argument of the max/min defining a dynamic bound is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// The velocity limit `nu -/+ dq_r`.
    Velocity,
    /// The position-derived slope `kappa (e -/+ - e)`.
    Position,
}

/// Componentwise dynamic bounds on the error rate with the active branch of each.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicBounds<T: Real> {
    pub lower: DVector<T>,
    pub upper: DVector<T>,
    pub lower_branch: Vec<Branch>,
    pub upper_branch: Vec<Branch>,
}

/// Dynamic bounds on `edot` combining the velocity box with the position box.
///
/// Ties resolve to the velocity branch.
pub fn dynamic_bounds<T: Real>(
    bx: &ConstraintBox<T>,
    gains: &GainSet<T>,
    r: &Reference<T>,
    e: &DVector<T>,
) -> DynamicBounds<T> {
    let n = e.len();
    let mut lower = DVector::zeros(n);
    let mut upper = DVector::zeros(n);
    let mut lower_branch = Vec::with_capacity(n);
    let mut upper_branch = Vec::with_capacity(n);
    for i in 0..n {
        let vl = bx.nu_minus[i] - r.dq[i];
        let pl = gains.kappa * (bx.theta_minus[i] - r.q[i] - e[i]);
        if vl >= pl {
            lower[i] = vl;
            lower_branch.push(Branch::Velocity);
        } else {
            lower[i] = pl;
            lower_branch.push(Branch::Position);
        }
        let vu = bx.nu_plus[i] - r.dq[i];
        let pu = gains.kappa * (bx.theta_plus[i] - r.q[i] - e[i]);
        if vu <= pu {
            upper[i] = vu;
            upper_branch.push(Branch::Velocity);
        } else {
            upper[i] = pu;
            upper_branch.push(Branch::Position);
        }
    }
    DynamicBounds {
        lower,
        upper,
        lower_branch,
        upper_branch,
    }
}

/// `D v = stack(-v, v)`.
pub fn d_times<T: Real>(v: &DVector<T>) -> DVector<T> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { -v[i] } else { v[i - n] })
}

/// The bound vectors `Phi0` and `Phi` on `D chi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiVectors<T: Real> {
    /// `stack(-phi0-, phi0+)`.
    pub phi0: DVector<T>,
    /// `stack(-(phi0- + c), phi0+ - c)`.
    pub phi: DVector<T>,
    pub bounds: DynamicBounds<T>,
}

impl<T: Real> PhiVectors<T> {
    pub fn dim(&self) -> usize {
        self.phi0.len() / 2
    }

    /// Lower edge `phi0-`.
    pub fn phi0_minus(&self) -> DVector<T> {
        -self.phi0.rows(0, self.dim()).into_owned()
    }

    /// Upper edge `phi0+`.
    pub fn phi0_plus(&self) -> DVector<T> {
        self.phi0.rows(self.dim(), self.dim()).into_owned()
    }

    /// Fails when the band shrunk by `c` is empty at some joint.
    pub fn check_margin(&self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            // upper edge phi0+ - c against lower edge phi0- + c
            let upper = self.phi[n + i];
            let lower = -self.phi[i];
            if upper < lower {
                return Err(ControlError::InfeasibleMargin {
                    index: i,
                    lower: to_f64(lower),
                    upper: to_f64(upper),
                });
            }
        }
        Ok(())
    }

    /// Strict band membership `D chi < Phi0` componentwise.
    pub fn band_contains(&self, chi: &DVector<T>) -> bool {
        d_times(chi)
            .iter()
            .zip(self.phi0.iter())
            .all(|(a, b)| a < b)
    }

    /// Branch selection behind each of the `2n` entries.
    pub fn branches(&self) -> impl Iterator<Item = Branch> + '_ {
        self.bounds
            .lower_branch
            .iter()
            .chain(self.bounds.upper_branch.iter())
            .copied()
    }
}

/// Computes `Phi0` and `Phi` without the margin check.
pub fn phi_vectors_raw<T: Real>(
    bx: &ConstraintBox<T>,
    gains: &GainSet<T>,
    profile: &TbgProfile<T>,
    r: &Reference<T>,
    t: T,
    q: &DVector<T>,
) -> Result<PhiVectors<T>> {
    check_dim(bx.dim(), q.len())?;
    check_dim(bx.dim(), r.q.len())?;
    let refs = profile.error_refs(t)?;
    let e = q - &r.q;
    let eps = &e - &refs.e;
    let bounds = dynamic_bounds(bx, gains, r, &e);
    let kpe = gains.kp.component_mul(&eps);
    let lo = &bounds.lower - &refs.de + &kpe;
    let hi = &bounds.upper - &refs.de + &kpe;
    let n = q.len();
    let c = gains.c;
    let phi0 = DVector::from_fn(2 * n, |i, _| if i < n { -lo[i] } else { hi[i - n] });
    let phi = DVector::from_fn(
        2 * n,
        |i, _| {
            if i < n {
                -(lo[i] + c)
            } else {
                hi[i - n] - c
            }
        },
    );
    Ok(PhiVectors { phi0, phi, bounds })
}

/// Computes `Phi0` and `Phi`, failing when the margin leaves an empty band.
pub fn phi_vectors<T: Real>(
    bx: &ConstraintBox<T>,
    gains: &GainSet<T>,
    profile: &TbgProfile<T>,
    r: &Reference<T>,
    t: T,
    q: &DVector<T>,
) -> Result<PhiVectors<T>> {
    let p = phi_vectors_raw(bx, gains, profile, r, t, q)?;
    p.check_margin()?;
    Ok(p)
}

/// Rate of `Phi` along the motion `(1, dq)` by finite differences.
///
/// Central differences are used where the max/min branch agrees on both sides; where it
/// changes, the one-sided difference on the side matching the branch at `t` is used.
#[allow(clippy::too_many_arguments)]
pub fn phi_rate<T: Real, F>(
    bx: &ConstraintBox<T>,
    gains: &GainSet<T>,
    profile: &TbgProfile<T>,
    reference: F,
    t: T,
    q: &DVector<T>,
    dq: &DVector<T>,
    step: T,
) -> Result<DVector<T>>
where
    F: Fn(T) -> Reference<T>,
{
    let at = |s: T| phi_vectors_raw(bx, gains, profile, &reference(t + s), t + s, &(q + dq * s));
    let mid = at(T::zero())?;
    let fwd = at(step)?;
    let bwd = if t - step >= profile.t0() {
        Some(at(-step)?)
    } else {
        None
    };
    let two = lit::<T>(2.0);
    let mut out = DVector::zeros(mid.phi.len());
    let branches: Vec<Branch> = mid.branches().collect();
    let fb: Vec<Branch> = fwd.branches().collect();
    let bb: Option<Vec<Branch>> = bwd.as_ref().map(|b| b.branches().collect());
    for i in 0..out.len() {
        let fwd_ok = fb[i] == branches[i];
        let bwd_ok = bb.as_ref().is_some_and(|b| b[i] == branches[i]);
        out[i] = match (&bwd, fwd_ok, bwd_ok) {
            (Some(b), true, true) => (fwd.phi[i] - b.phi[i]) / (two * step),
            (Some(b), false, true) => (mid.phi[i] - b.phi[i]) / step,
            (Some(b), false, false) => (fwd.phi[i] - b.phi[i]) / (two * step),
            _ => (fwd.phi[i] - mid.phi[i]) / step,
        };
    }
    Ok(out)
}

/// `dxi/dt = -gamma xi + gamma alpha D chi`.
pub fn xi_derivative<T: Real>(gains: &GainSet<T>, xi: &DVector<T>, chi: &DVector<T>) -> DVector<T> {
    (d_times(chi) * gains.alpha - xi) * gains.gamma
}

/// Recovers `xi = D chi + Upsilon.^2 - Phi`.
pub fn recover_xi<T: Real>(chi: &DVector<T>, upsilon: &DVector<T>, phi: &DVector<T>) -> DVector<T> {
    d_times(chi) + upsilon.component_mul(upsilon) - phi
}

/// `Upsilon(t0) = sqrt(Phi(t0))`, valid when `chi(t0) = 0` and `xi(t0) = 0`.
pub fn upsilon_init<T: Real>(phi: &DVector<T>) -> Result<DVector<T>> {
    let floor = lit::<T>(Y_FLOOR);
    let mut out = DVector::zeros(phi.len());
    for (i, p) in phi.iter().enumerate() {
        let y = if *p > T::zero() { p.sqrt() } else { T::zero() };
        if y < floor {
            return Err(ControlError::SingularUpsilon {
                index: i,
                value: to_f64(y),
            });
        }
        out[i] = y;
    }
    Ok(out)
}

/// `dUpsilon/dt = 1/2 Lambda^-1 (-gamma xi + gamma alpha D chi + dPhi - D dchi)`.
pub fn upsilon_derivative<T: Real>(
    gains: &GainSet<T>,
    upsilon: &DVector<T>,
    chi: &DVector<T>,
    chidot: &DVector<T>,
    phi: &DVector<T>,
    phidot: &DVector<T>,
) -> Result<DVector<T>> {
    let m = upsilon.len();
    check_dim(2 * chi.len(), m)?;
    check_dim(m, phi.len())?;
    check_dim(m, phidot.len())?;
    check_dim(chi.len(), chidot.len())?;
    let floor = lit::<T>(Y_FLOOR);
    if let Some(i) = upsilon.iter().position(|y| y.abs() < floor) {
        return Err(ControlError::SingularUpsilon {
            index: i,
            value: to_f64(upsilon[i]),
        });
    }
    let xi = recover_xi(chi, upsilon, phi);
    let rhs = xi_derivative(gains, &xi, chi) + phidot - d_times(chidot);
    let half = lit::<T>(0.5);
    Ok(rhs.component_div(upsilon) * half)
}

/// Every quantity the control law consumes at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSignals<T: Real> {
    pub e: DVector<T>,
    pub edot: DVector<T>,
    pub eps: DVector<T>,
    pub epsdot: DVector<T>,
    pub chi: DVector<T>,
    pub refs: ErrorRefs<T>,
}

/// Runs the error pipeline for a measured state.
pub fn error_signals<T: Real>(
    profile: &TbgProfile<T>,
    gains: &GainSet<T>,
    r: &Reference<T>,
    t: T,
    q: &DVector<T>,
    dq: &DVector<T>,
) -> Result<ErrorSignals<T>> {
    let (e, edot) = tracking_error(r, q, dq)?;
    check_dim(profile.dim(), e.len())?;
    let refs = profile.error_refs(t)?;
    let eps = &e - &refs.e;
    let epsdot = &edot - &refs.de;
    let chi = filtered_error(gains, &eps, &epsdot);
    Ok(ErrorSignals {
        e,
        edot,
        eps,
        epsdot,
        chi,
        refs,
    })
}
