//! Feasibility calculus: minimal prescribed time, CBF slope bounds, the viable set of initial
//! conditions, the control authority it demands and the disturbance it tolerates.

use nalgebra::DVector;
use ptpb_control::{k_constants, lit, to_f64, GenericConstraintBox as ConstraintBox, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::model::{JointState, ModelBounds};

/// Samples drawn per parallel work unit in [`monte_carlo_region`].
pub const MC_CHUNK: usize = 1024;

/// `f_bar = (nu^2 + (m_bar ((C_bar nu + F_bar) nu + G_bar))^2)^(1/2)` with `nu = |nu+|`.
pub fn f_bar<T: Real>(bounds: &ModelBounds<T>, bx: &ConstraintBox<T>) -> T {
    let nu = bx.nu_plus_norm();
    let acc = bounds.minv_upper * ((bounds.c_bar * nu + bounds.f_bar) * nu + bounds.g_bar);
    (nu * nu + acc * acc).sqrt()
}

/// `g_bar = m_bar`.
pub fn g_bar<T: Real>(bounds: &ModelBounds<T>) -> T {
    bounds.minv_upper
}

/// Lower bound on the prescribed time over candidate initial states.
///
/// `xr` is the stacked target `(q_r, dq_r)`; distances are to the `eps`-ball around it.
pub fn t_star<T: Real>(
    bounds: &ModelBounds<T>,
    bx: &ConstraintBox<T>,
    eps: T,
    xr: &DVector<T>,
    candidates: &[JointState<T>],
) -> Result<T> {
    let n = bx.dim();
    if xr.len() != 2 * n {
        return Err(CoreError::InvalidArgument(format!(
            "target must have length {}, got {}",
            2 * n,
            xr.len()
        )));
    }
    let speed = f_bar(bounds, bx) + g_bar(bounds) * bx.u_star();
    let mut worst = T::zero();
    for c in candidates {
        if c.dim() != n {
            return Err(CoreError::InvalidArgument(
                "candidate dimension mismatch".into(),
            ));
        }
        let dist = ((c.stacked() - xr).norm() - eps).max(T::zero());
        worst = worst.max(dist);
    }
    Ok(worst / speed)
}

/// Where initial conditions may start, for the suprema over the start set.
#[derive(Debug, Clone, PartialEq)]
pub enum Region<T: Real> {
    /// The whole state box; `rest` restricts it to the `dq = 0` slice.
    StateBox { rest: bool },
    /// Euclidean balls of the given radii around `(q*, 0)`.
    Ball { q_radius: T, dq_radius: T },
    /// Explicit initial states.
    Points(Vec<JointState<T>>),
}

/// Inputs of the feasibility calculus for one prescribed time.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityProblem<T: Real> {
    pub bounds: ModelBounds<T>,
    pub bx: ConstraintBox<T>,
    /// Prescribed time `T`.
    pub horizon: T,
    /// Set-point the viable set is centred on.
    pub q_star: DVector<T>,
    /// Input budget; defaults to `min(|u-|, |u+|)`.
    pub u_star: T,
    /// Start set used for the velocity supremum in the lower CBF slope.
    pub start: Region<T>,
}

impl<T: Real> FeasibilityProblem<T> {
    pub fn new(
        bounds: ModelBounds<T>,
        bx: ConstraintBox<T>,
        horizon: T,
        q_star: DVector<T>,
    ) -> Result<Self> {
        bx.validate()?;
        if !(horizon > T::zero()) {
            return Err(CoreError::InvalidArgument(
                "prescribed time must be positive".into(),
            ));
        }
        if q_star.len() != bx.dim() {
            return Err(CoreError::InvalidArgument("q* dimension mismatch".into()));
        }
        let u_star = bx.u_star();
        Ok(Self {
            bounds,
            bx,
            horizon,
            q_star,
            u_star,
            start: Region::StateBox { rest: true },
        })
    }

    pub fn with_u_star(mut self, u_star: T) -> Self {
        self.u_star = u_star;
        self
    }

    pub fn with_start(mut self, start: Region<T>) -> Self {
        self.start = start;
        self
    }

    fn nu(&self) -> T {
        self.bx.nu_plus_norm()
    }

    /// `C_bar nu^2 + F_bar nu + G_bar`.
    fn drift(&self) -> T {
        let nu = self.nu();
        self.bounds.c_bar * nu * nu + self.bounds.f_bar * nu + self.bounds.g_bar
    }

    /// Supremum of `(k2/T) |q - q*|_inf + |dq|_inf` over a region.
    pub fn ed_max(&self, region: &Region<T>) -> Result<T> {
        let [_, k2, _, _] = k_constants::<T>();
        let a = k2 / self.horizon;
        match region {
            Region::StateBox { rest } => {
                let dq = if *rest {
                    T::zero()
                } else {
                    self.bx.nu_minus.amax().max(self.bx.nu_plus.amax())
                };
                Ok(a * self.box_q_offset_inf() + dq)
            }
            Region::Ball {
                q_radius,
                dq_radius,
            } => Ok(a * *q_radius + *dq_radius),
            Region::Points(pts) => pts
                .iter()
                .map(|p| a * (&p.q - &self.q_star).amax() + p.dq.amax())
                .reduce(|x, y| x.max(y))
                .ok_or(CoreError::EmptyRegion),
        }
    }

    /// Supremum of `(k3/T^2) |q - q*| + (k4/T) |dq|` over a region.
    pub fn edd_max(&self, region: &Region<T>) -> Result<T> {
        let [_, _, k3, k4] = k_constants::<T>();
        let tt = self.horizon;
        let f = |dq: T, ddq: T| k3 / (tt * tt) * dq + k4 / tt * ddq;
        match region {
            Region::StateBox { rest } => {
                let q =
                    self.box_far_vertex(&self.bx.theta_minus, &self.bx.theta_plus, &self.q_star);
                let dq = if *rest {
                    T::zero()
                } else {
                    let z = DVector::zeros(self.bx.dim());
                    self.box_far_vertex(&self.bx.nu_minus, &self.bx.nu_plus, &z)
                };
                Ok(f(q, dq))
            }
            Region::Ball {
                q_radius,
                dq_radius,
            } => Ok(f(*q_radius, *dq_radius)),
            Region::Points(pts) => pts
                .iter()
                .map(|p| f((&p.q - &self.q_star).norm(), p.dq.norm()))
                .reduce(|x, y| x.max(y))
                .ok_or(CoreError::EmptyRegion),
        }
    }

    fn box_q_offset_inf(&self) -> T {
        (0..self.bx.dim())
            .map(|i| {
                (self.bx.theta_plus[i] - self.q_star[i])
                    .max(self.q_star[i] - self.bx.theta_minus[i])
            })
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Largest Euclidean distance from `c` to a vertex of `[lo, hi]`.
    fn box_far_vertex(&self, lo: &DVector<T>, hi: &DVector<T>, c: &DVector<T>) -> T {
        let sq = (0..lo.len())
            .map(|i| {
                let d = (hi[i] - c[i]).abs().max((c[i] - lo[i]).abs());
                d * d
            })
            .fold(T::zero(), |a, b| a + b);
        sq.sqrt()
    }

    /// `(sigma_lower, sigma_upper)`.
    pub fn sigma_bounds(&self) -> Result<(T, T)> {
        let lower =
            lit::<T>(2.0) * self.nu().max(self.ed_max(&self.start)?) / self.bx.theta_span_inf();
        let upper = (self.u_star - self.drift()) / (self.bounds.m_upper * self.nu());
        Ok((lower, upper))
    }

    /// `eta = C_bar nu^2 + F_bar nu + sigma M_bar nu + G_bar`.
    pub fn eta(&self, sigma: T) -> T {
        self.drift() + sigma * self.bounds.m_upper * self.nu()
    }

    /// Radius of the viable set on the `dq = 0` slice, `T^2 (u* - eta) / (k3 M_bar)`; zero if empty.
    pub fn viable_radius(&self, sigma: T) -> T {
        let [_, _, k3, _] = k_constants::<T>();
        let slack = self.u_star - self.eta(sigma);
        if slack <= T::zero() {
            return T::zero();
        }
        self.horizon * self.horizon * slack / (k3 * self.bounds.m_upper)
    }

    fn check_sigma(&self, sigma: T) -> Result<()> {
        let (lo, hi) = self.sigma_bounds()?;
        if sigma < lo || sigma >= hi {
            return Err(CoreError::InvalidSigma {
                sigma: to_f64(sigma),
                lower: to_f64(lo),
                upper: to_f64(hi),
            });
        }
        Ok(())
    }

    /// Membership test for the viable set `S(T; u*)` at slope `sigma`.
    pub fn viable_membership(&self, sigma: T, state: &JointState<T>) -> Result<bool> {
        self.check_sigma(sigma)?;
        Ok(self.member_unchecked(sigma, state))
    }

    /// Membership without the `sigma` range check.
    pub fn member_unchecked(&self, sigma: T, s: &JointState<T>) -> bool {
        let bx = &self.bx;
        if s.dim() != bx.dim() || !bx.contains_position(&s.q) {
            return false;
        }
        // With the candidate's own generator, epsdot(t0) = dq - ed0 = dq_r(t0) = 0 at a set-point.
        let epsdot = DVector::<T>::zeros(bx.dim());
        let cbf = (0..bx.dim()).all(|i| {
            -epsdot[i] + sigma * (bx.theta_plus[i] - s.q[i]) >= T::zero()
                && epsdot[i] + sigma * (s.q[i] - bx.theta_minus[i]) >= T::zero()
        });
        if !cbf {
            return false;
        }
        let [_, _, k3, k4] = k_constants::<T>();
        let tt = self.horizon;
        let lhs = k3 / (tt * tt) * (&s.q - &self.q_star).norm() + k4 / tt * s.dq.norm();
        lhs <= (self.u_star - self.eta(sigma)) / self.bounds.m_upper
    }

    /// `(u_min, d_bar)` for initial conditions in `region`.
    pub fn control_authority(&self, sigma: T, region: &Region<T>) -> Result<(T, T)> {
        let u_min = self.eta(sigma) + self.bounds.m_upper * self.edd_max(region)?;
        Ok((u_min, (self.u_star - u_min).max(T::zero())))
    }

    /// Full report at `sigma` (midpoint of the admissible range when `None`).
    pub fn report(
        &self,
        sigma: Option<T>,
        authority_region: &Region<T>,
        t_star: T,
    ) -> Result<FeasibilityReport<T>> {
        let (lo, hi) = self.sigma_bounds()?;
        let sigma = sigma.unwrap_or((lo + hi) / lit(2.0));
        let eta = self.eta(sigma);
        let nonempty = lo < hi && self.u_star > eta;
        let viable_radius = if nonempty {
            self.viable_radius(sigma)
        } else {
            T::zero()
        };
        let (u_min, d_bar) = self.control_authority(sigma, authority_region)?;
        Ok(FeasibilityReport {
            horizon: self.horizon,
            sigma_lower: lo,
            sigma_upper: hi,
            sigma,
            t_star,
            u_star: self.u_star,
            eta,
            viable_radius,
            u_min,
            d_bar,
            nonempty,
            f_bar: f_bar(&self.bounds, &self.bx),
            g_bar: g_bar(&self.bounds),
            ed_max: self.ed_max(&self.start)?,
            edd_max: self.edd_max(authority_region)?,
        })
    }
}

/// Outcome of the feasibility calculus for one prescribed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport<T> {
    pub horizon: T,
    pub sigma_lower: T,
    pub sigma_upper: T,
    pub sigma: T,
    pub t_star: T,
    pub u_star: T,
    pub eta: T,
    /// Radius of the viable set on the `dq = 0` slice (rad).
    pub viable_radius: T,
    pub u_min: T,
    pub d_bar: T,
    pub nonempty: bool,
    pub f_bar: T,
    pub g_bar: T,
    pub ed_max: T,
    pub edd_max: T,
}

/// Accepted samples and acceptance ratio of a Monte-Carlo sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult<T: Real> {
    pub accepted: Vec<JointState<T>>,
    pub samples: usize,
    pub ratio: f64,
}

/// Uniform seeded sampling of `(q, dq)` in the box, classified by `predicate`.
///
/// Work is split in chunks of [`MC_CHUNK`] samples, each on its own ChaCha stream, so the
/// result does not depend on the thread count; accepted samples come back in index order.
pub fn monte_carlo_region<T: Real, P>(
    predicate: P,
    bx: &ConstraintBox<T>,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloResult<T>>
where
    P: Fn(&JointState<T>) -> bool + Sync,
{
    if samples == 0 {
        return Err(CoreError::InvalidArgument(
            "sample count must be at least 1".into(),
        ));
    }
    let n = bx.dim();
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<Vec<JointState<T>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut out = Vec::new();
            for _ in 0..count {
                let mut draw = |lo: &DVector<T>, hi: &DVector<T>| {
                    DVector::from_fn(n, |i, _| {
                        let s: f64 = rng.random();
                        lo[i] + (hi[i] - lo[i]) * lit::<T>(s)
                    })
                };
                let q = draw(&bx.theta_minus, &bx.theta_plus);
                let dq = draw(&bx.nu_minus, &bx.nu_plus);
                let s = JointState { q, dq };
                if predicate(&s) {
                    out.push(s);
                }
            }
            out
        })
        .collect();
    let accepted: Vec<_> = parts.into_iter().flatten().collect();
    let ratio = accepted.len() as f64 / samples as f64;
    Ok(MonteCarloResult {
        accepted,
        samples,
        ratio,
    })
}
