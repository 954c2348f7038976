//! Fixed-step RK4 integration of the plant together with the state-constraint law.

use nalgebra::DVector;
use ptpb_control::controller::{control_step, ControlOutput, LawInputs};
use ptpb_control::pipeline::{
    error_signals, phi_rate, phi_vectors, phi_vectors_raw, recover_xi, upsilon_derivative,
    upsilon_init, xi_derivative, ErrorSignals, PHI_RATE_STEP,
};
use ptpb_control::tbg::TbgProfile;
use ptpb_control::{lit, to_f64, ControlError, Real};
use rayon::prelude::*;

use super::result::{Sample, SimResult, SimStatus};
use super::scenario::{ControlHold, DisturbanceSpec, IntegrationMode, NoiseSpec, Scenario};
use super::signals::{noise_levels, noise_sample, uniform_disturbance, NoiseLevels};
use crate::error::{CoreError, Result};
use crate::model::{forward_dynamics, DynamicsProvider, JointState};

/// One classical Runge-Kutta step given the derivative `k1` at `(t, x)`.
pub fn rk4_step<T: Real, F>(
    mut f: F,
    t: T,
    x: &DVector<T>,
    k1: &DVector<T>,
    dt: T,
) -> Result<DVector<T>>
where
    F: FnMut(T, &DVector<T>) -> Result<DVector<T>>,
{
    let half = dt / lit(2.0);
    let k2 = f(t + half, &(x + k1 * half))?;
    let k3 = f(t + half, &(x + &k2 * half))?;
    let k4 = f(t + dt, &(x + &k3 * dt))?;
    Ok(x + (k1 + (k2 + k3) * lit::<T>(2.0) + k4) * (dt / lit(6.0)))
}

/// Everything computed in one derivative evaluation.
struct Stage<T: Real> {
    dx: DVector<T>,
    sig: ErrorSignals<T>,
    xi: DVector<T>,
    ctrl: ControlOutput<T>,
    q_meas: DVector<T>,
}

/// Why a stage evaluation failed.
enum Halt {
    Breach(String),
    Solver(String),
}

impl From<ControlError> for Halt {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::BarrierBreach { .. } => Halt::Breach(e.to_string()),
            other => Halt::Solver(other.to_string()),
        }
    }
}

impl From<CoreError> for Halt {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Control(c) => c.into(),
            other => Halt::Solver(other.to_string()),
        }
    }
}

struct Runner<'a, T: Real, M: ?Sized> {
    model: &'a M,
    sc: &'a Scenario<T>,
    profile: TbgProfile<T>,
    levels: Option<NoiseLevels<T>>,
    evals: usize,
}

impl<T: Real, M: DynamicsProvider<T> + ?Sized> Runner<'_, T, M> {
    fn n(&self) -> usize {
        self.sc.bx.dim()
    }

    fn split(&self, x: &DVector<T>) -> (DVector<T>, DVector<T>, DVector<T>) {
        let n = self.n();
        (
            x.rows(0, n).into_owned(),
            x.rows(n, n).into_owned(),
            x.rows(2 * n, 2 * n).into_owned(),
        )
    }

    fn stage(
        &mut self,
        t: T,
        x: &DVector<T>,
        d: &DVector<T>,
        noise: &(DVector<T>, DVector<T>),
        held: Option<&DVector<T>>,
    ) -> std::result::Result<Stage<T>, Halt> {
        let sc = self.sc;
        let (q, dq, z) = self.split(x);
        let q_meas = &q + &noise.0;
        let dq_meas = &dq + &noise.1;
        let r = sc.reference.at(t);
        let sig = error_signals(&self.profile, &sc.gains, &r, t, &q_meas, &dq_meas)?;
        let phi = match sc.mode {
            IntegrationMode::Xi => None,
            IntegrationMode::Upsilon => {
                Some(phi_vectors_raw(&sc.bx, &sc.gains, &self.profile, &r, t, &q_meas)?.phi)
            }
        };
        let xi = match &phi {
            None => z.clone(),
            Some(p) => recover_xi(&sig.chi, &z, p),
        };
        let mut ctrl = control_step(
            &sc.gains,
            &sc.bx,
            LawInputs {
                chi: &sig.chi,
                eps: &sig.eps,
                epsdot: &sig.epsdot,
                xi: &xi,
            },
        )?;
        if let Some(u) = held {
            ctrl.u = u.clone();
        }
        self.evals += 1;
        let ddq = forward_dynamics(self.model, &JointState { q, dq: dq.clone() }, &ctrl.u, d)?;
        let dz = match &phi {
            None => xi_derivative(&sc.gains, &xi, &sig.chi),
            Some(p) => {
                let epsddot = &ddq - &r.ddq - &sig.refs.dde;
                let chidot = epsddot + sc.gains.kp.component_mul(&sig.epsdot);
                let reference = |s: T| sc.reference.at(s);
                let phidot = phi_rate(
                    &sc.bx,
                    &sc.gains,
                    &self.profile,
                    reference,
                    t,
                    &q_meas,
                    &dq_meas,
                    lit(PHI_RATE_STEP),
                )?;
                upsilon_derivative(&sc.gains, &z, &sig.chi, &chidot, p, &phidot)?
            }
        };
        let n = self.n();
        let dx = DVector::from_fn(4 * n, |i, _| {
            if i < n {
                dq[i]
            } else if i < 2 * n {
                ddq[i - n]
            } else {
                dz[i - 2 * n]
            }
        });
        Ok(Stage {
            dx,
            sig,
            xi,
            ctrl,
            q_meas,
        })
    }

    fn noise(&self, k: usize) -> (DVector<T>, DVector<T>) {
        match (&self.sc.noise, &self.levels) {
            (NoiseSpec::Snr { seed, .. }, Some(l)) => noise_sample(l, k, *seed),
            _ => (DVector::zeros(self.n()), DVector::zeros(self.n())),
        }
    }

    fn disturbance(&self, k: usize) -> DVector<T> {
        match &self.sc.disturbance {
            DisturbanceSpec::None => DVector::zeros(self.n()),
            DisturbanceSpec::Uniform { max, seed } => uniform_disturbance(max, k, *seed),
        }
    }
}

/// Runs a scenario against a plant model.
///
/// Configuration problems are returned as errors; failures during the run (barrier breach,
/// leaving the state box, solver trouble) end the run early and are reported in the status.
pub fn run_scenario<T: Real, M: DynamicsProvider<T> + ?Sized>(
    model: &M,
    sc: &Scenario<T>,
) -> Result<SimResult<T>> {
    sc.validate()?;
    let n = sc.bx.dim();
    if model.dof() != n {
        return Err(CoreError::InvalidScenario(format!(
            "model has {} DOF, scenario has {n}",
            model.dof()
        )));
    }
    let steps = sc.steps();
    let levels = match &sc.noise {
        NoiseSpec::None => None,
        NoiseSpec::Snr { db, .. } => Some(noise_levels(&sc.reference, *db, sc.t0, sc.dt, steps)),
    };
    let mut runner = Runner {
        model,
        sc,
        profile: TbgProfile::new(sc.t0, sc.horizon, DVector::zeros(n), DVector::zeros(n))?,
        levels,
        evals: 0,
    };

    // The generator starts from the first measured error, so chi(t0) = 0.
    let noise0 = runner.noise(0);
    let r0 = sc.reference.at(sc.t0);
    let e0 = &sc.initial.q + &noise0.0 - &r0.q;
    let ed0 = &sc.initial.dq + &noise0.1 - &r0.dq;
    runner.profile = TbgProfile::new(sc.t0, sc.horizon, e0, ed0)?;
    let phi0 = phi_vectors(
        &sc.bx,
        &sc.gains,
        &runner.profile,
        &r0,
        sc.t0,
        &(&sc.initial.q + &noise0.0),
    )
    .map_err(|e| CoreError::InvalidScenario(format!("initial band: {e}")))?;
    if let Some(i) = phi0.phi.iter().position(|p| *p < T::zero()) {
        return Err(CoreError::InvalidScenario(format!(
            "Phi(t0) must be non-negative; component {i} is {} (reduce the safety margin c)",
            to_f64(phi0.phi[i])
        )));
    }
    let z0 = match sc.mode {
        IntegrationMode::Xi => DVector::zeros(2 * n),
        IntegrationMode::Upsilon => upsilon_init(&phi0.phi)
            .map_err(|e| CoreError::InvalidScenario(format!("Upsilon(t0): {e}")))?,
    };
    let mut x = DVector::from_fn(4 * n, |i, _| {
        if i < n {
            sc.initial.q[i]
        } else if i < 2 * n {
            sc.initial.dq[i - n]
        } else {
            z0[i - 2 * n]
        }
    });

    let mut samples = Vec::with_capacity(steps / sc.record_every + 2);
    let mut status = SimStatus::Completed;
    let mut status_time = None;
    let mut message = None;
    let mut band_violations = 0;
    let (mut max_chi, mut max_k, mut max_xi) = (T::zero(), T::zero(), T::zero());
    let mut steps_taken = 0;

    for k in 0..=steps {
        let t = sc.time(k);
        let (q, dq, _) = runner.split(&x);
        if !sc.bx.contains_position(&q) || !sc.bx.contains_velocity(&dq) {
            status = SimStatus::ConstraintViolation;
            status_time = Some(t);
            message = Some(format!(
                "state left the box at t = {}: q = {:?}, dq = {:?}",
                to_f64(t),
                q.iter().map(|v| to_f64(*v)).collect::<Vec<_>>(),
                dq.iter().map(|v| to_f64(*v)).collect::<Vec<_>>()
            ));
            break;
        }
        let d = runner.disturbance(k);
        let nz = runner.noise(k);
        let s1 = match runner.stage(t, &x, &d, &nz, None) {
            Ok(s) => s,
            Err(h) => {
                (status, message) = halt(h);
                status_time = Some(t);
                break;
            }
        };
        max_chi = max_chi.max(s1.sig.chi.norm());
        max_k = max_k.max(s1.ctrl.k);
        max_xi = max_xi.max(s1.xi.norm());
        let r = sc.reference.at(t);
        let band_ok = phi_vectors(&sc.bx, &sc.gains, &runner.profile, &r, t, &s1.q_meas)
            .map(|p| p.band_contains(&s1.sig.chi))
            .unwrap_or(false);
        if !band_ok {
            band_violations += 1;
        }
        if k % sc.record_every == 0 || k == steps {
            samples.push(Sample {
                t,
                e: &q - &r.q,
                edot: &dq - &r.dq,
                q_ref: r.q,
                q,
                dq,
                eps: s1.sig.eps.clone(),
                epsdot: s1.sig.epsdot.clone(),
                chi: s1.sig.chi.clone(),
                xi: s1.xi.clone(),
                k: s1.ctrl.k,
                gamma: s1.ctrl.gamma,
                tau: s1.ctrl.tau.clone(),
                u: s1.ctrl.u.clone(),
                d: d.clone(),
            });
        }
        if k == steps {
            break;
        }
        let held = match sc.hold {
            ControlHold::Continuous => None,
            ControlHold::Zoh => Some(s1.ctrl.u.clone()),
        };
        let mut failure = None;
        let next = rk4_step(
            |ts, xs| match runner.stage(ts, xs, &d, &nz, held.as_ref()) {
                Ok(s) => Ok(s.dx),
                Err(h) => {
                    failure = Some(h);
                    Err(CoreError::InvalidArgument("stage failed".into()))
                }
            },
            t,
            &x,
            &s1.dx,
            sc.dt,
        );
        match next {
            Ok(nx) if nx.iter().all(|v| to_f64(*v).is_finite()) => {
                x = nx;
                steps_taken += 1;
            }
            Ok(_) => {
                status = SimStatus::SolverError;
                message = Some("non-finite state".into());
                status_time = Some(t);
                break;
            }
            Err(_) => {
                let h = failure.unwrap_or(Halt::Solver("stage failed".into()));
                (status, message) = halt(h);
                status_time = Some(t);
                break;
            }
        }
    }

    let (q, dq, _) = runner.split(&x);
    Ok(SimResult {
        samples,
        status,
        status_time,
        message,
        steps_taken,
        dynamics_evals: runner.evals,
        band_violations,
        max_chi_norm: max_chi,
        max_k,
        max_xi_norm: max_xi,
        final_state: JointState { q, dq },
    })
}

fn halt(h: Halt) -> (SimStatus, Option<String>) {
    match h {
        Halt::Breach(m) => (SimStatus::BarrierBreach, Some(m)),
        Halt::Solver(m) => (SimStatus::SolverError, Some(m)),
    }
}

/// Runs independent scenarios in parallel against one shared model; order is preserved.
pub fn run_batch<T: Real, M: DynamicsProvider<T> + ?Sized>(
    model: &M,
    scenarios: &[Scenario<T>],
) -> Vec<Result<SimResult<T>>> {
    scenarios
        .par_iter()
        .map(|s| run_scenario(model, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_is_fourth_order_on_exponential() {
        let f = |_t: f64, x: &DVector<f64>| Ok(-x);
        let run = |dt: f64| {
            let mut x = DVector::from_element(1, 1.0);
            let steps = (1.0 / dt).round() as usize;
            for k in 0..steps {
                let k1 = -&x;
                x = rk4_step(f, k as f64 * dt, &x, &k1, dt).unwrap();
            }
            (x[0] - (-1f64).exp()).abs()
        };
        let ratio = run(0.02) / run(0.01);
        assert!((ratio - 16.0).abs() < 0.5, "{ratio}");
    }
}
