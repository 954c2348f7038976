use nalgebra::DVector;
use ptpb_control::pipeline::Reference;
use ptpb_control::{
    lit, to_f64, GenericConstraintBox as ConstraintBox, GenericGainSet as GainSet, Real,
};

use crate::error::{CoreError, Result};
use crate::model::JointState;

/// Reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSpec<T: Real> {
    SetPoint(DVector<T>),
    /// `q_r,i(t) = offset_i + amplitude_i sin(frequency_i t + phase_i)`.
    Sinusoid {
        offset: DVector<T>,
        amplitude: DVector<T>,
        /// Angular frequency (rad/s).
        frequency: DVector<T>,
        phase: DVector<T>,
    },
}

impl<T: Real> ReferenceSpec<T> {
    pub fn dim(&self) -> usize {
        match self {
            Self::SetPoint(q) => q.len(),
            Self::Sinusoid { offset, .. } => offset.len(),
        }
    }

    pub fn at(&self, t: T) -> Reference<T> {
        match self {
            Self::SetPoint(q) => Reference::fixed(q.clone()),
            Self::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => {
                let n = offset.len();
                let arg = |i: usize| frequency[i] * t + phase[i];
                Reference::new(
                    DVector::from_fn(n, |i, _| offset[i] + amplitude[i] * arg(i).sin()),
                    DVector::from_fn(n, |i, _| amplitude[i] * frequency[i] * arg(i).cos()),
                    DVector::from_fn(n, |i, _| {
                        -amplitude[i] * frequency[i] * frequency[i] * arg(i).sin()
                    }),
                )
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Self::Sinusoid {
            offset,
            amplitude,
            frequency,
            phase,
        } = self
        {
            let n = offset.len();
            if amplitude.len() != n || frequency.len() != n || phase.len() != n {
                return Err(CoreError::InvalidScenario(
                    "sinusoid parameters must share one length".into(),
                ));
            }
        }
        Ok(())
    }
}

/// External disturbance `d(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceSpec<T: Real> {
    None,
    /// i.i.d. uniform on `[-max_i, max_i]`, held over each integration step.
    Uniform {
        max: DVector<T>,
        seed: u64,
    },
}

/// Measurement noise on the state the controller sees.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec<T: Real> {
    None,
    /// Zero-mean Gaussian per channel with standard deviation `RMS(reference channel) 10^(-snr/20)`.
    Snr {
        db: T,
        seed: u64,
    },
}

/// How the state-constraint variable is propagated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum IntegrationMode {
    /// Integrate `xi` directly.
    #[default]
    Xi,
    /// Integrate `Upsilon` and recover `xi` from it.
    Upsilon,
}

/// When the control input is recomputed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ControlHold {
    /// At every Runge-Kutta stage.
    #[default]
    Continuous,
    /// Once per step, held over its stages.
    Zoh,
}

/// One closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T: Real> {
    pub bx: ConstraintBox<T>,
    pub gains: GainSet<T>,
    pub t0: T,
    /// Prescribed time `T`.
    pub horizon: T,
    /// Run length after `t0`.
    pub duration: T,
    pub dt: T,
    pub reference: ReferenceSpec<T>,
    pub disturbance: DisturbanceSpec<T>,
    pub noise: NoiseSpec<T>,
    pub initial: JointState<T>,
    pub mode: IntegrationMode,
    pub hold: ControlHold,
    /// Record every k-th step (the last step is always recorded).
    pub record_every: usize,
}

impl<T: Real> Scenario<T> {
    /// Number of integration steps.
    pub fn steps(&self) -> usize {
        to_f64(self.duration / self.dt).round() as usize
    }

    /// Time of step `k`.
    pub fn time(&self, k: usize) -> T {
        self.t0 + lit::<T>(k as f64) * self.dt
    }

    /// Checks everything that does not need the plant model.
    pub fn validate(&self) -> Result<()> {
        let n = self.bx.dim();
        let bad = |m: String| Err(CoreError::InvalidScenario(m));
        self.bx.validate()?;
        self.gains.validate(&self.bx)?;
        self.reference.validate()?;
        if self.reference.dim() != n || self.initial.dim() != n {
            return bad(format!("reference and initial state must have {n} joints"));
        }
        if !(self.dt > T::zero()) {
            return bad("dt must be positive".into());
        }
        if !(self.horizon > T::zero()) {
            return bad("prescribed time T must be positive".into());
        }
        if self.duration < self.horizon {
            return bad(format!(
                "duration {} shorter than prescribed time {}",
                to_f64(self.duration),
                to_f64(self.horizon)
            ));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if let DisturbanceSpec::Uniform { max, .. } = &self.disturbance {
            if max.len() != n || max.iter().any(|m| *m < T::zero()) {
                return bad("disturbance maxima must be n non-negative values".into());
            }
        }
        if let NoiseSpec::Snr { db, .. } = &self.noise {
            if !to_f64(*db).is_finite() {
                return bad("noise SNR must be finite".into());
            }
        }
        if !self
            .bx
            .strictly_contains_state(&self.initial.q, &self.initial.dq)
        {
            return bad("initial state must lie strictly inside the state box".into());
        }
        Ok(())
    }
}
