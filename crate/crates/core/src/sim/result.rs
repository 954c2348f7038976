use std::io::Write;

use nalgebra::DVector;
use ptpb_control::{to_f64, Real};
use serde::Serialize;

use crate::error::Result;
use crate::model::JointState;

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Completed,
    /// `|chi|` reached `varpi`.
    BarrierBreach,
    /// The plant left the position or velocity box.
    ConstraintViolation,
    /// Dynamics solve, `Upsilon` floor or non-finite state.
    SolverError,
}

impl SimStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::BarrierBreach => "barrier_breach",
            Self::ConstraintViolation => "constraint_violation",
            Self::SolverError => "solver_error",
        }
    }
}

impl std::fmt::Display for SimStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One recorded instant. Errors `e`, `edot` use the true state; the controller signals use
/// the measured one.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T: Real> {
    pub t: T,
    pub q: DVector<T>,
    pub dq: DVector<T>,
    pub q_ref: DVector<T>,
    pub e: DVector<T>,
    pub edot: DVector<T>,
    pub eps: DVector<T>,
    pub epsdot: DVector<T>,
    pub chi: DVector<T>,
    pub xi: DVector<T>,
    pub k: T,
    pub gamma: T,
    pub tau: DVector<T>,
    pub u: DVector<T>,
    pub d: DVector<T>,
}

/// Output of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult<T: Real> {
    pub samples: Vec<Sample<T>>,
    pub status: SimStatus,
    /// Start time of the step in which the run stopped, if it stopped early.
    pub status_time: Option<T>,
    pub message: Option<String>,
    pub steps_taken: usize,
    /// Number of forward-dynamics evaluations.
    pub dynamics_evals: usize,
    /// Steps at which `D chi < Phi0` failed or the shrunk band was empty.
    pub band_violations: usize,
    pub max_chi_norm: T,
    pub max_k: T,
    pub max_xi_norm: T,
    pub final_state: JointState<T>,
}

impl<T: Real> SimResult<T> {
    pub fn completed(&self) -> bool {
        self.status == SimStatus::Completed
    }

    pub fn dim(&self) -> usize {
        self.final_state.dim()
    }

    /// Writes the trace as CSV, one row per sample, radians throughout.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        let mut push = |name: &str, len: usize| {
            header.extend((1..=len).map(|i| format!("{name}_{i}")));
        };
        push("q", n);
        push("dq", n);
        push("e", n);
        push("edot", n);
        push("chi", n);
        push("xi", 2 * n);
        header.push("K".into());
        header.push("Gamma".into());
        let mut push = |name: &str| header.extend((1..=n).map(|i| format!("{name}_{i}")));
        push("tau");
        push("u");
        push("d");
        w.write_record(&header)?;
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for s in &self.samples {
            row.clear();
            row.push(to_f64(s.t).to_string());
            for v in [&s.q, &s.dq, &s.e, &s.edot, &s.chi, &s.xi] {
                row.extend(v.iter().map(|x| to_f64(*x).to_string()));
            }
            row.push(to_f64(s.k).to_string());
            row.push(to_f64(s.gamma).to_string());
            for v in [&s.tau, &s.u, &s.d] {
                row.extend(v.iter().map(|x| to_f64(*x).to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
