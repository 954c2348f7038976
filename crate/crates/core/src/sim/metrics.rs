use ptpb_control::{to_f64, Real};
use serde::Serialize;

use super::result::{Sample, SimResult};
use crate::error::{CoreError, Result};

/// Steady-state error statistics over `t >= t0 + T`, in degrees and degrees per second.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub window_start: f64,
    pub samples: usize,
    /// Maximum absolute steady-state position error per joint.
    pub mase_q_deg: Vec<f64>,
    pub mae_q_deg: Vec<f64>,
    pub rmse_q_deg: Vec<f64>,
    pub mase_dq_deg_s: Vec<f64>,
    pub mae_dq_deg_s: Vec<f64>,
    pub rmse_dq_deg_s: Vec<f64>,
    /// Supremum of `|e|` over the window.
    pub sup_e_norm_deg: f64,
    pub sup_edot_norm_deg_s: f64,
}

#[derive(Default)]
struct Moments {
    max: f64,
    abs: f64,
    sq: f64,
}

fn stats(rows: &[Vec<f64>], n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut m: Vec<Moments> = (0..n).map(|_| Moments::default()).collect();
    for r in rows {
        for (acc, x) in m.iter_mut().zip(r) {
            acc.max = acc.max.max(x.abs());
            acc.abs += x.abs();
            acc.sq += x * x;
        }
    }
    let c = rows.len() as f64;
    (
        m.iter().map(|a| a.max).collect(),
        m.iter().map(|a| a.abs / c).collect(),
        m.iter().map(|a| (a.sq / c).sqrt()).collect(),
    )
}

/// Computes [`Metrics`] from the samples at or after `t0 + horizon`.
pub fn compute_metrics<T: Real>(result: &SimResult<T>, t0: T, horizon: T) -> Result<Metrics> {
    metrics_from_samples(&result.samples, t0, horizon)
}

/// As [`compute_metrics`] on a bare sample slice.
pub fn metrics_from_samples<T: Real>(samples: &[Sample<T>], t0: T, horizon: T) -> Result<Metrics> {
    let settle = t0 + horizon;
    let window: Vec<&Sample<T>> = samples.iter().filter(|s| s.t >= settle).collect();
    if window.is_empty() {
        return Err(CoreError::InsufficientWindow {
            settle: to_f64(settle),
        });
    }
    let n = window[0].e.len();
    let deg = |v: &nalgebra::DVector<T>| {
        v.iter()
            .map(|x| to_f64(*x).to_degrees())
            .collect::<Vec<_>>()
    };
    let e: Vec<Vec<f64>> = window.iter().map(|s| deg(&s.e)).collect();
    let ed: Vec<Vec<f64>> = window.iter().map(|s| deg(&s.edot)).collect();
    let (mase_q_deg, mae_q_deg, rmse_q_deg) = stats(&e, n);
    let (mase_dq_deg_s, mae_dq_deg_s, rmse_dq_deg_s) = stats(&ed, n);
    let sup = |v: &[Vec<f64>]| {
        v.iter()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    Ok(Metrics {
        window_start: to_f64(settle),
        samples: window.len(),
        mase_q_deg,
        mae_q_deg,
        rmse_q_deg,
        mase_dq_deg_s,
        mae_dq_deg_s,
        rmse_dq_deg_s,
        sup_e_norm_deg: sup(&e),
        sup_edot_norm_deg_s: sup(&ed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn sample(t: f64, e: f64) -> Sample<f64> {
        let z = DVector::zeros(1);
        Sample {
            t,
            q: z.clone(),
            dq: z.clone(),
            q_ref: z.clone(),
            e: DVector::from_element(1, e),
            edot: z.clone(),
            eps: z.clone(),
            epsdot: z.clone(),
            chi: z.clone(),
            xi: DVector::zeros(2),
            k: 0.0,
            gamma: 4.0,
            tau: z.clone(),
            u: z.clone(),
            d: z,
        }
    }

    #[test]
    fn zero_error_gives_zero_metrics() {
        let s: Vec<_> = (0..100).map(|k| sample(k as f64 * 0.1, 0.0)).collect();
        let m = metrics_from_samples(&s, 0.0, 2.0).unwrap();
        assert_eq!(m.mase_q_deg, vec![0.0]);
        assert_eq!(m.rmse_q_deg, vec![0.0]);
        assert_eq!(m.samples, 80);
    }

    #[test]
    fn constant_error() {
        let e = 0.1f64.to_radians();
        let s: Vec<_> = (0..100).map(|k| sample(k as f64 * 0.1, -e)).collect();
        let m = metrics_from_samples(&s, 0.0, 1.0).unwrap();
        for x in [m.mase_q_deg[0], m.mae_q_deg[0], m.rmse_q_deg[0]] {
            assert!((x - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn sawtooth_moments() {
        // e ramps from -a to a each period: MASE = a, RMSE = a / sqrt 3.
        let a = 2f64.to_radians();
        let per = 10_000;
        let s: Vec<_> = (0..5 * per)
            .map(|k| {
                let phase = (k % per) as f64 / (per - 1) as f64;
                sample(k as f64 * 1e-3, a * (2.0 * phase - 1.0))
            })
            .collect();
        let m = metrics_from_samples(&s, 0.0, 0.0).unwrap();
        assert!((m.mase_q_deg[0] - 2.0).abs() < 1e-12);
        assert!((m.rmse_q_deg[0] - 2.0 / 3f64.sqrt()).abs() < 1e-3);
        assert!((m.mae_q_deg[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn window_must_be_reached() {
        let s: Vec<_> = (0..10).map(|k| sample(k as f64 * 0.1, 0.0)).collect();
        assert!(matches!(
            metrics_from_samples(&s, 0.0, 2.0),
            Err(CoreError::InsufficientWindow { .. })
        ));
    }
}
