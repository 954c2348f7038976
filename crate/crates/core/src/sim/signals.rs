//! Seeded disturbance and measurement-noise realisations.

use nalgebra::DVector;
use ptpb_control::{lit, to_f64, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::scenario::{NoiseSpec, ReferenceSpec};

const NOISE_DOMAIN: u64 = 0x6e6f_6973_655f_7331;

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Disturbance sample for step `index`: i.i.d. uniform on `[-max_i, max_i]`.
///
/// Each step owns its own stream, so the value depends only on `(seed, index)`.
pub fn uniform_disturbance<T: Real>(max: &DVector<T>, index: usize, seed: u64) -> DVector<T> {
    let mut rng = stream(seed, index);
    DVector::from_fn(max.len(), |i, _| {
        let m = to_f64(max[i]);
        if m == 0.0 {
            T::zero()
        } else {
            lit(rng.random_range(-m..=m))
        }
    })
}

/// Noise standard deviations `(sigma_q, sigma_dq)` per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseLevels<T: Real> {
    pub q: DVector<T>,
    pub dq: DVector<T>,
}

/// `RMS(reference channel over the run) 10^(-snr/20)` for every position and velocity channel.
pub fn noise_levels<T: Real>(
    reference: &ReferenceSpec<T>,
    db: T,
    t0: T,
    dt: T,
    steps: usize,
) -> NoiseLevels<T> {
    let n = reference.dim();
    let mut sq = vec![0f64; n];
    let mut sdq = vec![0f64; n];
    for k in 0..=steps {
        let r = reference.at(t0 + lit::<T>(k as f64) * dt);
        for i in 0..n {
            sq[i] += to_f64(r.q[i]).powi(2);
            sdq[i] += to_f64(r.dq[i]).powi(2);
        }
    }
    let scale = 10f64.powf(-to_f64(db) / 20.0);
    let count = (steps + 1) as f64;
    NoiseLevels {
        q: DVector::from_fn(n, |i, _| lit((sq[i] / count).sqrt() * scale)),
        dq: DVector::from_fn(n, |i, _| lit((sdq[i] / count).sqrt() * scale)),
    }
}

/// Noise sample for step `index`: zero-mean Gaussian with the given deviations.
pub fn noise_sample<T: Real>(
    levels: &NoiseLevels<T>,
    index: usize,
    seed: u64,
) -> (DVector<T>, DVector<T>) {
    let mut rng = stream(seed ^ NOISE_DOMAIN, index);
    let mut draw = |s: &DVector<T>| {
        DVector::from_fn(s.len(), |i, _| {
            let sd = to_f64(s[i]);
            if sd > 0.0 {
                let normal = Normal::new(0.0, sd).expect("finite positive deviation");
                lit(normal.sample(&mut rng))
            } else {
                T::zero()
            }
        })
    };
    let nq = draw(&levels.q);
    let ndq = draw(&levels.dq);
    (nq, ndq)
}

/// Adds the noise sample of step `index` to a state; a `None` spec leaves it unchanged.
pub fn add_measurement_noise<T: Real>(
    q: &DVector<T>,
    dq: &DVector<T>,
    spec: &NoiseSpec<T>,
    levels: Option<&NoiseLevels<T>>,
    index: usize,
) -> (DVector<T>, DVector<T>) {
    match (spec, levels) {
        (NoiseSpec::Snr { seed, .. }, Some(l)) => {
            let (nq, ndq) = noise_sample(l, index, *seed);
            (q + nq, dq + ndq)
        }
        _ => (q.clone(), dq.clone()),
    }
}
