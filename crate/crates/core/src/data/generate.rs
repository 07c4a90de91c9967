//! Seeded synthetic datasets. Positive and negative traces alternate, so
//! any prefix of the trace list is close to balanced.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::stl::Trace;

use super::{DataError, Dataset, LabelKind};

/// Length of every trace from [`gen_interval`].
pub const INTERVAL_TRACE_LEN: usize = 7;

fn check_even(n: usize) -> Result<(), DataError> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(DataError::Invalid(format!("trace count must be even and positive, got {n}")));
    }
    Ok(())
}

fn label_of(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn finish(traces: Vec<Trace>, feature: &str, provenance: String) -> Result<Dataset, DataError> {
    Dataset::with_kind(traces, vec![feature.to_owned()], LabelKind::Binary, provenance)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepThresholdParams {
    pub n: usize,
    pub len: usize,
    pub c_pos: f64,
    pub c_neg: f64,
    /// half-width of the uniform noise around each level
    pub noise: f64,
}

impl Default for StepThresholdParams {
    fn default() -> Self {
        StepThresholdParams {
            n: 100,
            len: 20,
            c_pos: 1.0,
            c_neg: -0.8,
            noise: 0.1,
        }
    }
}

/// Positives sit near `c_pos` and negatives near `c_neg` at every step.
pub fn gen_step_threshold(p: &StepThresholdParams, seed: u64) -> Result<Dataset, DataError> {
    check_even(p.n)?;
    if p.len < 2 {
        return Err(DataError::Invalid("traces need at least 2 steps".into()));
    }
    if p.noise < 0.0 {
        return Err(DataError::Invalid("noise must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traces = (0..p.n)
        .map(|i| {
            let label = label_of(i);
            let level = if label > 0.0 { p.c_pos } else { p.c_neg };
            let xs: Vec<f64> = (0..p.len)
                .map(|_| level + if p.noise > 0.0 { rng.gen_range(-p.noise..=p.noise) } else { 0.0 })
                .collect();
            Trace::scalar(format!("s{i:05}"), &xs, label).map_err(DataError::from)
        })
        .collect::<Result<_, _>>()?;
    finish(
        traces,
        "x0",
        format!("gen_step_threshold(n={}, T={}, c_pos={}, c_neg={}, noise={}, seed={seed})", p.n, p.len, p.c_pos, p.c_neg, p.noise),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CctParams {
    pub n: usize,
    pub len: usize,
}

impl Default for CctParams {
    fn default() -> Self {
        CctParams { n: 400, len: 100 }
    }
}

/// Cruise-control speed traces in m/s.
///
/// Every trace oscillates around 25 m/s: a sinusoid with random period,
/// phase and amplitude plus a mean-reverting (discretized Ornstein-Uhlenbeck)
/// disturbance, clipped to `[22.5, 27.5]`. Negative traces additionally
/// drift upward linearly after a random onset in the first 60% of the trace.
/// The drift is sized so the last value is at least a per-trace target drawn
/// from `[35, 45)` m/s.
pub fn gen_cct(p: &CctParams, seed: u64) -> Result<Dataset, DataError> {
    check_even(p.n)?;
    if p.len < 10 {
        return Err(DataError::Invalid("cct traces need at least 10 steps".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shock = Normal::new(0.0, 0.35).expect("valid normal");
    let t_len = p.len;
    let traces = (0..p.n)
        .map(|i| {
            let label = label_of(i);
            let period = rng.gen_range(12.0..30.0);
            let phase = rng.gen_range(0.0..2.0 * PI);
            let amp = rng.gen_range(1.2..2.2);
            let mut ou: f64 = 0.0;
            let (onset, end) = if label < 0.0 {
                let lo = (t_len as f64 * 0.2) as usize;
                let hi = (t_len as f64 * 0.6) as usize;
                (rng.gen_range(lo..hi), rng.gen_range(35.0..45.0))
            } else {
                (t_len, 0.0)
            };
            let xs: Vec<f64> = (0..t_len)
                .map(|t| {
                    ou = 0.8 * ou + shock.sample(&mut rng);
                    let base = (25.0 + amp * (2.0 * PI * t as f64 / period + phase).sin() + ou).clamp(22.5, 27.5);
                    if t > onset {
                        let frac = (t - onset) as f64 / (t_len - 1 - onset) as f64;
                        base + (end - 22.5) * frac
                    } else {
                        base
                    }
                })
                .collect();
            Trace::scalar(format!("c{i:05}"), &xs, label).map_err(DataError::from)
        })
        .collect::<Result<_, _>>()?;
    finish(traces, "v", format!("gen_cct(n={}, T={}, seed={seed})", p.n, t_len))
}

/// Seven-step traces separable by the value on steps 1 and 2.
///
/// Negatives are uniform in `[0, 0.5)` on steps 1..=5. Positives are uniform
/// in `[0.5, 1]` on steps 1..=2 and in `[0, 0.5)` on steps 3..=5. Steps 0 and
/// 6 are uniform in `[0, 1)` for both classes.
pub fn gen_interval(n: usize, seed: u64) -> Result<Dataset, DataError> {
    check_even(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traces = (0..n)
        .map(|i| {
            let label = label_of(i);
            let xs: Vec<f64> = (0..INTERVAL_TRACE_LEN)
                .map(|t| match t {
                    1 | 2 if label > 0.0 => rng.gen_range(0.5..=1.0),
                    1..=5 => rng.gen_range(0.0..0.5),
                    _ => rng.gen_range(0.0..1.0),
                })
                .collect();
            Trace::scalar(format!("i{i:05}"), &xs, label).map_err(DataError::from)
        })
        .collect::<Result<_, _>>()?;
    finish(traces, "x0", format!("gen_interval(n={n}, seed={seed})"))
}
