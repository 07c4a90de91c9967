//! Robust and boolean semantics over discrete-time traces.
//!
//! Two evaluators are provided. [`robustness`] follows the windowed
//! definition directly (sup/inf over the masked past), and
//! [`robustness_recurrent`] uses the single-memory recurrences
//!
//! ```text
//! F:  r[t] = max(phi[t], r[t-1])            r[-1] = -H
//! G:  r[t] = min(phi[t], r[t-1])            r[-1] = +H
//! S:  r[t] = min(phi[t], max(r[t-1], psi[t]))   r[-1] = -H
//! ```
//!
//! where `H` is a finite stand-in for infinity. The two agree exactly on
//! formulas with unbounded masks.

use super::formula::{Formula, IntervalMask};
use super::trace::Trace;
use super::StlError;

/// Default finite surrogate for infinity.
pub const DEFAULT_INFINITY: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    /// Returned for empty windows (`-H` for F and S, `+H` for G).
    pub infinity: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            infinity: DEFAULT_INFINITY,
        }
    }
}

fn check_dims(f: &Formula, tr: &Trace) -> Result<(), StlError> {
    for a in f.atoms() {
        if a.weights.len() != tr.dim() {
            return Err(StlError::DimensionMismatch {
                expected: tr.dim(),
                found: a.weights.len(),
            });
        }
    }
    Ok(())
}

fn windowed(
    f: &Formula,
    tr: &Trace,
    inf: f64,
    atom_value: &impl Fn(f64) -> f64,
) -> Vec<f64> {
    let n = tr.len();
    match f {
        Formula::Atom(a) => tr.rows().map(|r| atom_value(a.eval(r))).collect(),
        Formula::Not(g) => windowed(g, tr, inf, atom_value).into_iter().map(|v| -v).collect(),
        Formula::And(l, r) => {
            let (l, r) = (windowed(l, tr, inf, atom_value), windowed(r, tr, inf, atom_value));
            l.iter().zip(&r).map(|(a, b)| a.min(*b)).collect()
        }
        Formula::Or(l, r) => {
            let (l, r) = (windowed(l, tr, inf, atom_value), windowed(r, tr, inf, atom_value));
            l.iter().zip(&r).map(|(a, b)| a.max(*b)).collect()
        }
        Formula::Once(m, g) => {
            let phi = windowed(g, tr, inf, atom_value);
            (0..n)
                .map(|t| m.offsets_at(t).map(|k| phi[t - k]).fold(-inf, f64::max))
                .collect()
        }
        Formula::Hist(m, g) => {
            let phi = windowed(g, tr, inf, atom_value);
            (0..n)
                .map(|t| m.offsets_at(t).map(|k| phi[t - k]).fold(inf, f64::min))
                .collect()
        }
        Formula::Since(m, l, r) => {
            let phi = windowed(l, tr, inf, atom_value);
            let psi = windowed(r, tr, inf, atom_value);
            (0..n)
                .map(|t| {
                    m.offsets_at(t)
                        .map(|k| {
                            let start = t - k;
                            // left operand must hold on the closed window [t', t]
                            let hold = phi[start..=t].iter().copied().fold(inf, f64::min);
                            psi[start].min(hold)
                        })
                        .fold(-inf, f64::max)
                })
                .collect()
        }
    }
}

/// Robustness at every step, from the windowed definition.
pub fn robustness(f: &Formula, tr: &Trace) -> Result<Vec<f64>, StlError> {
    robustness_with(f, tr, &MonitorConfig::default())
}

pub fn robustness_with(f: &Formula, tr: &Trace, cfg: &MonitorConfig) -> Result<Vec<f64>, StlError> {
    check_dims(f, tr)?;
    Ok(windowed(f, tr, cfg.infinity, &|v| v))
}

/// Robustness at the final step, the point at which traces are classified.
pub fn final_robustness(f: &Formula, tr: &Trace) -> Result<f64, StlError> {
    Ok(*robustness(f, tr)?.last().expect("traces are non-empty"))
}

fn recurrent(f: &Formula, tr: &Trace, inf: f64) -> Result<Vec<f64>, StlError> {
    let out = match f {
        Formula::Atom(a) => tr.rows().map(|r| a.eval(r)).collect(),
        Formula::Not(g) => recurrent(g, tr, inf)?.into_iter().map(|v| -v).collect(),
        Formula::And(l, r) => {
            let (l, r) = (recurrent(l, tr, inf)?, recurrent(r, tr, inf)?);
            l.iter().zip(&r).map(|(a, b)| a.min(*b)).collect()
        }
        Formula::Or(l, r) => {
            let (l, r) = (recurrent(l, tr, inf)?, recurrent(r, tr, inf)?);
            l.iter().zip(&r).map(|(a, b)| a.max(*b)).collect()
        }
        Formula::Once(IntervalMask::Unbounded, g) => {
            let mut mem = -inf;
            recurrent(g, tr, inf)?
                .into_iter()
                .map(|v| {
                    mem = v.max(mem);
                    mem
                })
                .collect()
        }
        Formula::Hist(IntervalMask::Unbounded, g) => {
            let mut mem = inf;
            recurrent(g, tr, inf)?
                .into_iter()
                .map(|v| {
                    mem = v.min(mem);
                    mem
                })
                .collect()
        }
        Formula::Since(IntervalMask::Unbounded, l, r) => {
            let phi = recurrent(l, tr, inf)?;
            let psi = recurrent(r, tr, inf)?;
            let mut mem = -inf;
            phi.iter()
                .zip(&psi)
                .map(|(p, q)| {
                    mem = p.min(mem.max(*q));
                    mem
                })
                .collect()
        }
        Formula::Once(..) | Formula::Hist(..) | Formula::Since(..) => {
            return Err(StlError::BoundedMask)
        }
    };
    Ok(out)
}

/// Robustness at every step via the single-memory recurrences. Only
/// unbounded temporal operators are accepted.
pub fn robustness_recurrent(f: &Formula, tr: &Trace) -> Result<Vec<f64>, StlError> {
    robustness_recurrent_with(f, tr, &MonitorConfig::default())
}

pub fn robustness_recurrent_with(
    f: &Formula,
    tr: &Trace,
    cfg: &MonitorConfig,
) -> Result<Vec<f64>, StlError> {
    check_dims(f, tr)?;
    recurrent(f, tr, cfg.infinity)
}

/// `+1` when `v >= 0`, else `-1`.
pub fn sign(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Boolean semantics at step `t`: atoms are replaced by their sign and the
/// robust min/max rules are run unchanged, so every value stays in `{-1, +1}`.
pub fn boolean_eval(f: &Formula, tr: &Trace, t: usize) -> Result<i8, StlError> {
    check_dims(f, tr)?;
    if t >= tr.len() {
        return Err(StlError::TimeOutOfRange { t, len: tr.len() });
    }
    let v = windowed(f, tr, 1.0, &|v| f64::from(sign(v)))[t];
    Ok(if v > 0.0 { 1 } else { -1 })
}

/// Boolean semantics at every step.
pub fn boolean_signal(f: &Formula, tr: &Trace) -> Result<Vec<i8>, StlError> {
    check_dims(f, tr)?;
    Ok(windowed(f, tr, 1.0, &|v| f64::from(sign(v)))
        .into_iter()
        .map(|v| if v > 0.0 { 1 } else { -1 })
        .collect())
}
