use serde::{Deserialize, Serialize};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Entries with a non-finite gradient keep
/// their parameter and moments unchanged; the number of such entries is
/// returned.
///
/// # Panics
///
/// If `params`, `grads`, and the state have different lengths.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> usize {
    assert_eq!(params.len(), grads.len(), "one gradient per parameter");
    assert_eq!(params.len(), state.m.len(), "optimizer state does not match the parameters");
    state.step += 1;
    let c1 = 1.0 - BETA1.powf(state.step as f64);
    let c2 = 1.0 - BETA2.powf(state.step as f64);
    let mut skipped = 0;
    for i in 0..params.len() {
        let g = grads[i];
        if !g.is_finite() {
            skipped += 1;
            continue;
        }
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    skipped
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = [0.5];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, 0.003);
        assert!((0.5 - p[0] - 0.003).abs() < 1e-9);
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut p = [0.5, -2.0];
        let mut s = AdamState::new(2);
        for _ in 0..10 {
            adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1);
        }
        assert_eq!(p, [0.5, -2.0]);
    }

    #[test]
    fn identical_histories_give_identical_updates() {
        let mut p = [1.0, 1.0];
        let mut s = AdamState::new(2);
        for g in [0.3, -1.2, 4.0, 0.01] {
            adam_step(&mut p, &[g, g], &mut s, 0.01);
        }
        assert_eq!(p[0].to_bits(), p[1].to_bits());
    }

    #[test]
    fn non_finite_gradients_are_skipped() {
        let mut p = [1.0, 1.0];
        let mut s = AdamState::new(2);
        let skipped = adam_step(&mut p, &[f64::NAN, 1.0], &mut s, 0.01);
        assert_eq!(skipped, 1);
        assert_eq!(p[0], 1.0);
        assert_eq!((s.m[0], s.v[0]), (0.0, 0.0));
        assert!(p[1] < 1.0);
    }
}
