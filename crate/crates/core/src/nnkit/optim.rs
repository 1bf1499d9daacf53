//! Adam with bias correction, plus the decay-and-reset learning-rate
//! schedule (decay 0.95 per update, reset to the base rate every 10).

use serde::{Deserialize, Serialize};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const BASE_LR: f64 = 0.001;

const LR_GAMMA: f64 = 0.95;
const LR_PERIOD: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptState {
    pub fn new(n_params: usize) -> Self {
        OptState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], st: &mut OptState, lr: f64) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), st.m.len());
    st.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(st.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(st.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        st.m[i] = ADAM_BETA1 * st.m[i] + (1.0 - ADAM_BETA1) * g;
        st.v[i] = ADAM_BETA2 * st.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let mhat = st.m[i] / bc1;
        let vhat = st.v[i] / bc2;
        params[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
    }
}

/// Learning rate at a given update counter: base * 0.95^(step mod 10).
pub fn lr_schedule(step: u64) -> f64 {
    BASE_LR * LR_GAMMA.powi((step % LR_PERIOD) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut p = vec![0.5, -0.25, 1.0];
        let g = vec![0.0; 3];
        let mut st = OptState::new(3);
        adam_step(&mut p, &g, &mut st, 0.001);
        assert_eq!(p, vec![0.5, -0.25, 1.0]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![0.0, 0.0];
        let g = vec![3.0, -0.01];
        let mut st = OptState::new(2);
        adam_step(&mut p, &g, &mut st, 0.001);
        // With bias correction the first step is lr * g/|g| up to epsilon.
        assert!((p[0] - (-0.001)).abs() < 1e-6);
        assert!((p[1] - 0.001).abs() < 1e-6);
    }

    #[test]
    fn deterministic_given_identical_state() {
        let run = || {
            let mut p = vec![0.3, -0.7];
            let mut st = OptState::new(2);
            for t in 0..20u64 {
                let g = vec![(t as f64).sin(), (t as f64).cos()];
                adam_step(&mut p, &g, &mut st, lr_schedule(t));
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn lr_schedule_values() {
        assert_eq!(lr_schedule(0), 0.001);
        assert!((lr_schedule(5) - 0.001 * 0.95f64.powi(5)).abs() < 1e-15);
        assert!((lr_schedule(5) - 7.7378e-4).abs() < 1e-7);
        assert_eq!(lr_schedule(10), 0.001);
        assert_eq!(lr_schedule(20), 0.001);
        assert_eq!(lr_schedule(13), lr_schedule(3));
    }
}
