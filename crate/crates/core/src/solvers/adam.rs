//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Updates `params` in place from `grads` and advances `state` by one step.
    pub fn step<T: Real>(&self, params: &mut [T], grads: &[T], state: &mut AdamState<T>) {
        assert_eq!(params.len(), grads.len());
        state.ensure_len(params.len());
        state.timestep += 1;

        let t = state.timestep as i32;
        let b1 = T::lit(self.beta1);
        let b2 = T::lit(self.beta2);
        let one = T::one();
        let bc1 = T::lit(1.0 - self.beta1.powi(t));
        let bc2 = T::lit(1.0 - self.beta2.powi(t));
        let lr = T::lit(self.learning_rate);
        let eps = T::lit(self.epsilon);

        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(state.m.iter_mut().zip(state.v.iter_mut()))
        {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState<T: Real> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub timestep: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            timestep: 0,
        }
    }

    fn ensure_len(&mut self, len: usize) {
        if self.m.len() != len {
            assert_eq!(self.timestep, 0, "parameter count changed mid-optimization");
            *self = Self::new(len);
        }
    }
}

/// Free-function form: one Adam step with explicit hyperparameters.
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) {
    Adam {
        learning_rate: lr,
        beta1,
        beta2,
        epsilon,
    }
    .step(params, grads, state);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let adam = Adam::new(0.01);
        let mut p = vec![1.0f64, -2.0, 0.5, 3.0];
        let g = vec![0.3, -7.0, 1e-3, -0.02];
        let before = p.clone();
        let mut st = AdamState::new(4);
        adam.step(&mut p, &g, &mut st);
        for i in 0..4 {
            let delta = p[i] - before[i];
            assert!((delta + 0.01 * g[i].signum()).abs() < 1e-6, "{delta}");
            assert!(delta.abs() <= 0.01 * (1.0 + 1e-6));
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let adam = Adam::new(0.1);
        let mut p = vec![0.25f64; 3];
        let mut st = AdamState::new(3);
        for _ in 0..50 {
            adam.step(&mut p, &[0.0; 3], &mut st);
        }
        assert_eq!(p, vec![0.25; 3]);
    }

    #[test]
    fn scalar_quadratic_converges() {
        // Oracle: the same recursion written out by hand for L = x².
        let (lr, b1, b2, eps) = (0.1f64, 0.9f64, 0.999f64, 1e-8f64);
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=200 {
            let g = 2.0 * x;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            x -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        assert!(x.abs() < 0.01);

        let mut p = [1.0f64];
        let mut st = AdamState::new(1);
        for _ in 0..200 {
            let g = [2.0 * p[0]];
            adam_step(&mut p, &g, &mut st, lr, b1, b2, eps);
        }
        assert!(p[0].abs() < 0.01);
        assert!((p[0] - x).abs() < 1e-15);
    }
}
