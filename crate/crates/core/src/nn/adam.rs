//! Adam with bias correction.

use alloc::vec;
use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{shape, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(shape(
                alloc::format!("{} parameters and gradients", self.m.len()),
                alloc::format!("{} / {}", params.len(), grads.len()),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, 0.001);
        let mut p = [1.0, -2.0, 0.5];
        s.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, [1.0, -2.0, 0.5]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_closed_form() {
        let mut s = AdamState::new(1, 0.001);
        let mut p = [1.0];
        s.step(&mut p, &[0.5]).unwrap();
        let want = 1.0 - 0.001 * 0.5 / (0.5 + 1e-8);
        assert!((p[0] - want).abs() < 1e-15);
        assert!((p[0] - 0.999).abs() < 1e-10);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut s = AdamState::new(1, 0.001);
        let mut x = [3.0];
        let f = |x: f64| x * x;
        let f0 = f(x[0]);
        let g = [2.0 * x[0]];
        s.step(&mut x, &g).unwrap();
        let f1 = f(x[0]);
        let g = [2.0 * x[0]];
        s.step(&mut x, &g).unwrap();
        let f2 = f(x[0]);
        assert!(f1 < f0 && f2 < f1);
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(2, 0.001);
        assert!(s.step(&mut [0.0; 3], &[0.0; 3]).is_err());
    }
}
