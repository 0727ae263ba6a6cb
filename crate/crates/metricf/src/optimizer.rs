//! Adagrad with per-coordinate step sizes and sparse row updates.

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-8;

/// Adagrad accumulator for one parameter tensor (stored flat).
///
/// Only the coordinates a mini-batch touches are updated; there is no dense
/// decay pass, so untouched rows keep their parameters and accumulators.
#[derive(Debug, Clone)]
pub struct AdagradState {
    accum: Vec<f64>,
    pub eta: f64,
    pub eps: f64,
}

impl AdagradState {
    /// State for a tensor of `len` coordinates, accumulators all zero.
    pub fn new(len: usize, eta: f64) -> Self {
        Self {
            accum: vec![0.0; len],
            eta,
            eps: DEFAULT_EPS,
        }
    }

    pub fn with_eps(len: usize, eta: f64, eps: f64) -> Self {
        Self {
            accum: vec![0.0; len],
            eta,
            eps,
        }
    }

    pub fn len(&self) -> usize {
        self.accum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accum.is_empty()
    }

    pub fn accum(&self) -> &[f64] {
        &self.accum
    }

    /// Apply one Adagrad step to a contiguous slice of the tensor starting
    /// at coordinate `offset` (a row, or the whole tensor at offset 0):
    /// accum += g^2, then param -= eta * g / (sqrt(accum) + eps).
    ///
    /// `name` labels the parameter in numeric-error diagnostics.
    pub fn update_slice(
        &mut self,
        offset: usize,
        param: &mut [f64],
        grad: &[f64],
        name: &str,
    ) -> Result<()> {
        if param.len() != grad.len() || offset + param.len() > self.accum.len() {
            return Err(Error::Shape {
                what: "adagrad update",
                expected: param.len(),
                got: grad.len(),
            });
        }
        let acc = &mut self.accum[offset..offset + param.len()];
        let eta = self.eta;
        let eps = self.eps;
        for j in 0..param.len() {
            let g = grad[j];
            if !g.is_finite() {
                return Err(Error::Numeric {
                    what: format!("non-finite gradient in {name}"),
                    epoch: 0,
                    batch: 0,
                });
            }
            let a = acc[j] + g * g;
            acc[j] = a;
            param[j] -= eta * g / (a.sqrt() + eps);
        }
        Ok(())
    }
}

/// Whole-tensor convenience form: accum += grad^2 elementwise, then
/// param -= eta * grad / (sqrt(accum) + eps), in place.
pub fn adagrad_update(param: &mut [f64], grad: &[f64], state: &mut AdagradState) -> Result<()> {
    state.update_slice(0, param, grad, "parameter")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut param = vec![0.5, -1.0, 2.0];
        let grad = vec![0.0; 3];
        let mut state = AdagradState::new(3, 0.1);
        adagrad_update(&mut param, &grad, &mut state).unwrap();
        assert_eq!(param, vec![0.5, -1.0, 2.0]);
        assert_eq!(state.accum(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_step_hand_value() {
        // theta = 0, g = 1, eta = 0.05, accum 0 -> theta = -0.05 / (1 + 1e-8)
        let mut param = vec![0.0];
        let mut state = AdagradState::new(1, 0.05);
        adagrad_update(&mut param, &[1.0], &mut state).unwrap();
        let expect = -(0.05 * 1.0 / (1.0f64.sqrt() + DEFAULT_EPS));
        assert_eq!(param[0], expect);
        assert!((param[0] + 0.05).abs() < 1e-8);
        assert_eq!(state.accum()[0], 1.0);
    }

    #[test]
    fn second_constant_step_is_smaller() {
        let mut param = vec![0.0];
        let mut state = AdagradState::new(1, 0.05);
        adagrad_update(&mut param, &[1.0], &mut state).unwrap();
        let first = param[0].abs();
        let before = param[0];
        adagrad_update(&mut param, &[1.0], &mut state).unwrap();
        let second = (param[0] - before).abs();
        assert!(second < first);
        let expect = 0.05 / (2.0f64.sqrt() + DEFAULT_EPS);
        assert!((second - expect).abs() < 1e-15);
    }

    #[test]
    fn step_magnitudes_never_increase_under_constant_gradient() {
        let mut param = vec![0.0];
        let mut state = AdagradState::new(1, 0.3);
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let before = param[0];
            adagrad_update(&mut param, &[0.7], &mut state).unwrap();
            let step = (param[0] - before).abs();
            assert!(step <= last + 1e-18);
            assert!(step <= 0.3 / DEFAULT_EPS * 0.7);
            last = step;
        }
    }

    #[test]
    fn accum_is_monotone() {
        let mut param = vec![0.0, 0.0];
        let mut state = AdagradState::new(2, 0.1);
        let mut prev = state.accum().to_vec();
        for g in [[0.5, -0.2], [0.0, 1.0], [2.0, 0.0]] {
            adagrad_update(&mut param, &g, &mut state).unwrap();
            for (a, b) in state.accum().iter().zip(&prev) {
                assert!(a >= b);
            }
            prev = state.accum().to_vec();
        }
    }

    #[test]
    fn row_offset_updates_only_that_row() {
        // a 3x2 tensor updated one row at a time
        let mut param = [1.0; 6];
        let mut state = AdagradState::new(6, 0.1);
        state
            .update_slice(2, &mut param[2..4], &[1.0, -1.0], "row")
            .unwrap();
        assert_eq!(param[0], 1.0);
        assert_eq!(param[5], 1.0);
        assert!(param[2] < 1.0);
        assert!(param[3] > 1.0);
        assert_eq!(state.accum()[0], 0.0);
        assert_eq!(state.accum()[2], 1.0);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let mut param = vec![0.0];
        let mut state = AdagradState::new(1, 0.1);
        assert!(adagrad_update(&mut param, &[f64::NAN], &mut state).is_err());
        assert!(adagrad_update(&mut param, &[f64::INFINITY], &mut state).is_err());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut param = vec![0.0, 0.0];
        let mut state = AdagradState::new(1, 0.1);
        assert!(adagrad_update(&mut param, &[1.0, 1.0], &mut state).is_err());
    }
}
