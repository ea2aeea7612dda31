//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Real> AdamState<T> {
    /// Zero moments with the conventional `β1 = 0.9, β2 = 0.999, ε = 1e-8`.
    pub fn new(len: usize, learning_rate: T) -> Self {
        Self::with_hyper(len, learning_rate, T::lit(DEFAULT_BETA1), T::lit(DEFAULT_BETA2), T::lit(DEFAULT_EPSILON))
    }

    pub fn with_hyper(len: usize, learning_rate: T, beta1: T, beta2: T, epsilon: T) -> Self {
        assert!(learning_rate > T::zero(), "learning rate must be positive");
        assert!(beta1 > T::zero() && beta1 < T::one(), "beta1 must lie in (0, 1)");
        assert!(beta2 > T::zero() && beta2 < T::one(), "beta2 must lie in (0, 1)");
        assert!(epsilon > T::zero(), "epsilon must be positive");
        Self {
            first_moment: vec![T::zero(); len],
            second_moment: vec![T::zero(); len],
            step_count: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        }
    }
}

/// One Adam update minimizing the loss whose gradient is `gradient`.
///
/// The state is left untouched when the gradient contains non-finite entries.
pub fn adam_step<T: Real>(state: &mut AdamState<T>, param: &mut [T], gradient: &[T]) -> Result<()> {
    if param.len() != gradient.len() || param.len() != state.first_moment.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam: param {} / gradient {} / moments {}",
            param.len(),
            gradient.len(),
            state.first_moment.len()
        )));
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged("non-finite gradient passed to adam_step".into()));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = T::one() - b1.powi(t);
    let bc2 = T::one() - b2.powi(t);
    for k in 0..param.len() {
        let g = gradient[k];
        let m = b1 * state.first_moment[k] + (T::one() - b1) * g;
        let v = b2 * state.second_moment[k] + (T::one() - b2) * g * g;
        state.first_moment[k] = m;
        state.second_moment[k] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        param[k] = param[k] - state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}
