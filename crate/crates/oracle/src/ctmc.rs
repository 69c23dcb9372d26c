//! Two-state chain through the matrix exponential of its generator.

use nalgebra::Matrix2;

/// `P(t) = exp(Q t)` with state 0 = IDLE, 1 = ACTIVE, `lambda` the rate of
/// leaving IDLE and `mu` the rate of leaving ACTIVE.
pub fn transition_matrix(lambda: f64, mu: f64, t: f64) -> Matrix2<f64> {
    let q = Matrix2::new(-lambda, lambda, mu, -mu);
    (q * t).exp()
}

/// `Pr{X(t) = ACTIVE | X(0) = from}`.
pub fn active_prob(lambda: f64, mu: f64, t: f64, from_active: bool) -> f64 {
    transition_matrix(lambda, mu, t)[(usize::from(from_active), 1)]
}
