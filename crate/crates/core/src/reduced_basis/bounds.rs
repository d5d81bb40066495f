use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::thermal::InputPoint;

/// `alpha_LB(mu) = min_q mu_q / mu_bar_q` with reference `mu_bar = (1, ..., 1)`.
pub fn coercivity_lower_bound<T: Real>(mu: &InputPoint<T>) -> T {
    mu.min()
}

/// `gamma_UB(mu) = max_q mu_q`, the matching continuity bound.
pub fn continuity_upper_bound<T: Real>(mu: &InputPoint<T>) -> T {
    mu.max()
}

/// Rigorous upper and lower error bounds derived from the Riesz residual norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundSet<T> {
    /// `r / sqrt(alpha_LB)`, bounds the energy-norm error.
    pub energy: T,
    /// `r / alpha_LB`, bounds the X-norm error.
    pub x_norm: T,
    /// `r^2 / alpha_LB`, bounds the compliant output error.
    pub output: T,
    pub energy_lb: T,
    pub x_norm_lb: T,
    pub output_lb: T,
    pub residual_riesz: T,
    pub residual_euclid: T,
    pub alpha_lb: T,
    pub gamma_ub: T,
}

impl<T: Real> BoundSet<T> {
    pub fn new(mu: &InputPoint<T>, residual_riesz: T, residual_euclid: T) -> Self {
        let alpha = coercivity_lower_bound(mu);
        let gamma = continuity_upper_bound(mu);
        let r = residual_riesz;
        Self {
            energy: r / alpha.sqrt(),
            x_norm: r / alpha,
            output: r * r / alpha,
            energy_lb: r / gamma.sqrt(),
            x_norm_lb: r / gamma,
            output_lb: r * r / gamma,
            residual_riesz,
            residual_euclid,
            alpha_lb: alpha,
            gamma_ub: gamma,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_from_extreme_components() {
        let one = InputPoint::uniform(1.0);
        assert_eq!(coercivity_lower_bound(&one), 1.0);
        assert_eq!(continuity_upper_bound(&one), 1.0);
        let mu = InputPoint::new(vec![0.1, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(coercivity_lower_bound(&mu), 0.1);
        assert_eq!(continuity_upper_bound(&mu), 10.0);
    }

    #[test]
    fn bound_set_ordering() {
        let mu = InputPoint::new(vec![0.5, 2.0, 1.0, 3.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let b = BoundSet::new(&mu, 0.3, 0.2);
        assert!(b.energy >= b.energy_lb && b.x_norm >= b.x_norm_lb && b.output >= b.output_lb);
        assert!((b.output - 0.09_f64 / 0.5).abs() < 1e-15);
        let at_one = BoundSet::new(&InputPoint::uniform(1.0), 0.3, 0.2);
        assert_eq!(at_one.energy, 0.3);
        assert_eq!(at_one.x_norm, 0.3);
    }
}
