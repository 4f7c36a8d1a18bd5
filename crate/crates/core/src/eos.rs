//! Isentropic gamma-law internal energy.
//!
//! Only `f(rho) = rho^gamma / gamma` is implemented. Other convex or
//! non-convex internal energies would enter here.

use serde::{Deserialize, Serialize};

use crate::error::{QhdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaLaw {
    gamma: f64,
}

impl GammaLaw {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(QhdError::InvalidParameter {
                name: "gamma",
                reason: format!("pressure exponent must satisfy gamma > 1, got {gamma}"),
            });
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `rho^(gamma-1)`, with `0^(gamma-1) = 0`.
    #[inline]
    pub fn rho_pow_gm1(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            0.0
        } else {
            rho.powf(self.gamma - 1.0)
        }
    }

    /// Internal energy density `f(rho)`.
    #[inline]
    pub fn internal_energy(&self, rho: f64) -> f64 {
        rho * self.rho_pow_gm1(rho) / self.gamma
    }

    /// Enthalpy `f'(rho)`.
    #[inline]
    pub fn enthalpy(&self, rho: f64) -> f64 {
        self.rho_pow_gm1(rho)
    }

    /// Pressure `p(rho) = rho f'(rho) - f(rho)`.
    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        (1.0 - 1.0 / self.gamma) * rho * self.rho_pow_gm1(rho)
    }

    /// Decay exponent `min{1, (gamma-1)/2}`.
    pub fn dispersive_sigma(&self) -> f64 {
        (0.5 * (self.gamma - 1.0)).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_gamma_at_or_below_one() {
        assert!(GammaLaw::new(1.0).is_err());
        assert!(GammaLaw::new(0.5).is_err());
        assert!(GammaLaw::new(f64::NAN).is_err());
    }

    #[test]
    fn pressure_relation() {
        let law = GammaLaw::new(2.5).unwrap();
        for rho in [0.0, 0.1, 1.0, 3.0] {
            let p = rho * law.enthalpy(rho) - law.internal_energy(rho);
            assert!((law.pressure(rho) - p).abs() < 1e-14);
        }
        assert_eq!(law.enthalpy(0.0), 0.0);
    }

    #[test]
    fn sigma_branches() {
        assert_eq!(GammaLaw::new(2.0).unwrap().dispersive_sigma(), 0.5);
        assert_eq!(GammaLaw::new(3.0).unwrap().dispersive_sigma(), 1.0);
        assert_eq!(GammaLaw::new(4.0).unwrap().dispersive_sigma(), 1.0);
        assert_eq!(GammaLaw::new(1.5).unwrap().dispersive_sigma(), 0.25);
    }
}
