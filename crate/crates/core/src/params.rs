use serde::Serialize;

use crate::error::{Error, Result};

/// Physical constants of the fluid-particle system plus the penalty scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhysParams {
    /// Shear viscosity.
    pub mu: f64,
    /// Second viscosity coefficient.
    pub lambda: f64,
    /// Pressure coefficient in `p = a rho^gamma`.
    pub a_pressure: f64,
    /// Adiabatic exponent.
    pub gamma: f64,
    /// Coupling of the fluid density to the external potential.
    pub beta: f64,
    /// Exponent of the logarithmic factor in the spatial weight.
    pub sigma0: f64,
    /// Exponent applied to the weight in the density norms.
    pub a_weight: f64,
    /// Sobolev exponent of the `W^{1,q}` norm.
    pub q: f64,
    /// Penalty scale `R`: damping `u / R` and the density lift `exp(-|x|^2) / R`.
    pub r_penalty: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            mu: 0.1,
            lambda: 0.0,
            a_pressure: 1.0,
            gamma: 1.4,
            beta: 1.0,
            sigma0: 1.0,
            a_weight: 1.5,
            q: 3.0,
            r_penalty: 4.0,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: String) -> Result<()> {
            Err(Error::InvalidParam { name, reason })
        }
        let all = [
            self.mu,
            self.lambda,
            self.a_pressure,
            self.gamma,
            self.beta,
            self.sigma0,
            self.a_weight,
            self.q,
            self.r_penalty,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("phys", "all physical constants must be finite".into());
        }
        if self.mu <= 0.0 {
            return bad("mu", format!("must be > 0, got {}", self.mu));
        }
        if self.lambda + self.mu < 0.0 {
            return bad("lambda", format!("lambda + mu must be >= 0, got {}", self.lambda + self.mu));
        }
        if self.a_pressure <= 0.0 {
            return bad("a_pressure", format!("must be > 0, got {}", self.a_pressure));
        }
        if self.gamma <= 1.0 {
            return bad("gamma", format!("must be > 1, got {}", self.gamma));
        }
        if self.sigma0 <= 0.0 {
            return bad("sigma0", format!("must be > 0, got {}", self.sigma0));
        }
        if self.a_weight <= 1.0 {
            return bad("a_weight", format!("must be > 1, got {}", self.a_weight));
        }
        if self.q <= 2.0 {
            return bad("q", format!("must be > 2, got {}", self.q));
        }
        if self.r_penalty <= 0.0 {
            return bad("r_penalty", format!("must be > 0, got {}", self.r_penalty));
        }
        Ok(())
    }

    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        self.a_pressure * rho.max(0.0).powf(self.gamma)
    }

    /// Isentropic sound speed `sqrt(a gamma rho^(gamma-1))`.
    #[inline]
    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.a_pressure * self.gamma * rho.max(0.0).powf(self.gamma - 1.0)).sqrt()
    }

    /// Pressure potential `a rho^gamma / (gamma - 1)`.
    #[inline]
    pub fn pressure_potential(&self, rho: f64) -> f64 {
        self.pressure(rho) / (self.gamma - 1.0)
    }

    #[inline]
    pub fn longitudinal_viscosity(&self) -> f64 {
        2.0 * self.mu + self.lambda
    }

    #[inline]
    pub fn inv_r(&self) -> f64 {
        1.0 / self.r_penalty
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_admissible() {
        PhysParams::default().validate().unwrap();
    }

    #[test]
    fn viscosity_condition_is_enforced() {
        let p = PhysParams {
            mu: 0.1,
            lambda: -0.2,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = PhysParams {
            mu: 0.1,
            lambda: -0.1,
            ..Default::default()
        };
        p.validate().unwrap();
        let p = PhysParams {
            mu: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn exponent_ranges_are_enforced() {
        for p in [
            PhysParams { gamma: 1.0, ..Default::default() },
            PhysParams { a_weight: 1.0, ..Default::default() },
            PhysParams { q: 2.0, ..Default::default() },
            PhysParams { sigma0: 0.0, ..Default::default() },
            PhysParams { r_penalty: -1.0, ..Default::default() },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn vacuum_has_zero_pressure() {
        let p = PhysParams::default();
        assert_eq!(p.pressure(0.0), 0.0);
        assert_eq!(p.sound_speed(0.0), 0.0);
        assert_eq!(p.pressure(1.0), 1.0);
    }
}
