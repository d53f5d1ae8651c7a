//! Closed-form initial targets `(rho0, u0, eta0)` and their derivatives.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::config::{InitFamily, SwirlSpec};

/// Standard smooth bump `exp(-1 / (1 - s^2))` on `s < 1`, zero outside.
#[inline]
pub fn bump(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// `integral over the unit disk of bump(|x|)`, equal to `pi * int_0^1 exp(-1/u) du`.
pub fn unit_bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        // Composite Simpson on [0, 1]; the integrand is flat to all orders at 0.
        let n = 20_000;
        let h = 1.0 / n as f64;
        let f = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
        let mut s = f(0.0) + f(1.0);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(k as f64 * h);
        }
        PI * s * h / 3.0
    })
}

impl SwirlSpec {
    pub fn value(&self, x: f64, y: f64) -> [f64; 2] {
        let g = self.amp * (-(x * x + y * y) / (2.0 * self.width * self.width)).exp();
        [g * (-y + self.compress * x), g * (x + self.compress * y)]
    }

    /// `[[d1 u1, d2 u1], [d1 u2, d2 u2]]`
    pub fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let w2 = self.width * self.width;
        let g = self.amp * (-(x * x + y * y) / (2.0 * w2)).exp();
        let (gx, gy) = (-x / w2 * g, -y / w2 * g);
        let p = -y + self.compress * x;
        let q = x + self.compress * y;
        [
            [gx * p + g * self.compress, gy * p - g],
            [gx * q + g, gy * q + g * self.compress],
        ]
    }
}

impl InitFamily {
    pub fn rho(&self, x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        match *self {
            InitFamily::Zero => 0.0,
            InitFamily::Gaussian { rho_width, .. } => {
                let s2 = rho_width * rho_width;
                (-r2 / (2.0 * s2)).exp() / (2.0 * PI * s2)
            }
            InitFamily::VacuumBump { bump_radius, .. } => {
                bump(r2.sqrt() / bump_radius) / (bump_radius * bump_radius * unit_bump_mass())
            }
            InitFamily::Smooth {
                rho_background,
                rho_amp,
                rho_width,
                ..
            } => rho_background + rho_amp * (-r2 / (2.0 * rho_width * rho_width)).exp(),
        }
    }

    pub fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        match self.swirl() {
            Some(s) => s.value(x, y),
            None => [0.0, 0.0],
        }
    }

    pub fn velocity_jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        match self.swirl() {
            Some(s) => s.jacobian(x, y),
            None => [[0.0; 2]; 2],
        }
    }

    pub fn eta(&self, x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        match *self {
            InitFamily::Zero => 0.0,
            InitFamily::Gaussian {
                eta_amp, eta_width, ..
            } => eta_amp * (-r2 / (2.0 * eta_width * eta_width)).exp(),
            InitFamily::VacuumBump {
                eta_amp, eta_radius, ..
            } => eta_amp * bump(r2.sqrt() / eta_radius) * std::f64::consts::E,
            InitFamily::Smooth {
                eta_background,
                eta_amp,
                eta_width,
                ..
            } => eta_background + eta_amp * (-r2 / (2.0 * eta_width * eta_width)).exp(),
        }
    }

    fn swirl(&self) -> Option<SwirlSpec> {
        match *self {
            InitFamily::Zero => None,
            InitFamily::Gaussian { velocity, .. }
            | InitFamily::VacuumBump { velocity, .. }
            | InitFamily::Smooth { velocity, .. } => Some(velocity),
        }
    }

    /// Whether the target density has unit total mass on the whole plane.
    pub fn is_mass_normalized(&self) -> bool {
        matches!(self, InitFamily::Gaussian { .. } | InitFamily::VacuumBump { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_mass_matches_exponential_integral() {
        // pi * (exp(-1) - E1(1)), E1(1) = 0.219383934395520...
        let expected = PI * ((-1.0_f64).exp() - 0.219_383_934_395_520_3);
        assert!((unit_bump_mass() - expected).abs() < 1e-12);
    }

    #[test]
    fn vacuum_bump_has_compact_support() {
        let fam = InitFamily::VacuumBump {
            bump_radius: 0.5,
            velocity: SwirlSpec::default(),
            eta_amp: 1.0,
            eta_radius: 0.5,
        };
        assert_eq!(fam.rho(0.5, 0.0), 0.0);
        assert_eq!(fam.rho(0.3, 0.4), 0.0);
        assert!(fam.rho(0.1, 0.1) > 0.0);
        assert!((fam.eta(0.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn swirl_jacobian_matches_finite_differences() {
        let s = SwirlSpec {
            amp: 1.3,
            width: 0.4,
            compress: 0.7,
        };
        let h = 1e-6;
        for &(x, y) in &[(0.1, 0.2), (-0.3, 0.5), (0.6, -0.1)] {
            let jac = s.jacobian(x, y);
            for k in 0..2 {
                let dx = (s.value(x + h, y)[k] - s.value(x - h, y)[k]) / (2.0 * h);
                let dy = (s.value(x, y + h)[k] - s.value(x, y - h)[k]) / (2.0 * h);
                assert!((jac[k][0] - dx).abs() < 1e-8);
                assert!((jac[k][1] - dy).abs() < 1e-8);
            }
        }
    }
}
