//! The spatial weight `xbar(x) = (e + |x|^2)^{1/2} log^{1+sigma0}(e + |x|^2)`
//! and the weighted norms built on it.
//!
//! Gradients inside the weighted Sobolev norms use the product rule with the
//! analytic weight gradient and the discrete gradient of the field, so the
//! rapidly growing weight is never differenced numerically.

use serde::Serialize;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{neumaier_sum, Field, Grid, VectorField};
use crate::ops::gradient;
use crate::params::PhysParams;
use crate::state::{mass_in_ball, State};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightParams {
    pub sigma0: f64,
    /// Power applied to the weight.
    pub exponent: f64,
}

impl WeightParams {
    pub fn new(sigma0: f64, exponent: f64) -> Result<Self> {
        if !(sigma0 > 0.0) {
            return Err(Error::InvalidParam {
                name: "sigma0",
                reason: format!("must be > 0, got {sigma0}"),
            });
        }
        Ok(Self { sigma0, exponent })
    }

    #[inline]
    pub fn at(&self, x: f64, y: f64) -> f64 {
        weight_at(x, y, self.sigma0).powf(self.exponent)
    }
}

#[inline]
pub fn weight_at(x: f64, y: f64, sigma0: f64) -> f64 {
    let s = std::f64::consts::E + x * x + y * y;
    s.sqrt() * s.ln().powf(1.0 + sigma0)
}

/// Analytic gradient of `weight_at`.
#[inline]
pub fn weight_gradient(x: f64, y: f64, sigma0: f64) -> [f64; 2] {
    let s = std::f64::consts::E + x * x + y * y;
    let l = s.ln();
    // d xbar / ds = s^{-1/2} l^{sigma0} (l / 2 + 1 + sigma0)
    let dds = l.powf(sigma0) * (0.5 * l + 1.0 + sigma0) / s.sqrt();
    [2.0 * x * dds, 2.0 * y * dds]
}

/// Midpoint value of `|| xbar^w_exp f ||_{L^p}`; pass `f64::INFINITY` for the
/// max norm.
pub fn weighted_lp_norm(f: &Field, grid: &Grid, p: f64, w_exp: f64, sigma0: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParam {
            name: "p",
            reason: format!("Lebesgue exponent must be >= 1, got {p}"),
        });
    }
    f.check_finite("f")?;
    let weighted = grid.cells().map(|(i, j, x, y)| {
        let w = if w_exp == 0.0 {
            1.0
        } else {
            weight_at(x, y, sigma0).powf(w_exp)
        };
        (w * f[(i, j)]).abs()
    });
    Ok(lp_of_abs(weighted, grid, p))
}

fn lp_of_abs(values: impl Iterator<Item = f64>, grid: &Grid, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, f64::max)
    } else if p == 1.0 {
        neumaier_sum(values) * grid.cell_area()
    } else if p == 2.0 {
        (neumaier_sum(values.map(|v| v * v)) * grid.cell_area()).sqrt()
    } else {
        (neumaier_sum(values.map(|v| v.powf(p))) * grid.cell_area()).powf(1.0 / p)
    }
}

/// `L^1`, `H^1` and `W^{1,q}` norms of `xbar^a rho`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct WeightedDensityNorms {
    pub l1: f64,
    pub h1: f64,
    pub w1q: f64,
}

impl WeightedDensityNorms {
    /// Norm of the intersection space, taken as the sum of the three.
    pub fn intersection(&self) -> f64 {
        self.l1 + self.h1 + self.w1q
    }
}

/// Weighted field `xbar^a f` and its product-rule gradient.
pub fn weighted_field_and_gradient(f: &Field, grid: &Grid, a: f64, sigma0: f64) -> (Field, VectorField) {
    let grad_f = gradient(f, grid);
    let mut g = grid.zeros();
    let mut grad_g = VectorField::zeros(grid);
    for (i, j, x, y) in grid.cells() {
        let w = weight_at(x, y, sigma0);
        let wa = w.powf(a);
        let dw = weight_gradient(x, y, sigma0);
        let coef = a * w.powf(a - 1.0);
        let v = f[(i, j)];
        g[(i, j)] = wa * v;
        grad_g.x[(i, j)] = coef * dw[0] * v + wa * grad_f.x[(i, j)];
        grad_g.y[(i, j)] = coef * dw[1] * v + wa * grad_f.y[(i, j)];
    }
    (g, grad_g)
}

pub fn weighted_density_norms(rho: &Field, grid: &Grid, a: f64, sigma0: f64, q: f64) -> Result<WeightedDensityNorms> {
    rho.check_finite("rho")?;
    let (g, grad_g) = weighted_field_and_gradient(rho, grid, a, sigma0);
    let area = grid.cell_area();
    let l1 = neumaier_sum(g.data.iter().map(|v| v.abs())) * area;
    let grad_sq = grad_g.magnitude_sq();
    let l2_sq = neumaier_sum(g.data.iter().map(|v| v * v)) * area;
    let h1 = (l2_sq + grad_sq.sum() * area).sqrt();
    let lq = neumaier_sum(g.data.iter().map(|v| v.abs().powf(q))) * area;
    let grad_lq = neumaier_sum(grad_sq.data.iter().map(|v| v.sqrt().powf(q))) * area;
    let w1q = (lq + grad_lq).powf(1.0 / q);
    Ok(WeightedDensityNorms { l1, h1, w1q })
}

/// `|| grad v ||_{L^2}` summed over both components of a vector field.
pub fn gradient_l2_vector(v: &VectorField, grid: &Grid) -> f64 {
    let gx = gradient(&v.x, grid);
    let gy = gradient(&v.y, grid);
    (gx.magnitude_sq().integral(grid) + gy.magnitude_sq().integral(grid)).sqrt()
}

/// The composite a-priori functional
/// `psi = 1 + |sqrt(rho) u| + |grad u| + |grad eta| + |xbar^{a/2} eta|
///        + |xbar^a rho|_{L1 ∩ H1 ∩ W1q} + |u| / R`.
pub fn psi_functional(state: &State, grid: &Grid, cfg: &SimConfig, floor: f64) -> Result<f64> {
    psi_functional_with(state, grid, &cfg.phys, floor)
}

pub fn psi_functional_with(state: &State, grid: &Grid, p: &PhysParams, floor: f64) -> Result<f64> {
    state.check_finite()?;
    let u = state.velocity(floor);
    let kinetic = neumaier_sum(
        state
            .rho
            .data
            .iter()
            .zip(u.magnitude_sq().data.iter())
            .map(|(r, u2)| r * u2),
    ) * grid.cell_area();
    let grad_u = gradient_l2_vector(&u, grid);
    let grad_eta = gradient(&state.eta, grid).l2_norm(grid);
    let eta_w = weighted_lp_norm(&state.eta, grid, 2.0, p.a_weight / 2.0, p.sigma0)?;
    let rho_w = weighted_density_norms(&state.rho, grid, p.a_weight, p.sigma0, p.q)?;
    Ok(1.0 + kinetic.sqrt() + grad_u + grad_eta + eta_w + rho_w.intersection() + p.inv_r() * u.l2_norm(grid))
}

/// Both sides of the weighted Poincaré-type bound
/// `|v / xbar|_{L2} <= C (|sqrt(rho) v|_{L2} + |grad v|_{L2})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub weighted_l2: f64,
    pub rho_l2: f64,
    pub grad_l2: f64,
    /// `weighted_l2 / (rho_l2 + grad_l2)`, defined as 0 when `v = 0`.
    pub ratio: f64,
}

/// Checks `int_{B_{n1}} rho >= m1` and evaluates the three norms of `v`.
pub fn inequality_probe(v: &Field, rho: &Field, grid: &Grid, sigma0: f64, n1: f64, m1: f64) -> Result<ProbeReport> {
    v.check_finite("v")?;
    rho.check_finite("rho")?;
    let mass = mass_in_ball(rho, grid, n1);
    if !(mass >= m1) {
        return Err(Error::MassHypothesis {
            radius: n1,
            mass,
            required: m1,
        });
    }
    let weighted_l2 = weighted_lp_norm(v, grid, 2.0, -1.0, sigma0)?;
    let rho_v = rho.zip_map(v, |r, v| r.max(0.0).sqrt() * v);
    let rho_l2 = rho_v.l2_norm(grid);
    let grad_l2 = gradient(v, grid).l2_norm(grid);
    let denom = rho_l2 + grad_l2;
    let ratio = if weighted_l2 == 0.0 && denom == 0.0 {
        0.0
    } else {
        weighted_l2 / denom
    };
    Ok(ProbeReport {
        weighted_l2,
        rho_l2,
        grad_l2,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weight_at_origin_is_sqrt_e() {
        for s in [0.1, 1.0, 3.0] {
            assert!((weight_at(0.0, 0.0, s) - std::f64::consts::E.sqrt()).abs() < 1e-15);
        }
        assert!(weight_at(3.0, 4.0, 1.0) > weight_at(0.0, 0.0, 1.0));
    }

    #[test]
    fn weight_at_unit_point() {
        // (e + 1)^{1/2} * ln(e + 1)^2 = 3.3256282537790622 (independent evaluation)
        let s: f64 = std::f64::consts::E + 1.0;
        let expected = s.sqrt() * s.ln() * s.ln();
        assert!((weight_at(1.0, 0.0, 1.0) - expected).abs() < 1e-14);
        assert!((expected - 3.325_628_253_779).abs() < 1e-11);
    }

    #[test]
    fn weight_gradient_matches_finite_differences() {
        let h = 1e-6;
        for &(x, y, s) in &[(0.3, -0.2, 1.0), (2.0, 1.0, 0.5), (-4.0, 3.0, 2.0)] {
            let g = weight_gradient(x, y, s);
            let fx = (weight_at(x + h, y, s) - weight_at(x - h, y, s)) / (2.0 * h);
            let fy = (weight_at(x, y + h, s) - weight_at(x, y - h, s)) / (2.0 * h);
            assert!((g[0] - fx).abs() < 1e-6 * fx.abs().max(1.0));
            assert!((g[1] - fy).abs() < 1e-6 * fy.abs().max(1.0));
        }
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let g = Grid::square(16, 1.0).unwrap();
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(weighted_lp_norm(&g.zeros(), &g, p, 1.5, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn unweighted_unit_field_has_area_norm() {
        let g = Grid::square(32, 1.0).unwrap();
        assert_eq!(weighted_lp_norm(&g.constant(1.0), &g, 1.0, 0.0, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn single_cell_indicator_picks_up_the_center_weight() {
        let g = Grid::square(16, 1.0).unwrap();
        let mut f = g.zeros();
        f[(8, 8)] = 1.0;
        let (x, y) = g.center(8, 8);
        let expected = g.dx * g.dy * weight_at(x, y, 1.0);
        let got = weighted_lp_norm(&f, &g, 1.0, 1.0, 1.0).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_exponent_and_non_finite() {
        let g = Grid::square(8, 1.0).unwrap();
        assert!(weighted_lp_norm(&g.zeros(), &g, 0.5, 0.0, 1.0).is_err());
        let mut f = g.zeros();
        f[(1, 1)] = f64::NAN;
        assert!(weighted_lp_norm(&f, &g, 2.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn probe_rejects_missing_mass() {
        let g = Grid::square(16, 2.0).unwrap();
        let rho = g.zeros();
        let v = g.constant(1.0);
        assert!(matches!(
            inequality_probe(&v, &rho, &g, 1.0, 1.0, 0.5),
            Err(Error::MassHypothesis { .. })
        ));
    }

    #[test]
    fn probe_zero_field_ratio_is_zero() {
        let g = Grid::square(16, 2.0).unwrap();
        let rho = g.constant(1.0);
        let r = inequality_probe(&g.zeros(), &rho, &g, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(r.ratio, 0.0);
    }

    proptest! {
        #[test]
        fn weight_is_radially_monotone(r1 in 0.0..50.0f64, dr in 0.0..50.0f64, t1 in 0.0..6.3f64, t2 in 0.0..6.3f64, s in 0.05..3.0f64) {
            let r2 = r1 + dr;
            let w1 = weight_at(r1 * t1.cos(), r1 * t1.sin(), s);
            let w2 = weight_at(r2 * t2.cos(), r2 * t2.sin(), s);
            prop_assert!(w1 <= w2 * (1.0 + 1e-14));
            prop_assert!(w1 > 0.0);
        }

        #[test]
        fn weighted_norms_are_absolutely_homogeneous(c in -8.0..8.0f64, p in 1.0..4.0f64, w in -1.0..2.0f64) {
            let g = Grid::square(12, 3.0).unwrap();
            let f = g.sample(|x, y| (x - 0.3).sin() + y * y);
            let base = weighted_lp_norm(&f, &g, p, w, 1.0).unwrap();
            let scaled = weighted_lp_norm(&f.scale(c), &g, p, w, 1.0).unwrap();
            prop_assert!((scaled - c.abs() * base).abs() <= 1e-12 * base.max(1.0) * c.abs().max(1.0));
        }
    }
}
