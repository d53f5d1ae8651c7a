use serde::Serialize;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{neumaier_sum, Field, Grid, VectorField};
use crate::ops::gradient;
use crate::weights::{gradient_l2_vector, weighted_density_norms, weighted_lp_norm, WeightedDensityNorms};

/// Evolved fields: density, momentum `rho u` and particle density.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub rho: Field,
    pub m: VectorField,
    pub eta: Field,
}

impl State {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            rho: grid.zeros(),
            m: VectorField::zeros(grid),
            eta: grid.zeros(),
        }
    }

    /// Builds a state from density, velocity and particle density.
    pub fn from_primitive(t: f64, rho: Field, u: &VectorField, eta: Field) -> Self {
        let m = u.mul_scalar(&rho);
        Self { t, rho, m, eta }
    }

    /// `u = m / max(rho, floor)`.
    pub fn velocity(&self, floor: f64) -> VectorField {
        let inv = self.rho.map(|r| 1.0 / r.max(floor));
        self.m.mul_scalar(&inv)
    }

    pub fn check_finite(&self) -> Result<()> {
        self.rho.check_finite("rho")?;
        self.m.check_finite("m")?;
        self.eta.check_finite("eta")?;
        if !self.t.is_finite() {
            return Err(Error::NonFinite {
                field: "t",
                i: 0,
                j: 0,
            });
        }
        Ok(())
    }

    /// Finite and with `rho, eta >= 0` everywhere.
    pub fn check_admissible(&self) -> Result<()> {
        self.check_finite()?;
        for (name, f) in [("rho", &self.rho), ("eta", &self.eta)] {
            if let Some(k) = f.data.iter().position(|&v| v < 0.0) {
                return Err(Error::Negative {
                    field: name,
                    i: k % f.nx,
                    j: k / f.nx,
                    value: f.data[k],
                });
            }
        }
        Ok(())
    }

    pub fn mass_rho(&self, grid: &Grid) -> f64 {
        self.rho.integral(grid)
    }

    pub fn mass_eta(&self, grid: &Grid) -> f64 {
        self.eta.integral(grid)
    }
}

/// Discrete values of the norms the initial-data hypotheses ask to be finite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub weighted_rho: WeightedDensityNorms,
    pub grad_u_l2: f64,
    pub sqrt_rho_u_l2: f64,
    pub weighted_eta_l2: f64,
    pub grad_eta_l2: f64,
    pub negative_rho_cells: usize,
    pub negative_eta_cells: usize,
    pub valid: bool,
}

/// Evaluates the initial-data norms. Non-finite input is an error; negative
/// density values are reported through the flags and `valid = false`.
pub fn validate_initial_data(state: &State, grid: &Grid, cfg: &SimConfig, floor: f64) -> Result<ValidationReport> {
    state.check_finite()?;
    let p = &cfg.phys;
    let negative_rho_cells = state.rho.data.iter().filter(|&&v| v < 0.0).count();
    let negative_eta_cells = state.eta.data.iter().filter(|&&v| v < 0.0).count();
    let u = state.velocity(floor);
    let sqrt_rho_u_l2 = (neumaier_sum(
        state
            .rho
            .data
            .iter()
            .zip(u.magnitude_sq().data.iter())
            .map(|(r, u2)| r.max(0.0) * u2),
    ) * grid.cell_area())
    .sqrt();
    Ok(ValidationReport {
        weighted_rho: weighted_density_norms(&state.rho, grid, p.a_weight, p.sigma0, p.q)?,
        grad_u_l2: gradient_l2_vector(&u, grid),
        sqrt_rho_u_l2,
        weighted_eta_l2: weighted_lp_norm(&state.eta, grid, 2.0, p.a_weight / 2.0, p.sigma0)?,
        grad_eta_l2: gradient(&state.eta, grid).l2_norm(grid),
        negative_rho_cells,
        negative_eta_cells,
        valid: negative_rho_cells == 0 && negative_eta_cells == 0,
    })
}

/// Midpoint integral of `rho` over the cells whose centers satisfy
/// `|x| < radius`.
pub fn mass_in_ball(rho: &Field, grid: &Grid, radius: f64) -> f64 {
    let r2 = radius * radius;
    neumaier_sum(
        grid.cells()
            .filter(|&(_, _, x, y)| x * x + y * y < r2)
            .map(|(i, j, _, _)| rho[(i, j)]),
    ) * grid.cell_area()
}

/// Smallest radius (to bisection tolerance) whose ball holds at least
/// `fraction` of the total mass of `rho`. The search is confined to the
/// inscribed disk `[0, half_width]`.
pub fn ball_radius_for_mass(rho: &Field, grid: &Grid, fraction: f64) -> Result<f64> {
    let target = fraction * rho.integral(grid);
    let hi_mass = mass_in_ball(rho, grid, grid.half_width);
    if hi_mass < target {
        return Err(Error::MassHypothesis {
            radius: grid.half_width,
            mass: hi_mass,
            required: target,
        });
    }
    let (mut lo, mut hi) = (0.0, grid.half_width);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mass_in_ball(rho, grid, mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
