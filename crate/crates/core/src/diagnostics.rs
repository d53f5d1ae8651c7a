//! Monitored functionals: energy and dissipation, masses, entropy, the
//! effective viscous flux, vorticity, and the residuals of two identities
//! that smooth solutions satisfy.

use serde::Serialize;

use crate::error::Result;
use crate::grid::{neumaier_sum, Field, Grid, VectorField};
use crate::ops::{
    d_dx, d_dy, divergence, divergence_ghosted, gradient, perp_gradient, upwind_advective_flux, vorticity,
    dirichlet_zero,
};
use crate::params::PhysParams;
use crate::potential::PotentialField;
use crate::state::{mass_in_ball, State};
use crate::weights::{psi_functional_with, weighted_density_norms, weighted_lp_norm};

/// `E = kinetic + pressure_potential + entropy + gravitational`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBudget {
    pub kinetic: f64,
    pub pressure_potential: f64,
    pub entropy: f64,
    pub gravitational: f64,
    pub energy: f64,
    pub dissipation: f64,
}

/// `eta ln eta` with `0 ln 0 = 0`.
#[inline]
pub fn entropy_density(eta: f64) -> f64 {
    if eta > 0.0 {
        eta * eta.ln()
    } else {
        0.0
    }
}

/// `2 grad sqrt(eta)`, via `grad eta / sqrt(eta)` above `threshold` and by
/// differencing `sqrt(eta)` below it.
pub fn twice_grad_sqrt_eta(eta: &Field, grid: &Grid, threshold: f64) -> VectorField {
    let ge = gradient(eta, grid);
    let gs = gradient(&eta.map(|e| e.max(0.0).sqrt()), grid);
    let mut out = VectorField::zeros(grid);
    for k in 0..grid.len() {
        let e = eta.data[k];
        if e > threshold {
            let s = e.sqrt();
            out.x.data[k] = ge.x.data[k] / s;
            out.y.data[k] = ge.y.data[k] / s;
        } else {
            out.x.data[k] = 2.0 * gs.x.data[k];
            out.y.data[k] = 2.0 * gs.y.data[k];
        }
    }
    out
}

fn integrate(grid: &Grid, values: impl IntoIterator<Item = f64>) -> f64 {
    neumaier_sum(values) * grid.cell_area()
}

pub fn energy_and_dissipation(
    state: &State,
    potential: &PotentialField,
    phys: &PhysParams,
    grid: &Grid,
    floor: f64,
    eta_threshold: f64,
) -> EnergyBudget {
    let u = state.velocity(floor);
    let n = grid.len();
    let rho = &state.rho.data;
    let eta = &state.eta.data;
    let phi = &potential.phi.data;
    let u2 = u.magnitude_sq();

    let kinetic = integrate(grid, (0..n).map(|k| 0.5 * rho[k] * u2.data[k]));
    let pressure_potential = integrate(grid, (0..n).map(|k| phys.pressure_potential(rho[k].max(0.0))));
    let entropy = integrate(grid, (0..n).map(|k| entropy_density(eta[k])));
    let gravitational = integrate(grid, (0..n).map(|k| (phys.beta * rho[k] + eta[k]) * phi[k]));

    let gx = gradient(&u.x, grid);
    let gy = gradient(&u.y, grid);
    let div = divergence(&u, grid);
    let tg = twice_grad_sqrt_eta(&state.eta, grid, eta_threshold);
    let gp = &potential.grad_phi;
    let inv_r = phys.inv_r();
    let dissipation = integrate(
        grid,
        (0..n).map(|k| {
            let grad_u2 = gx.x.data[k].powi(2) + gx.y.data[k].powi(2) + gy.x.data[k].powi(2) + gy.y.data[k].powi(2);
            let s = eta[k].max(0.0).sqrt();
            let fx = tg.x.data[k] + s * gp.x.data[k];
            let fy = tg.y.data[k] + s * gp.y.data[k];
            phys.mu * grad_u2
                + (phys.mu + phys.lambda) * div.data[k].powi(2)
                + inv_r * u2.data[k]
                + fx * fx
                + fy * fy
        }),
    );
    EnergyBudget {
        kinetic,
        pressure_potential,
        entropy,
        gravitational,
        energy: kinetic + pressure_potential + entropy + gravitational,
        dissipation,
    }
}

/// `F = (2 mu + lambda) div u - p - eta`.
pub fn effective_viscous_flux(state: &State, phys: &PhysParams, grid: &Grid, floor: f64) -> Field {
    let div = divergence(&state.velocity(floor), grid);
    let nu = phys.longitudinal_viscosity();
    let mut out = grid.zeros();
    for k in 0..grid.len() {
        out.data[k] = nu * div.data[k] - phys.pressure(state.rho.data[k].max(0.0)) - state.eta.data[k];
    }
    out
}

/// L2 norm of `(p1 - p0) / dt + div_h(p0 u0) + (gamma - 1) p0 div_h u0`.
pub fn residual_pressure_transport(prev: &State, next: &State, dt: f64, phys: &PhysParams, grid: &Grid, floor: f64) -> f64 {
    let u = prev.velocity(floor);
    let p0 = prev.rho.map(|r| phys.pressure(r.max(0.0)));
    let p1 = next.rho.map(|r| phys.pressure(r.max(0.0)));
    let adv = upwind_advective_flux(&p0, &u, grid);
    let div = divergence_ghosted(&dirichlet_zero(&u.x), &dirichlet_zero(&u.y), grid);
    let mut res = grid.zeros();
    for k in 0..grid.len() {
        res.data[k] = (p1.data[k] - p0.data[k]) / dt + adv.data[k] + (phys.gamma - 1.0) * p0.data[k] * div.data[k];
    }
    res.l2_norm(grid)
}

/// L2 norm of `u/R + rho u_dot - grad F - mu grad_perp omega + (eta + beta rho) grad Phi`
/// with `u_dot = (u1 - u0) / dt + (u0 . grad) u0`.
pub fn residual_flux_identity(
    prev: &State,
    next: &State,
    potential: &PotentialField,
    dt: f64,
    phys: &PhysParams,
    grid: &Grid,
    floor: f64,
) -> f64 {
    let u0 = prev.velocity(floor);
    let u1 = next.velocity(floor);
    let (ux_x, ux_y) = (d_dx(&u0.x, grid), d_dy(&u0.x, grid));
    let (uy_x, uy_y) = (d_dx(&u0.y, grid), d_dy(&u0.y, grid));
    let grad_f = gradient(&effective_viscous_flux(prev, phys, grid, floor), grid);
    let curl = perp_gradient(&vorticity(&u0, grid), grid);
    let inv_r = phys.inv_r();
    let mut res = VectorField::zeros(grid);
    for k in 0..grid.len() {
        let (a, b) = (u0.x.data[k], u0.y.data[k]);
        let dot_x = (u1.x.data[k] - a) / dt + a * ux_x.data[k] + b * ux_y.data[k];
        let dot_y = (u1.y.data[k] - b) / dt + a * uy_x.data[k] + b * uy_y.data[k];
        let rho = prev.rho.data[k];
        let coupling = prev.eta.data[k] + phys.beta * rho;
        res.x.data[k] = inv_r * a + rho * dot_x - grad_f.x.data[k] - phys.mu * curl.x.data[k]
            + coupling * potential.grad_phi.x.data[k];
        res.y.data[k] = inv_r * b + rho * dot_y - grad_f.y.data[k] - phys.mu * curl.y.data[k]
            + coupling * potential.grad_phi.y.data[k];
    }
    res.l2_norm(grid)
}

/// One time sample of every monitored quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub mass_rho: f64,
    pub mass_eta: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub entropy: f64,
    pub psi: f64,
    pub weighted_rho_l1: f64,
    pub weighted_rho_h1: f64,
    pub weighted_rho_w1q: f64,
    pub weighted_eta_l2: f64,
    pub mass_in_ball: f64,
    pub kinetic: f64,
    pub pressure_potential: f64,
    pub gravitational: f64,
    pub flux_f_l2: f64,
    pub vorticity_l2: f64,
    pub residual_pressure_transport: Option<f64>,
    pub residual_flux_identity: Option<f64>,
    pub min_rho: f64,
    pub min_eta: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "step,t,mass_rho,mass_eta,energy,dissipation,entropy,psi,\
weighted_rho_l1,weighted_rho_h1,weighted_rho_w1q,weighted_eta_l2,mass_in_ball,kinetic,\
pressure_potential,gravitational,flux_f_l2,vorticity_l2,residual_pressure_transport,\
residual_flux_identity,min_rho,min_eta";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{:e}",
            self.step,
            self.t,
            self.mass_rho,
            self.mass_eta,
            self.energy,
            self.dissipation,
            self.entropy,
            self.psi,
            self.weighted_rho_l1,
            self.weighted_rho_h1,
            self.weighted_rho_w1q,
            self.weighted_eta_l2,
            self.mass_in_ball,
            self.kinetic,
            self.pressure_potential,
            self.gravitational,
            self.flux_f_l2,
            self.vorticity_l2,
            opt(self.residual_pressure_transport),
            opt(self.residual_flux_identity),
            self.min_rho,
            self.min_eta,
        )
    }
}

/// Everything `record` needs besides the states, fixed for a run.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub grid: Grid,
    pub phys: PhysParams,
    pub potential: PotentialField,
    pub floor: f64,
    /// Radius of the ball used for `mass_in_ball`.
    pub ball_radius: f64,
    pub eta_threshold: f64,
    pub residuals: bool,
}

impl Diagnostics {
    /// `eta_threshold = 1e-12 * max(max eta0, 1)`.
    pub fn new(grid: Grid, phys: PhysParams, potential: PotentialField, floor: f64, ball_radius: f64, eta0: &Field) -> Self {
        Self {
            grid,
            phys,
            potential,
            floor,
            ball_radius,
            eta_threshold: 1e-12 * eta0.max().max(1.0),
            residuals: true,
        }
    }

    pub fn energy(&self, state: &State) -> EnergyBudget {
        energy_and_dissipation(state, &self.potential, &self.phys, &self.grid, self.floor, self.eta_threshold)
    }

    pub fn record(&self, step: usize, state: &State, prev: Option<&State>) -> Result<DiagnosticsRecord> {
        state.check_finite()?;
        let g = &self.grid;
        let p = &self.phys;
        let e = self.energy(state);
        let w = weighted_density_norms(&state.rho, g, p.a_weight, p.sigma0, p.q)?;
        let u = state.velocity(self.floor);
        let (rp, rf) = match prev {
            Some(prev) if self.residuals && state.t > prev.t => {
                let dt = state.t - prev.t;
                (
                    Some(residual_pressure_transport(prev, state, dt, p, g, self.floor)),
                    Some(residual_flux_identity(prev, state, &self.potential, dt, p, g, self.floor)),
                )
            }
            _ => (None, None),
        };
        Ok(DiagnosticsRecord {
            step,
            t: state.t,
            mass_rho: state.mass_rho(g),
            mass_eta: state.mass_eta(g),
            energy: e.energy,
            dissipation: e.dissipation,
            entropy: e.entropy,
            psi: psi_functional_with(state, g, p, self.floor)?,
            weighted_rho_l1: w.l1,
            weighted_rho_h1: w.h1,
            weighted_rho_w1q: w.w1q,
            weighted_eta_l2: weighted_lp_norm(&state.eta, g, 2.0, p.a_weight / 2.0, p.sigma0)?,
            mass_in_ball: mass_in_ball(&state.rho, g, self.ball_radius),
            kinetic: e.kinetic,
            pressure_potential: e.pressure_potential,
            gravitational: e.gravitational,
            flux_f_l2: effective_viscous_flux(state, p, g, self.floor).l2_norm(g),
            vorticity_l2: vorticity(&u, g).l2_norm(g),
            residual_pressure_transport: rp,
            residual_flux_identity: rf,
            min_rho: state.rho.min(),
            min_eta: state.eta.min(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::potential::PotentialSpec;
    use crate::stepper::Stepper;

    fn diag(grid: Grid, phys: PhysParams, spec: PotentialSpec) -> Diagnostics {
        Diagnostics::new(grid, phys, PotentialField::sample(spec, &grid), 1e-10, 0.5, &grid.zeros())
    }

    #[test]
    fn zero_state_has_zero_energy_and_unit_psi() {
        let g = Grid::square(16, 1.0).unwrap();
        let d = diag(g, PhysParams::default(), PotentialSpec::default());
        let r = d.record(0, &State::zeros(&g), None).unwrap();
        assert_eq!(r.psi, 1.0);
        for v in [
            r.mass_rho, r.mass_eta, r.energy, r.dissipation, r.entropy, r.weighted_rho_l1, r.weighted_rho_h1,
            r.weighted_rho_w1q, r.weighted_eta_l2, r.mass_in_ball, r.kinetic, r.pressure_potential,
            r.gravitational, r.flux_f_l2, r.vorticity_l2,
        ] {
            assert_eq!(v, 0.0);
        }
        assert!(r.residual_pressure_transport.is_none());
    }

    #[test]
    fn unit_state_energy_is_pressure_only() {
        let g = Grid::square(16, 1.0).unwrap();
        let phys = PhysParams::default();
        let d = diag(g, phys.clone(), PotentialSpec::Zero);
        let st = State::from_primitive(0.0, g.constant(1.0), &VectorField::zeros(&g), g.constant(1.0));
        let e = d.energy(&st);
        let expected = 4.0 * phys.a_pressure / (phys.gamma - 1.0);
        assert!((e.energy - expected).abs() < 1e-12);
        assert_eq!(e.entropy, 0.0);
        assert_eq!(e.dissipation, 0.0);
    }

    #[test]
    fn stream_function_flow_dissipates() {
        let g = Grid::square(64, 1.0).unwrap();
        let phys = PhysParams::default();
        let d = diag(g, phys.clone(), PotentialSpec::Zero);
        // u = curl of psi = exp(-|x|^2 / 0.1)
        let u = g.sample_vector(|x, y| {
            let e = (-(x * x + y * y) / 0.1).exp();
            [-2.0 * y / 0.1 * e, 2.0 * x / 0.1 * e]
        });
        let st = State::from_primitive(0.0, g.constant(1.0), &u, g.zeros());
        let e = d.energy(&st);
        // eta = 0, so only the velocity terms remain
        assert!(e.dissipation > 0.0);
        let grad = crate::weights::gradient_l2_vector(&u, &g).powi(2);
        let expected = phys.mu * grad + phys.inv_r() * u.l2_norm(&g).powi(2) + (phys.mu + phys.lambda) * divergence(&u, &g).l2_norm(&g).powi(2);
        assert!((e.dissipation - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn entropy_uses_the_continuous_extension() {
        assert_eq!(entropy_density(0.0), 0.0);
        assert_eq!(entropy_density(1.0), 0.0);
        assert!((entropy_density(2.0) - 2.0 * 2.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn flux_of_constants() {
        let g = Grid::square(16, 1.0).unwrap();
        let mut phys = PhysParams::default();
        phys.a_pressure = 1.0;
        assert_eq!(effective_viscous_flux(&State::zeros(&g), &phys, &g, 1e-10).max_abs(), 0.0);
        let st = State::from_primitive(0.0, g.constant(1.0), &VectorField::zeros(&g), g.zeros());
        let f = effective_viscous_flux(&st, &phys, &g, 1e-10);
        assert!(f.data.iter().all(|&v| v == -1.0));
    }

    #[test]
    fn flux_matches_analytic_divergence() {
        let g = Grid::square(128, 1.0).unwrap();
        let phys = PhysParams::default();
        let c = 0.1;
        let u = g.sample_vector(|x, y| {
            let b = (-(x * x + y * y) / c).exp();
            [x * b, y * b]
        });
        let st = State::from_primitive(0.0, g.constant(1.0), &u, g.constant(0.5));
        let f = effective_viscous_flux(&st, &phys, &g, 1e-10);
        let exact = g.sample(|x, y| {
            let r2 = x * x + y * y;
            let div = (2.0 - 2.0 * r2 / c) * (-r2 / c).exp();
            phys.longitudinal_viscosity() * div - phys.pressure(1.0) - 0.5
        });
        assert!(f.axpy(-1.0, &exact).l2_norm(&g) < 1e-3);
    }

    #[test]
    fn residuals_vanish_at_equilibrium() {
        let c = SimConfig::default().with_grid(Grid::square(16, 1.0).unwrap());
        let mut c = c;
        c.potential = PotentialSpec::Zero;
        let g = c.grid;
        let st = State::from_primitive(0.0, g.constant(1.0), &VectorField::zeros(&g), g.zeros());
        let (next, _) = Stepper::new(&c, 1e-10).step(&st, None).unwrap();
        let dt = next.t;
        let pot = PotentialField::zero(&g);
        assert_eq!(residual_pressure_transport(&st, &next, dt, &c.phys, &g, 1e-10), 0.0);
        assert!(residual_flux_identity(&st, &next, &pot, dt, &c.phys, &g, 1e-10) < 1e-13);
        let z = State::zeros(&g);
        let mut z1 = z.clone();
        z1.t = 0.1;
        assert_eq!(residual_pressure_transport(&z, &z1, 0.1, &c.phys, &g, 1e-10), 0.0);
        assert_eq!(residual_flux_identity(&z, &z1, &pot, 0.1, &c.phys, &g, 1e-10), 0.0);
    }

    #[test]
    fn pressure_residual_is_linear_in_the_coefficient() {
        let g = Grid::square(32, 1.0).unwrap();
        let mut phys = PhysParams::default();
        let rho0 = g.sample(|x, y| 1.0 + 0.3 * (x * y * 4.0).sin());
        let rho1 = g.sample(|x, y| 1.0 + 0.31 * (x * y * 4.0).sin());
        let u = g.sample_vector(|x, y| [(1.0 - x * x) * y, (1.0 - y * y) * x]);
        let a = State::from_primitive(0.0, rho0, &u, g.zeros());
        let b = State::from_primitive(0.01, rho1, &u, g.zeros());
        let r1 = residual_pressure_transport(&a, &b, 0.01, &phys, &g, 1e-10);
        phys.a_pressure *= 2.0;
        let r2 = residual_pressure_transport(&a, &b, 0.01, &phys, &g, 1e-10);
        assert!((r2 - 2.0 * r1).abs() < 1e-12 * r2);
    }

    #[test]
    fn record_is_pure_and_dissipation_nonnegative() {
        let g = Grid::square(32, 1.0).unwrap();
        let d = diag(g, PhysParams::default(), PotentialSpec::default());
        let st = State::from_primitive(
            0.0,
            g.sample(|x, y| (-(x * x + y * y) * 4.0).exp()),
            &g.sample_vector(|x, y| [y * (1.0 - x * x), -x * (1.0 - y * y)]),
            g.sample(|x, _| (x * 3.0).cos().max(0.0)),
        );
        let a = d.record(3, &st, None).unwrap();
        let b = d.record(3, &st, None).unwrap();
        assert_eq!(a.csv_row(), b.csv_row());
        assert!(a.dissipation >= 0.0);
        assert_eq!(a.energy, a.kinetic + a.pressure_potential + a.entropy + a.gravitational);
        assert_eq!(a.csv_row().split(',').count(), DiagnosticsRecord::CSV_HEADER.split(',').count());
    }
}
