//! Explicit time integration of the penalized fluid-particle system
//!
//! ```text
//! rho_t + div(rho u) = 0
//! (rho u)_t + div(rho u (x) u) + grad(p + eta)
//!     = mu Lap u + (lambda + mu) grad div u - (eta + beta rho) grad Phi - u / R
//! eta_t + div(eta (u - grad Phi)) = Lap eta
//! ```
//!
//! All three right-hand sides are evaluated from the same time level and
//! combined by forward Euler or two-stage SSP Runge-Kutta.

use serde::Serialize;

use crate::config::{Integrator, SimConfig};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, VectorField};
use crate::ops::{
    dirichlet_zero, grad_div_ghosted, gradient_ghosted, laplacian_ghosted, mirror, neumann_laplacian,
    upwind_advective_flux,
};
use crate::params::PhysParams;
use crate::potential::PotentialField;
use crate::state::State;

/// Candidate step limits before the CFL factor is applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CflLimits {
    pub advective: f64,
    pub viscous: f64,
    pub diffusive: f64,
}

impl CflLimits {
    pub fn min(&self) -> f64 {
        self.advective.min(self.viscous).min(self.diffusive)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub dt_used: f64,
    pub max_wave_speed: f64,
    pub positivity_clips: usize,
    pub cfl_limits: CflLimits,
}

/// Time derivatives of the three evolved fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Tendency {
    pub rho: Field,
    pub m: VectorField,
    pub eta: Field,
}

/// Extra source terms added to the right-hand sides, for manufactured
/// solutions.
pub trait Forcing: Send + Sync {
    fn add_sources(&self, t: f64, grid: &Grid, tendency: &mut Tendency);
}

/// Largest transport speed and the step limits at the current state.
///
/// The advective candidate uses `|u_x| + |u_y| + c_s` and the particle drift
/// `|u_x - d1 Phi| + |u_y - d2 Phi|`, which bound the face speeds of the
/// upwind fluxes in both directions at once.
pub fn cfl_limits(
    state: &State,
    u: &VectorField,
    grid: &Grid,
    phys: &PhysParams,
    potential: &PotentialField,
    floor: f64,
    with_viscous: bool,
) -> (CflLimits, f64) {
    let h = grid.min_spacing();
    let mut speed: f64 = 0.0;
    let mut rho_min = f64::INFINITY;
    for k in 0..grid.len() {
        let (ux, uy) = (u.x.data[k], u.y.data[k]);
        let rho = state.rho.data[k];
        let fluid = ux.abs() + uy.abs() + phys.sound_speed(rho.max(0.0));
        let drift = (ux - potential.grad_phi.x.data[k]).abs() + (uy - potential.grad_phi.y.data[k]).abs();
        speed = speed.max(fluid).max(drift);
        rho_min = rho_min.min(rho);
    }
    let advective = if speed > 0.0 { h / speed } else { f64::INFINITY };
    let viscous = if with_viscous {
        let nu_max = phys.longitudinal_viscosity() / rho_min.max(floor);
        h * h / (4.0 * nu_max)
    } else {
        f64::INFINITY
    };
    let diffusive = h * h / 4.0;
    (
        CflLimits {
            advective,
            viscous,
            diffusive,
        },
        speed,
    )
}

/// `dt = cfl * min(advective, viscous, diffusive)`.
pub fn compute_dt(state: &State, cfg: &SimConfig, potential: &PotentialField, floor: f64) -> Result<f64> {
    let u = state.velocity(floor);
    let (limits, _) = cfl_limits(state, &u, &cfg.grid, &cfg.phys, potential, floor, true);
    checked_dt(cfg.cfl * limits.min())
}

fn checked_dt(dt: f64) -> Result<f64> {
    if dt.is_finite() && dt > 0.0 {
        Ok(dt)
    } else {
        Err(Error::DtCollapse(dt))
    }
}

pub fn continuity_rhs(rho: &Field, u: &VectorField, grid: &Grid) -> Field {
    upwind_advective_flux(rho, u, grid).scale(-1.0)
}

pub fn momentum_rhs(
    state: &State,
    u: &VectorField,
    potential: &PotentialField,
    phys: &PhysParams,
    grid: &Grid,
) -> VectorField {
    let ux = dirichlet_zero(&u.x);
    let uy = dirichlet_zero(&u.y);
    let lap_x = laplacian_ghosted(&ux, grid);
    let lap_y = laplacian_ghosted(&uy, grid);
    let gd = grad_div_ghosted(&ux, &uy, grid);
    let total_p = state.rho.zip_map(&state.eta, |r, e| phys.pressure(r.max(0.0)) + e);
    let grad_p = gradient_ghosted(&mirror(&total_p), grid);
    let adv_x = upwind_advective_flux(&state.m.x, u, grid);
    let adv_y = upwind_advective_flux(&state.m.y, u, grid);
    let inv_r = phys.inv_r();
    let (mu, lm) = (phys.mu, phys.lambda + phys.mu);
    let mut out = VectorField::zeros(grid);
    for k in 0..grid.len() {
        let coupling = state.eta.data[k] + phys.beta * state.rho.data[k];
        out.x.data[k] = -adv_x.data[k] - grad_p.x.data[k] + mu * lap_x.data[k] + lm * gd.x.data[k]
            - coupling * potential.grad_phi.x.data[k]
            - inv_r * u.x.data[k];
        out.y.data[k] = -adv_y.data[k] - grad_p.y.data[k] + mu * lap_y.data[k] + lm * gd.y.data[k]
            - coupling * potential.grad_phi.y.data[k]
            - inv_r * u.y.data[k];
    }
    out
}

/// Drift-diffusion with zero total flux through the walls: the upwind
/// fluxes vanish on boundary faces and the diffusive flux uses mirrored
/// ghosts.
pub fn smoluchowski_rhs(eta: &Field, u: &VectorField, potential: &PotentialField, grid: &Grid) -> Field {
    let drift = u.axpy(-1.0, &potential.grad_phi);
    let adv = upwind_advective_flux(eta, &drift, grid);
    let lap = neumann_laplacian(eta, grid);
    lap.zip_map(&adv, |l, a| l - a)
}

pub fn step_continuity(state: &State, u: &VectorField, dt: f64, grid: &Grid) -> Field {
    state.rho.axpy(dt, &continuity_rhs(&state.rho, u, grid))
}

pub fn step_momentum(
    state: &State,
    u: &VectorField,
    potential: &PotentialField,
    dt: f64,
    phys: &PhysParams,
    grid: &Grid,
) -> Result<VectorField> {
    let m = state.m.axpy(dt, &momentum_rhs(state, u, potential, phys, grid));
    m.check_finite("m")?;
    Ok(m)
}

pub fn step_smoluchowski(state: &State, u: &VectorField, potential: &PotentialField, dt: f64, grid: &Grid) -> Field {
    state.eta.axpy(dt, &smoluchowski_rhs(&state.eta, u, potential, grid))
}

/// Integrator bound to one configuration.
pub struct Stepper {
    pub grid: Grid,
    pub phys: PhysParams,
    pub potential: PotentialField,
    pub cfl: f64,
    pub integrator: Integrator,
    pub floor: f64,
    /// When set, transport uses this velocity and the momentum is frozen.
    pub prescribed_velocity: Option<VectorField>,
    pub forcing: Option<Box<dyn Forcing>>,
}

/// A failed run, with the last state that passed all checks.
#[derive(Debug)]
pub struct AdvanceError {
    pub last_state: State,
    pub steps_completed: usize,
    pub error: Error,
}

impl std::fmt::Display for AdvanceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "after {} steps (t = {}): {}", self.steps_completed, self.last_state.t, self.error)
    }
}

impl std::error::Error for AdvanceError {}

impl Stepper {
    pub fn new(cfg: &SimConfig, floor: f64) -> Self {
        Self {
            grid: cfg.grid,
            phys: cfg.phys.clone(),
            potential: PotentialField::sample(cfg.potential, &cfg.grid),
            cfl: cfg.cfl,
            integrator: cfg.integrator,
            floor,
            prescribed_velocity: None,
            forcing: None,
        }
    }

    fn velocity(&self, state: &State) -> VectorField {
        match &self.prescribed_velocity {
            Some(u) => u.clone(),
            None => state.velocity(self.floor),
        }
    }

    pub fn rhs(&self, state: &State) -> Tendency {
        let g = &self.grid;
        let u = self.velocity(state);
        let m = match self.prescribed_velocity {
            Some(_) => VectorField::zeros(g),
            None => momentum_rhs(state, &u, &self.potential, &self.phys, g),
        };
        let mut tend = Tendency {
            rho: continuity_rhs(&state.rho, &u, g),
            m,
            eta: smoluchowski_rhs(&state.eta, &u, &self.potential, g),
        };
        if let Some(f) = &self.forcing {
            f.add_sources(state.t, g, &mut tend);
        }
        tend
    }

    /// Step limits at `state`, without the CFL factor.
    pub fn limits(&self, state: &State) -> (CflLimits, f64) {
        let u = self.velocity(state);
        cfl_limits(
            state,
            &u,
            &self.grid,
            &self.phys,
            &self.potential,
            self.floor,
            self.prescribed_velocity.is_none(),
        )
    }

    pub fn compute_dt(&self, state: &State) -> Result<f64> {
        checked_dt(self.cfl * self.limits(state).0.min())
    }

    fn euler(&self, state: &State, dt: f64) -> State {
        let k = self.rhs(state);
        State {
            t: state.t + dt,
            rho: state.rho.axpy(dt, &k.rho),
            m: state.m.axpy(dt, &k.m),
            eta: state.eta.axpy(dt, &k.eta),
        }
    }

    /// Zeroes negative density values and returns how many were touched.
    fn clip(state: &mut State) -> usize {
        let mut n = 0;
        for f in [&mut state.rho, &mut state.eta] {
            for v in f.data.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                    n += 1;
                }
            }
        }
        n
    }

    pub fn step_with_dt(&self, state: &State, dt: f64) -> Result<(State, usize)> {
        checked_dt(dt)?;
        let mut clips = 0;
        let next = match self.integrator {
            Integrator::ForwardEuler => {
                let mut s = self.euler(state, dt);
                clips += Self::clip(&mut s);
                s
            }
            Integrator::SspRk2 => {
                let mut s1 = self.euler(state, dt);
                clips += Self::clip(&mut s1);
                let s2 = self.euler(&s1, dt);
                let avg = |a: &Field, b: &Field| a.zip_map(b, |p, q| 0.5 * p + 0.5 * q);
                let mut s = State {
                    t: state.t + dt,
                    rho: avg(&state.rho, &s2.rho),
                    m: VectorField::new(avg(&state.m.x, &s2.m.x), avg(&state.m.y, &s2.m.y)),
                    eta: avg(&state.eta, &s2.eta),
                };
                clips += Self::clip(&mut s);
                s
            }
        };
        next.check_finite()?;
        Ok((next, clips))
    }

    /// One step with the CFL-limited time step, shortened to land on `t_stop`.
    pub fn step(&self, state: &State, t_stop: Option<f64>) -> Result<(State, StepReport)> {
        let (limits, speed) = self.limits(state);
        let mut dt = checked_dt(self.cfl * limits.min())?;
        if let Some(t_stop) = t_stop {
            let remaining = t_stop - state.t;
            if remaining < dt {
                dt = checked_dt(remaining)?;
            }
        }
        let (next, clips) = self.step_with_dt(state, dt)?;
        Ok((
            next,
            StepReport {
                dt_used: dt,
                max_wave_speed: speed,
                positivity_clips: clips,
                cfl_limits: limits,
            },
        ))
    }

    /// Advances until `t_end` or `max_steps`, whichever comes first, calling
    /// `observe` after every accepted step.
    pub fn advance_with(
        &self,
        state: &State,
        t_end: f64,
        max_steps: Option<usize>,
        mut observe: impl FnMut(&State, &State, &StepReport) -> Result<()>,
    ) -> std::result::Result<(State, Vec<StepReport>), AdvanceError> {
        let mut cur = state.clone();
        let mut reports = Vec::new();
        let fail = |cur: &State, n: usize, error: Error| AdvanceError {
            last_state: cur.clone(),
            steps_completed: n,
            error,
        };
        while cur.t < t_end && max_steps.map_or(true, |m| reports.len() < m) {
            let (next, rep) = self.step(&cur, Some(t_end)).map_err(|e| fail(&cur, reports.len(), e))?;
            observe(&cur, &next, &rep).map_err(|e| fail(&cur, reports.len(), e))?;
            reports.push(rep);
            cur = next;
        }
        Ok((cur, reports))
    }

    pub fn advance(
        &self,
        state: &State,
        n_steps: usize,
    ) -> std::result::Result<(State, Vec<StepReport>), AdvanceError> {
        self.advance_with(state, f64::INFINITY, Some(n_steps), |_, _, _| Ok(()))
    }
}
