//! Regularized initial data for the bounded-domain problem.
//!
//! Given an analytic target `(rho0, u0, eta0)` the pipeline builds
//!
//! ```text
//! rho_hat = phi_R rho0
//! rho_R   = rho_hat + exp(-|x|^2) / R
//! eta_R   = phi_R eta0
//! h       = j_{1/R} * (sqrt(rho0) u0)
//! v_i     = phi_R d_i u0
//! (-Lap + 1/R + rho_R) u_R = sqrt(rho_R) h - d_i v_i,   u_R = 0 on the boundary
//! w_R     = phi_R u_R
//! ```
//!
//! and reports how far `w_R` is from the target.

use serde::Serialize;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, VectorField};
use crate::linsolve::{self, LinearOperatorSpec, SolveReport};
use crate::ops::divergence;
use crate::state::{ball_radius_for_mass, mass_in_ball, State};
use crate::targets::bump;
use crate::weights::gradient_l2_vector;

/// Adds `exp(-|x|^2) / r` at every cell center.
pub fn lift_density(rho_hat: &Field, grid: &Grid, r: f64) -> Field {
    let lift = grid.sample(|x, y| (-(x * x + y * y)).exp() / r);
    rho_hat.zip_map(&lift, |a, b| a + b)
}

/// Quintic smoothstep `10 s^3 - 15 s^4 + 6 s^5`.
fn smoothstep(s: f64) -> f64 {
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// `phi_R(x)`: 1 on `|x| <= R/2`, 0 on `|x| >= R`, quintic in `|x|` between.
pub fn cutoff_factor(x: f64, y: f64, r: f64) -> f64 {
    let s = ((x * x + y * y).sqrt() - 0.5 * r) / (0.5 * r);
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        1.0 - smoothstep(s)
    }
}

pub fn cutoff_gradient(x: f64, y: f64, r: f64) -> [f64; 2] {
    let rad = (x * x + y * y).sqrt();
    let s = (rad - 0.5 * r) / (0.5 * r);
    if s <= 0.0 || s >= 1.0 {
        return [0.0, 0.0];
    }
    let d = -30.0 * s * s * (1.0 - s) * (1.0 - s) / (0.5 * r);
    [d * x / rad, d * y / rad]
}

pub fn cutoff(f: &Field, grid: &Grid, r: f64) -> Field {
    let mut out = f.clone();
    for (i, j, x, y) in grid.cells() {
        let phi = cutoff_factor(x, y, r);
        if phi != 1.0 {
            out[(i, j)] *= phi;
        }
    }
    out
}

pub fn cutoff_vector(v: &VectorField, grid: &Grid, r: f64) -> VectorField {
    VectorField::new(cutoff(&v.x, grid, r), cutoff(&v.y, grid, r))
}

/// Discrete bump kernel of radius `delta`, normalized to unit sum.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierSpec {
    pub delta: f64,
    reach: (usize, usize),
    weights: Vec<f64>,
}

impl MollifierSpec {
    pub fn new(delta: f64, grid: &Grid) -> Result<Self> {
        let h = grid.dx.max(grid.dy);
        if !(delta >= 2.0 * h) {
            return Err(Error::UnresolvedMollifier { delta, min: 2.0 * h });
        }
        let rx = (delta / grid.dx).ceil() as usize;
        let ry = (delta / grid.dy).ceil() as usize;
        if rx >= grid.nx || ry >= grid.ny {
            return Err(Error::InvalidParam {
                name: "delta",
                reason: format!("kernel radius {delta} exceeds the domain"),
            });
        }
        let mut weights = Vec::with_capacity((2 * rx + 1) * (2 * ry + 1));
        for dj in -(ry as isize)..=ry as isize {
            for di in -(rx as isize)..=rx as isize {
                let (x, y) = (di as f64 * grid.dx, dj as f64 * grid.dy);
                weights.push(bump((x * x + y * y).sqrt() / delta));
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            delta,
            reach: (rx, ry),
            weights,
        })
    }

    /// Kernel weight at cell offset `(di, dj)`.
    pub fn weight(&self, di: isize, dj: isize) -> f64 {
        let (rx, ry) = (self.reach.0 as isize, self.reach.1 as isize);
        if di.abs() > rx || dj.abs() > ry {
            return 0.0;
        }
        self.weights[((dj + ry) * (2 * rx + 1) + di + rx) as usize]
    }

    pub fn reach(&self) -> (usize, usize) {
        self.reach
    }
}

/// Even reflection across the boundary faces.
#[inline]
fn reflect(k: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if k < 0 {
        -k - 1
    } else if k >= n {
        2 * n - k - 1
    } else {
        k
    };
    r as usize
}

/// Discrete convolution with the kernel. Values beyond the boundary are
/// taken from the mirror image, which keeps the operator symmetric so the
/// grid sum is preserved along with constants.
pub fn mollify(f: &Field, spec: &MollifierSpec, grid: &Grid) -> Field {
    let (rx, ry) = (spec.reach.0 as isize, spec.reach.1 as isize);
    let mut out = grid.zeros();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let mut acc = 0.0;
            let mut k = 0;
            for dj in -ry..=ry {
                let jj = reflect(j as isize + dj, grid.ny);
                for di in -rx..=rx {
                    let w = spec.weights[k];
                    k += 1;
                    if w != 0.0 {
                        acc += w * f[(reflect(i as isize + di, grid.nx), jj)];
                    }
                }
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Solves `(-Lap + 1/r + rho0) u = source` componentwise with `u = 0` on the
/// boundary.
pub fn solve_initial_velocity(
    rho0: &Field,
    source: &VectorField,
    grid: &Grid,
    r: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(VectorField, [SolveReport; 2])> {
    let spec = LinearOperatorSpec::new(1.0, rho0.map(|v| v + 1.0 / r))?;
    let (ux, rx) = linsolve::solve(&spec, grid, &source.x, tol, max_iter)?;
    let (uy, ry) = linsolve::solve(&spec, grid, &source.y, tol, max_iter)?;
    Ok((VectorField::new(ux, uy), [rx, ry]))
}

/// Outcome of the initial-data construction at one value of `R`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitReport {
    pub r: f64,
    pub nx: usize,
    pub half_width: f64,
    /// `|grad(w_R - u0)|_{L2}`
    pub grad_error: f64,
    /// `|sqrt(rho_R) w_R - sqrt(rho0) u0|_{L2}`
    pub momentum_error: f64,
    pub mass_rho0: f64,
    pub mass_rho_hat: f64,
    pub mass_rho_lifted: f64,
    /// Radius holding 3/4 of the target mass, when the target is normalized.
    pub n0: Option<f64>,
    /// `int_{B_{N0}} rho_hat`
    pub mass_rho_hat_in_n0: Option<f64>,
    pub min_rho_lifted: f64,
    pub solver_iterations: usize,
    pub solver_residual: f64,
}

impl InitReport {
    pub const CSV_HEADER: &'static str = "r,nx,half_width,grad_error,momentum_error,mass_rho0,mass_rho_hat,\
mass_rho_lifted,n0,mass_rho_hat_in_n0,min_rho_lifted,solver_iterations,solver_residual";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        format!(
            "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{:.17e},{},{:.17e}",
            self.r,
            self.nx,
            self.half_width,
            self.grad_error,
            self.momentum_error,
            self.mass_rho0,
            self.mass_rho_hat,
            self.mass_rho_lifted,
            opt(self.n0),
            opt(self.mass_rho_hat_in_n0),
            self.min_rho_lifted,
            self.solver_iterations,
            self.solver_residual,
        )
    }
}

/// Runs the full pipeline for `cfg.init` on `cfg.grid` with `R = cfg.phys.r_penalty`.
pub fn build_initial_state(cfg: &SimConfig) -> Result<(State, InitReport)> {
    let grid = &cfg.grid;
    let r = cfg.phys.r_penalty;
    let fam = cfg.init;

    let rho0 = grid.sample(|x, y| fam.rho(x, y));
    let u0 = grid.sample_vector(|x, y| fam.velocity(x, y));
    let eta0 = grid.sample(|x, y| fam.eta(x, y));

    let rho_hat = cutoff(&rho0, grid, r);
    let rho_r = lift_density(&rho_hat, grid, r);
    let eta_r = cutoff(&eta0, grid, r);

    let sqrt_rho0 = rho0.map(|v| v.max(0.0).sqrt());
    let target = u0.mul_scalar(&sqrt_rho0);
    let moll = MollifierSpec::new(1.0 / r, grid)?;
    let h = VectorField::new(mollify(&target.x, &moll, grid), mollify(&target.y, &moll, grid));

    // v_k = phi_R grad(u0_k); the source needs div v_k for each component k
    let mut vx = VectorField::zeros(grid);
    let mut vy = VectorField::zeros(grid);
    for (i, j, x, y) in grid.cells() {
        let jac = fam.velocity_jacobian(x, y);
        let phi = cutoff_factor(x, y, r);
        vx.x[(i, j)] = phi * jac[0][0];
        vx.y[(i, j)] = phi * jac[0][1];
        vy.x[(i, j)] = phi * jac[1][0];
        vy.y[(i, j)] = phi * jac[1][1];
    }
    let sqrt_rho_r = rho_r.map(f64::sqrt);
    let source = h
        .mul_scalar(&sqrt_rho_r)
        .axpy(-1.0, &VectorField::new(divergence(&vx, grid), divergence(&vy, grid)));

    let (u_r, reports) = solve_initial_velocity(&rho_r, &source, grid, r, cfg.solver.tol, cfg.solver.max_iter)?;
    let w_r = cutoff_vector(&u_r, grid, r);

    let grad_error = gradient_l2_vector(&w_r.axpy(-1.0, &u0), grid);
    let momentum_error = w_r.mul_scalar(&sqrt_rho_r).axpy(-1.0, &target).l2_norm(grid);

    let (n0, mass_rho_hat_in_n0) = if fam.is_mass_normalized() {
        let n0 = ball_radius_for_mass(&rho0, grid, 0.75)?;
        (Some(n0), Some(mass_in_ball(&rho_hat, grid, n0)))
    } else {
        (None, None)
    };

    let report = InitReport {
        r,
        nx: grid.nx,
        half_width: grid.half_width,
        grad_error,
        momentum_error,
        mass_rho0: rho0.integral(grid),
        mass_rho_hat: rho_hat.integral(grid),
        mass_rho_lifted: rho_r.integral(grid),
        n0,
        mass_rho_hat_in_n0,
        min_rho_lifted: rho_r.min(),
        solver_iterations: reports[0].iterations + reports[1].iterations,
        solver_residual: reports[0].relative_residual.max(reports[1].relative_residual),
    };
    let state = State::from_primitive(0.0, rho_r, &u_r, eta_r);
    state.check_admissible()?;
    Ok((state, report))
}
