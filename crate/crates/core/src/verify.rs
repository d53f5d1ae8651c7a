//! Run orchestration and the verification harnesses behind the CLI:
//! manufactured solutions, identity-residual ladders, the initial-data
//! check over a ladder of `R`, twin runs, and the weighted-inequality probe.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::{InitFamily, Integrator, MmsCase, SimConfig, SwirlSpec};
use crate::diagnostics::{residual_flux_identity, residual_pressure_transport, Diagnostics, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, VectorField};
use crate::init::{build_initial_state, InitReport};
use crate::io::{write_snapshot, CsvWriter};
use crate::params::PhysParams;
use crate::potential::PotentialSpec;
use crate::state::{ball_radius_for_mass, State};
use crate::stepper::{Forcing, Stepper, Tendency};
use crate::weights::{inequality_probe, ProbeReport};

/// Observed order `log2(e_coarse / e_fine)`; `None` when either error is 0.
pub fn observed_order(coarse: f64, fine: f64) -> Option<f64> {
    if coarse > 0.0 && fine > 0.0 {
        Some((coarse / fine).log2())
    } else {
        None
    }
}

fn f64_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSummary {
    pub nx: usize,
    pub ny: usize,
    pub half_width: f64,
    pub dx: f64,
    pub dy: f64,
}

impl From<&Grid> for GridSummary {
    fn from(g: &Grid) -> Self {
        Self {
            nx: g.nx,
            ny: g.ny,
            half_width: g.half_width,
            dx: g.dx,
            dy: g.dy,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: SimConfig,
    pub grid: GridSummary,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<PathBuf>,
    pub exit_status: String,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Collects output files and writes `manifest.json` at the end of a command.
pub struct OutputDir {
    pub root: PathBuf,
    command: String,
    started: f64,
    files: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path, command: &str) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            command: command.to_string(),
            started: unix_now(),
            files: Vec::new(),
        })
    }

    /// Path for a new output file, recorded in the inventory.
    pub fn file(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.root.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.files.push(PathBuf::from(name));
        Ok(p)
    }

    pub fn finish(self, cfg: &SimConfig, status: &str) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            grid: GridSummary::from(&cfg.grid),
            started_unix: self.started,
            finished_unix: unix_now(),
            outputs: self.files,
            exit_status: status.to_string(),
        };
        let path = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

/// Ball radius for the mass diagnostics: `N = 2 N0` for unit-mass targets,
/// capped at the inscribed radius; the inscribed radius otherwise.
pub fn diagnostic_ball_radius(cfg: &SimConfig) -> Result<(Option<f64>, f64)> {
    let g = &cfg.grid;
    if cfg.init.is_mass_normalized() {
        let rho0 = g.sample(|x, y| cfg.init.rho(x, y));
        let n0 = ball_radius_for_mass(&rho0, g, 0.75)?;
        Ok((Some(n0), (2.0 * n0).min(g.half_width)))
    } else {
        Ok((None, g.half_width))
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub init: InitReport,
    pub initial_state: State,
    pub final_state: State,
    pub records: Vec<DiagnosticsRecord>,
    pub steps: usize,
    pub positivity_clips: usize,
    pub n0: Option<f64>,
    pub ball_radius: f64,
    pub floor: f64,
}

fn write_fields(out: &mut OutputDir, grid: &Grid, state: &State, step: usize, floor: f64) -> Result<()> {
    let u = state.velocity(floor);
    for (name, f) in [("rho", &state.rho), ("ux", &u.x), ("uy", &u.y), ("eta", &state.eta)] {
        let path = out.file(&format!("snapshots/{name}_{step:06}.bin"))?;
        write_snapshot(&path, grid, state.t, name, f)?;
    }
    Ok(())
}

/// Builds the initial state, advances it to `t_end` (or `max_steps`), and
/// records diagnostics. With `out` set, writes `diagnostics.csv`,
/// `init_report.csv` and snapshots there.
pub fn run_simulation(cfg: &SimConfig, mut out: Option<&mut OutputDir>) -> Result<RunOutcome> {
    cfg.validate()?;
    let (state0, init) = build_initial_state(cfg)?;
    let floor = cfg.resolve_density_floor(state0.rho.max())?;
    let (n0, ball_radius) = diagnostic_ball_radius(cfg)?;
    let stepper = Stepper::new(cfg, floor);
    let mut diag = Diagnostics::new(cfg.grid, cfg.phys.clone(), stepper.potential.clone(), floor, ball_radius, &state0.eta);
    diag.residuals = cfg.residual_diagnostics;

    let mut csv = None;
    if let Some(o) = out.as_deref_mut() {
        let mut w = CsvWriter::create(&o.file("init_report.csv")?, InitReport::CSV_HEADER)?;
        w.row(&init.csv_row())?;
        w.finish()?;
        csv = Some(CsvWriter::create(&o.file("diagnostics.csv")?, DiagnosticsRecord::CSV_HEADER)?);
        write_fields(o, &cfg.grid, &state0, 0, floor)?;
    }

    let mut records = vec![diag.record(0, &state0, None)?];
    if let Some(w) = csv.as_mut() {
        w.row(&records[0].csv_row())?;
    }
    let mut step = 0;
    let mut clips = 0;
    let result = stepper.advance_with(&state0, cfg.t_end, cfg.max_steps, |prev, next, rep| {
        step += 1;
        clips += rep.positivity_clips;
        let last = next.t >= cfg.t_end || cfg.max_steps == Some(step);
        if step % cfg.output_every == 0 || last {
            let r = diag.record(step, next, Some(prev))?;
            if let Some(w) = csv.as_mut() {
                w.row(&r.csv_row())?;
            }
            records.push(r);
        }
        if let Some(o) = out.as_deref_mut() {
            if (cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0) || last {
                write_fields(o, &cfg.grid, next, step, floor)?;
            }
        }
        Ok(())
    });
    if let Some(w) = csv {
        w.finish()?;
    }
    let (final_state, _) = result.map_err(|e| e.error)?;
    Ok(RunOutcome {
        init,
        initial_state: state0,
        final_state,
        records,
        steps: step,
        positivity_clips: clips,
        n0,
        ball_radius,
        floor,
    })
}

// ---------------------------------------------------------------------------
// Manufactured solutions

#[derive(Clone, Debug, Serialize)]
pub struct MmsLevel {
    pub n: usize,
    pub dx: f64,
    pub steps: usize,
    pub err_rho: Option<f64>,
    pub err_u: Option<f64>,
    pub err_eta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MmsReport {
    pub case: MmsCase,
    pub levels: Vec<MmsLevel>,
    /// Orders between adjacent levels: `[rho, u, eta]`.
    pub orders: Vec<[Option<f64>; 3]>,
}

impl MmsReport {
    pub const CSV_HEADER: &'static str = "n,dx,steps,err_rho,err_u,err_eta,order_rho,order_u,order_eta";

    pub fn csv_rows(&self) -> Vec<String> {
        self.levels
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let o = if k == 0 { [None; 3] } else { self.orders[k - 1] };
                format!(
                    "{},{:e},{},{},{},{},{},{},{}",
                    l.n,
                    l.dx,
                    l.steps,
                    f64_cell(l.err_rho),
                    f64_cell(l.err_u),
                    f64_cell(l.err_eta),
                    f64_cell(o[0]),
                    f64_cell(o[1]),
                    f64_cell(o[2]),
                )
            })
            .collect()
    }

    /// Order the case is judged on, between the two finest levels: `eta` for
    /// diffusion, `rho` for transport, the smallest of the three otherwise.
    pub fn judged_order(&self) -> Option<f64> {
        let last = self.orders.last()?;
        match self.case {
            MmsCase::EtaDiffusion => last[2],
            MmsCase::RhoAdvection => last[0],
            MmsCase::Coupled => {
                let all: Option<Vec<f64>> = last.iter().copied().collect();
                all.map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
            }
        }
    }
}

/// Steady manufactured fields for the fully coupled case.
#[derive(Clone, Debug)]
pub struct SteadyManufactured {
    pub phys: PhysParams,
    pub potential: PotentialSpec,
    pub swirl: SwirlSpec,
}

impl SteadyManufactured {
    pub fn rho(&self, x: f64, y: f64) -> f64 {
        1.0 + 0.3 * (-(x * x + y * y) / 0.08).exp()
    }

    pub fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        self.swirl.value(x, y)
    }

    /// Near the walls `eta = exp(-Phi)`, which carries no particle flux.
    pub fn eta(&self, x: f64, y: f64) -> f64 {
        let (a, b) = (x - 0.15, y + 0.1);
        (-self.potential.value(x, y)).exp() * (1.0 + 0.3 * (-(a * a + b * b) / 0.04).exp())
    }

    /// Sources that make the fields an exact steady solution, from central
    /// differences of the closed forms with step `1e-4`.
    pub fn sources(&self, grid: &Grid) -> Tendency {
        let h = 1e-4;
        let p = &self.phys;
        let phi = self.potential;
        let d = |f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, axis: usize| {
            if axis == 0 {
                (f(x + h, y) - f(x - h, y)) / (2.0 * h)
            } else {
                (f(x, y + h) - f(x, y - h)) / (2.0 * h)
            }
        };
        let lap = |f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64| {
            (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * f(x, y)) / (h * h)
        };
        let u1 = |x: f64, y: f64| self.velocity(x, y)[0];
        let u2 = |x: f64, y: f64| self.velocity(x, y)[1];
        let div_u = |x: f64, y: f64| d(&u1, x, y, 0) + d(&u2, x, y, 1);
        let m1 = |x: f64, y: f64| self.rho(x, y) * u1(x, y);
        let m2 = |x: f64, y: f64| self.rho(x, y) * u2(x, y);
        let m11 = |x: f64, y: f64| m1(x, y) * u1(x, y);
        let m12 = |x: f64, y: f64| m1(x, y) * u2(x, y);
        let m22 = |x: f64, y: f64| m2(x, y) * u2(x, y);
        let total_p = |x: f64, y: f64| p.pressure(self.rho(x, y)) + self.eta(x, y);
        let e1 = |x: f64, y: f64| self.eta(x, y) * (u1(x, y) - phi.gradient(x, y)[0]);
        let e2 = |x: f64, y: f64| self.eta(x, y) * (u2(x, y) - phi.gradient(x, y)[1]);
        let eta = |x: f64, y: f64| self.eta(x, y);

        let mut t = Tendency {
            rho: grid.zeros(),
            m: VectorField::zeros(grid),
            eta: grid.zeros(),
        };
        let inv_r = p.inv_r();
        for (i, j, x, y) in grid.cells() {
            let gphi = phi.gradient(x, y);
            let coupling = self.eta(x, y) + p.beta * self.rho(x, y);
            t.rho[(i, j)] = d(&m1, x, y, 0) + d(&m2, x, y, 1);
            t.m.x[(i, j)] = d(&m11, x, y, 0) + d(&m12, x, y, 1) + d(&total_p, x, y, 0)
                - p.mu * lap(&u1, x, y)
                - (p.lambda + p.mu) * d(&div_u, x, y, 0)
                + coupling * gphi[0]
                + inv_r * u1(x, y);
            t.m.y[(i, j)] = d(&m12, x, y, 0) + d(&m22, x, y, 1) + d(&total_p, x, y, 1)
                - p.mu * lap(&u2, x, y)
                - (p.lambda + p.mu) * d(&div_u, x, y, 1)
                + coupling * gphi[1]
                + inv_r * u2(x, y);
            t.eta[(i, j)] = d(&e1, x, y, 0) + d(&e2, x, y, 1) - lap(&eta, x, y);
        }
        t
    }
}

struct ConstantSources(Tendency);

impl Forcing for ConstantSources {
    fn add_sources(&self, _t: f64, _grid: &Grid, tend: &mut Tendency) {
        for k in 0..tend.rho.data.len() {
            tend.rho.data[k] += self.0.rho.data[k];
            tend.m.x.data[k] += self.0.m.x.data[k];
            tend.m.y.data[k] += self.0.m.y.data[k];
            tend.eta.data[k] += self.0.eta.data[k];
        }
    }
}

fn mms_level(cfg: &SimConfig, n: usize) -> Result<MmsLevel> {
    let grid = Grid::square(n, cfg.grid.half_width)?;
    let lcfg = cfg.with_grid(grid);
    let t_end = cfg.mms.t_end;
    let l = grid.half_width;
    let zero_u = VectorField::zeros(&grid);

    let (stepper, state0, exact): (Stepper, State, Box<dyn Fn(f64) -> (Option<Field>, Option<VectorField>, Option<Field>)>) =
        match cfg.mms.case {
            MmsCase::EtaDiffusion => {
                let k = std::f64::consts::PI / l;
                let eta = move |t: f64| {
                    let a = (-2.0 * k * k * t).exp();
                    grid.sample(move |x, y| 1.0 + a * (k * x).cos() * (k * y).cos())
                };
                let mut s = Stepper::new(&lcfg, 1e-12);
                // transport velocity equal to grad Phi cancels the drift
                s.prescribed_velocity = Some(s.potential.grad_phi.clone());
                let st = State::from_primitive(0.0, grid.constant(1.0), &zero_u, eta(0.0));
                (s, st, Box::new(move |t| (None, None, Some(eta(t)))))
            }
            MmsCase::RhoAdvection => {
                let (vx, vy, s2) = (1.0, 0.5, 0.25);
                let rho = move |t: f64| {
                    grid.sample(move |x, y| {
                        let (a, b) = (x - vx * t, y - vy * t);
                        (-(a * a + b * b) / (2.0 * s2)).exp()
                    })
                };
                let mut s = Stepper::new(&lcfg, 1e-12);
                s.prescribed_velocity = Some(grid.sample_vector(|_, _| [vx, vy]));
                let st = State::from_primitive(0.0, rho(0.0), &zero_u, grid.zeros());
                (s, st, Box::new(move |t| (Some(rho(t)), None, None)))
            }
            MmsCase::Coupled => {
                let m = SteadyManufactured {
                    phys: cfg.phys.clone(),
                    potential: cfg.potential,
                    swirl: SwirlSpec {
                        amp: 0.5,
                        width: 0.2,
                        compress: 0.5,
                    },
                };
                let rho = grid.sample(|x, y| m.rho(x, y));
                let u = grid.sample_vector(|x, y| m.velocity(x, y));
                let eta = grid.sample(|x, y| m.eta(x, y));
                let mut s = Stepper::new(&lcfg, 1e-12);
                s.forcing = Some(Box::new(ConstantSources(m.sources(&grid))));
                let st = State::from_primitive(0.0, rho.clone(), &u, eta.clone());
                (s, st, Box::new(move |_| (Some(rho.clone()), Some(u.clone()), Some(eta.clone()))))
            }
        };

    let (fin, reps) = stepper
        .advance_with(&state0, t_end, None, |_, _, _| Ok(()))
        .map_err(|e| e.error)?;
    let (er, eu, ee) = exact(fin.t);
    let floor = stepper.floor;
    Ok(MmsLevel {
        n,
        dx: grid.dx,
        steps: reps.len(),
        err_rho: er.map(|r| fin.rho.axpy(-1.0, &r).l2_norm(&grid)),
        err_u: eu.map(|u| fin.velocity(floor).axpy(-1.0, &u).l2_norm(&grid)),
        err_eta: ee.map(|e| fin.eta.axpy(-1.0, &e).l2_norm(&grid)),
    })
}

pub fn run_mms(cfg: &SimConfig) -> Result<MmsReport> {
    if cfg.mms.levels.len() < 2 {
        return Err(Error::Config("mms.levels needs at least two grids".into()));
    }
    let levels = cfg
        .mms
        .levels
        .iter()
        .map(|&n| mms_level(cfg, n))
        .collect::<Result<Vec<_>>>()?;
    let orders = levels
        .windows(2)
        .map(|w| {
            let o = |a: Option<f64>, b: Option<f64>| observed_order(a?, b?);
            [
                o(w[0].err_rho, w[1].err_rho),
                o(w[0].err_u, w[1].err_u),
                o(w[0].err_eta, w[1].err_eta),
            ]
        })
        .collect();
    Ok(MmsReport {
        case: cfg.mms.case,
        levels,
        orders,
    })
}

// ---------------------------------------------------------------------------
// Identity residuals under refinement

#[derive(Clone, Debug, Serialize)]
pub struct ResidualLevel {
    pub n: usize,
    pub dt: f64,
    pub pressure_transport: f64,
    pub flux_identity: f64,
}

/// One forward-Euler step from the analytic target sampled on each grid,
/// with `dt` proportional to `dx` (fixed by the CFL limit on the coarsest
/// grid), and the two identity residuals of that step.
pub fn residual_ladder(cfg: &SimConfig, levels: &[usize]) -> Result<Vec<ResidualLevel>> {
    let mut out = Vec::new();
    let mut dt_per_dx = None;
    for &n in levels {
        let grid = Grid::square(n, cfg.grid.half_width)?;
        let mut lcfg = cfg.with_grid(grid);
        lcfg.integrator = Integrator::ForwardEuler;
        let fam = cfg.init;
        let st = State::from_primitive(
            0.0,
            grid.sample(|x, y| fam.rho(x, y)),
            &grid.sample_vector(|x, y| fam.velocity(x, y)),
            grid.sample(|x, y| fam.eta(x, y)),
        );
        let floor = lcfg.resolve_density_floor(st.rho.max())?;
        let stepper = Stepper::new(&lcfg, floor);
        let ratio = match dt_per_dx {
            Some(r) => r,
            None => {
                let r = stepper.compute_dt(&st)? / grid.dx;
                dt_per_dx = Some(r);
                r
            }
        };
        let dt = ratio * grid.dx;
        let (next, _) = stepper.step_with_dt(&st, dt)?;
        out.push(ResidualLevel {
            n,
            dt,
            pressure_transport: residual_pressure_transport(&st, &next, dt, &lcfg.phys, &grid, floor),
            flux_identity: residual_flux_identity(&st, &next, &stepper.potential, dt, &lcfg.phys, &grid, floor),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Initial-data check over R

#[derive(Clone, Debug, Serialize)]
pub struct InitCheckReport {
    pub reports: Vec<InitReport>,
    pub norms_decrease: bool,
    pub mass_threshold_holds: bool,
}

impl InitCheckReport {
    pub fn passed(&self) -> bool {
        self.norms_decrease && self.mass_threshold_holds
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0) || v.windows(2).all(|w| w[1] < w[0])
}

pub fn run_init_check(cfg: &SimConfig) -> Result<InitCheckReport> {
    let mut reports = Vec::new();
    for &r in &cfg.init_check.r_ladder {
        let mut c = cfg.clone();
        c.phys.r_penalty = r;
        c.phys.validate()?;
        reports.push(build_initial_state(&c)?.1);
    }
    let grad: Vec<f64> = reports.iter().map(|r| r.grad_error).collect();
    let mom: Vec<f64> = reports.iter().map(|r| r.momentum_error).collect();
    let mass_threshold_holds = reports
        .iter()
        .all(|r| r.mass_rho_hat_in_n0.map_or(true, |m| m >= cfg.init_check.mass_threshold));
    Ok(InitCheckReport {
        norms_decrease: strictly_decreasing(&grad) && strictly_decreasing(&mom),
        mass_threshold_holds,
        reports,
    })
}

// ---------------------------------------------------------------------------
// Twin runs

#[derive(Clone, Debug, Serialize)]
pub struct TwinSample {
    pub step: usize,
    pub t: f64,
    pub rho_diff: f64,
    pub momentum_diff: f64,
    pub eta_diff: f64,
}

impl TwinSample {
    pub fn total(&self) -> f64 {
        self.rho_diff + self.momentum_diff + self.eta_diff
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TwinReport {
    pub epsilon: f64,
    pub samples: Vec<TwinSample>,
    /// `max_t G(t) / G(0)` with `G` the sum of the three difference norms.
    pub growth: f64,
    pub identical: bool,
}

impl TwinReport {
    pub const CSV_HEADER: &'static str = "step,t,rho_diff,momentum_diff,eta_diff";

    pub fn csv_rows(&self) -> Vec<String> {
        self.samples
            .iter()
            .map(|s| format!("{},{:e},{:e},{:e},{:e}", s.step, s.t, s.rho_diff, s.momentum_diff, s.eta_diff))
            .collect()
    }

    pub fn final_total(&self) -> f64 {
        self.samples.last().map_or(0.0, TwinSample::total)
    }
}

/// Unit-L2 smooth bump used to perturb the initial data.
fn unit_bump(grid: &Grid) -> Field {
    let b = grid.sample(|x, y| {
        let (a, c) = (x - 0.1, y + 0.05);
        (-(a * a + c * c) / 0.06).exp()
    });
    b.scale(1.0 / b.l2_norm(grid))
}

fn twin_sample(step: usize, a: &State, b: &State, grid: &Grid, floor: f64) -> TwinSample {
    let ua = a.velocity(floor);
    let ub = b.velocity(floor);
    let sqrt_rho = a.rho.map(|r| r.max(0.0).sqrt());
    TwinSample {
        step,
        t: a.t,
        rho_diff: b.rho.axpy(-1.0, &a.rho).l2_norm(grid),
        momentum_diff: ub.axpy(-1.0, &ua).mul_scalar(&sqrt_rho).l2_norm(grid),
        eta_diff: b.eta.axpy(-1.0, &a.eta).l2_norm(grid),
    }
}

/// Runs the configured initial data and a copy perturbed by `epsilon` in each
/// of `rho`, `sqrt(rho) u` and `eta`, on the same sequence of time steps.
pub fn run_twin(cfg: &SimConfig, epsilon: f64) -> Result<TwinReport> {
    let grid = cfg.grid;
    let (a0, _) = build_initial_state(cfg)?;
    let floor = cfg.resolve_density_floor(a0.rho.max())?;
    let bump = unit_bump(&grid);
    let u_a = a0.velocity(floor);
    let sqrt_rho = a0.rho.map(f64::sqrt);
    let du = bump.scale(epsilon / bump.zip_map(&sqrt_rho, |b, s| b * s).l2_norm(&grid));
    let u_b = VectorField::new(u_a.x.axpy(1.0, &du), u_a.y.clone());
    let rho_b = a0.rho.axpy(epsilon, &bump);
    let eta_b = a0.eta.axpy(epsilon, &bump);
    let b0 = State::from_primitive(0.0, rho_b, &u_b, eta_b);
    let b0 = if epsilon == 0.0 { a0.clone() } else { b0 };
    b0.check_admissible()?;

    let stepper = Stepper::new(cfg, floor);
    let mut samples = vec![twin_sample(0, &a0, &b0, &grid, floor)];
    let (mut a, mut b) = (a0, b0);
    let mut identical = a == b;
    for step in 1..=cfg.twin.steps {
        let dt = stepper.compute_dt(&a)?;
        a = stepper.step_with_dt(&a, dt)?.0;
        b = stepper.step_with_dt(&b, dt)?.0;
        identical &= a == b;
        samples.push(twin_sample(step, &a, &b, &grid, floor));
    }
    let g0 = samples[0].total();
    let growth = if g0 > 0.0 {
        samples.iter().map(TwinSample::total).fold(0.0, f64::max) / g0
    } else {
        0.0
    };
    Ok(TwinReport {
        epsilon,
        samples,
        growth,
        identical,
    })
}

// ---------------------------------------------------------------------------
// Weighted inequality probe

/// The bundled probe density: unit-mass Gaussian of width 1/2.
pub fn probe_density(grid: &Grid) -> Field {
    let fam = InitFamily::Gaussian {
        rho_width: 0.5,
        velocity: SwirlSpec::default(),
        eta_amp: 0.0,
        eta_width: 1.0,
    };
    grid.sample(|x, y| fam.rho(x, y))
}

/// Twenty smooth test fields of varied shape, spread and offset.
pub fn probe_family(grid: &Grid) -> Vec<Field> {
    let mut out = Vec::with_capacity(20);
    for k in 0..20 {
        let kf = k as f64;
        let w = 0.4 + 0.15 * kf;
        let (cx, cy) = (0.3 * (kf * 0.7).sin(), 0.3 * (kf * 1.3).cos());
        let freq = 0.5 * (k % 5) as f64;
        let offset = if k % 4 == 0 { 1.0 } else { 0.0 };
        out.push(grid.sample(|x, y| {
            let (a, b) = (x - cx, y - cy);
            offset + (-(a * a + b * b) / (2.0 * w * w)).exp() * (1.0 + 0.5 * (freq * (a + 2.0 * b)).cos())
        }));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeSummary {
    pub reports: Vec<ProbeReport>,
    /// Ratios of the doubled fields.
    pub doubled_ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl ProbeSummary {
    pub const CSV_HEADER: &'static str = "field,weighted_l2,rho_l2,grad_l2,ratio,ratio_doubled";

    pub fn csv_rows(&self) -> Vec<String> {
        self.reports
            .iter()
            .zip(&self.doubled_ratios)
            .enumerate()
            .map(|(k, (r, d))| format!("{k},{:e},{:e},{:e},{:e},{:e}", r.weighted_l2, r.rho_l2, r.grad_l2, r.ratio, d))
            .collect()
    }

    pub fn max_scale_deviation(&self) -> f64 {
        self.reports
            .iter()
            .zip(&self.doubled_ratios)
            .map(|(r, d)| ((d - r.ratio) / r.ratio).abs())
            .fold(0.0, f64::max)
    }
}

pub fn run_probe(cfg: &SimConfig) -> Result<ProbeSummary> {
    let grid = &cfg.grid;
    let rho = probe_density(grid);
    let (n1, m1) = (cfg.probe.n1, cfg.probe.m1);
    let s0 = cfg.phys.sigma0;
    let mut reports = Vec::new();
    let mut doubled_ratios = Vec::new();
    for v in probe_family(grid) {
        reports.push(inequality_probe(&v, &rho, grid, s0, n1, m1)?);
        doubled_ratios.push(inequality_probe(&v.scale(2.0), &rho, grid, s0, n1, m1)?.ratio);
    }
    let min_ratio = reports.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(ProbeSummary {
        reports,
        doubled_ratios,
        min_ratio,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observed_order_of_a_halving_is_one() {
        assert_eq!(observed_order(0.2, 0.1), Some(1.0));
        assert_eq!(observed_order(0.0, 0.1), None);
    }

    #[test]
    fn decreasing_check_accepts_all_zero() {
        assert!(strictly_decreasing(&[0.0, 0.0, 0.0]));
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0, 1.0]));
    }

    #[test]
    fn manufactured_sources_are_conservative() {
        let m = SteadyManufactured {
            phys: PhysParams::default(),
            potential: PotentialSpec::Gaussian { amplitude: 0.5, width: 0.3 },
            swirl: SwirlSpec {
                amp: 0.5,
                width: 0.2,
                compress: 0.5,
            },
        };
        let g = Grid::square(128, 1.0).unwrap();
        let s = m.sources(&g);
        // both sources are divergences of fluxes that vanish at the walls
        assert!(s.rho.integral(&g).abs() < 1e-4, "{}", s.rho.integral(&g));
        assert!(s.eta.integral(&g).abs() < 1e-5, "{}", s.eta.integral(&g));
        assert!(s.rho.max_abs() > 0.1 && s.eta.max_abs() > 0.1);

        let rest = SteadyManufactured {
            swirl: SwirlSpec {
                amp: 0.0,
                width: 1.0,
                compress: 0.0,
            },
            ..m
        };
        assert_eq!(rest.sources(&g).rho.max_abs(), 0.0);
    }

    #[test]
    fn twin_with_zero_perturbation_is_bitwise_identical() {
        let mut cfg = SimConfig::default().with_grid(Grid::square(32, 1.0).unwrap());
        cfg.phys.r_penalty = 8.0;
        cfg.init = InitFamily::Smooth {
            rho_background: 1.0,
            rho_amp: 0.5,
            rho_width: 0.2,
            velocity: SwirlSpec {
                amp: 1.0,
                width: 0.2,
                compress: 0.5,
            },
            eta_background: 0.5,
            eta_amp: 0.5,
            eta_width: 0.2,
        };
        cfg.twin.steps = 5;
        let r = run_twin(&cfg, 0.0).unwrap();
        assert!(r.identical);
        assert!(r.samples.iter().all(|s| s.total() == 0.0));
        let r = run_twin(&cfg, 1e-4).unwrap();
        let s0 = &r.samples[0];
        for d in [s0.rho_diff, s0.momentum_diff, s0.eta_diff] {
            assert!((d - 1e-4).abs() < 1e-9, "{d}");
        }
    }
}
