//! Run configuration and its plain-text `key = value` file format.
//!
//! Keys carry a section prefix (`phys.`, `grid.`, `potential.`, `init.`,
//! `run.`, plus the harness sections `solver.`, `mms.`, `init_check.`,
//! `twin.` and `probe.`). Blank lines and `#` comments are ignored; unknown
//! keys are rejected so typos surface early. See the README for the full
//! key list.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::PhysParams;
use crate::potential::PotentialSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    ForwardEuler,
    SspRk2,
}

/// Gaussian-decayed swirl with an optional compressive part:
/// `u = amp * exp(-|x|^2 / (2 width^2)) * (-y + compress x, x + compress y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SwirlSpec {
    pub amp: f64,
    pub width: f64,
    pub compress: f64,
}

impl Default for SwirlSpec {
    fn default() -> Self {
        Self {
            amp: 0.5,
            width: 0.3,
            compress: 0.5,
        }
    }
}

/// Analytic target `(rho0, u0, eta0)` that the initial-data pipeline
/// approximates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum InitFamily {
    Zero,
    /// Unit-mass Gaussian density, Gaussian particle bump.
    Gaussian {
        rho_width: f64,
        velocity: SwirlSpec,
        eta_amp: f64,
        eta_width: f64,
    },
    /// Unit-mass compactly supported density (true vacuum outside
    /// `bump_radius`), compactly supported particle bump.
    VacuumBump {
        bump_radius: f64,
        velocity: SwirlSpec,
        eta_amp: f64,
        eta_radius: f64,
    },
    /// Density and particles bounded away from zero with Gaussian bumps.
    Smooth {
        rho_background: f64,
        rho_amp: f64,
        rho_width: f64,
        velocity: SwirlSpec,
        eta_background: f64,
        eta_amp: f64,
        eta_width: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MmsCase {
    EtaDiffusion,
    RhoAdvection,
    Coupled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MmsSettings {
    pub case: MmsCase,
    pub levels: Vec<usize>,
    pub t_end: f64,
    /// Observed order the finest pair must reach.
    pub min_order: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitCheckSettings {
    pub r_ladder: Vec<f64>,
    /// Threshold for the mass of the cut-off density inside `B_{N0}`.
    pub mass_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwinSettings {
    pub epsilon: f64,
    pub growth_cap: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeSettings {
    pub n1: f64,
    pub m1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub phys: PhysParams,
    #[serde(skip)]
    pub grid: Grid,
    pub potential: PotentialSpec,
    pub init: InitFamily,
    pub cfl: f64,
    pub t_end: f64,
    pub max_steps: Option<usize>,
    pub integrator: Integrator,
    /// Absolute density floor used for velocity recovery. `None` means
    /// `1e-10 * max(rho0)`, resolved once the initial state exists.
    pub density_floor: Option<f64>,
    /// Write a diagnostics row every this many steps.
    pub output_every: usize,
    /// Write snapshots every this many steps (`0` = initial and final only).
    pub snapshot_every: usize,
    pub residual_diagnostics: bool,
    pub output_dir: PathBuf,
    pub solver: SolverSettings,
    pub mms: MmsSettings,
    pub init_check: InitCheckSettings,
    pub twin: TwinSettings,
    pub probe: ProbeSettings,
}

impl Default for SimConfig {
    fn default() -> Self {
        let phys = PhysParams::default();
        Self {
            grid: Grid::square(64, phys.r_penalty).expect("default grid"),
            phys,
            potential: PotentialSpec::default(),
            init: InitFamily::Zero,
            cfl: 0.4,
            t_end: 0.0,
            max_steps: None,
            integrator: Integrator::SspRk2,
            density_floor: None,
            output_every: 1,
            snapshot_every: 0,
            residual_diagnostics: true,
            output_dir: PathBuf::from("output"),
            solver: SolverSettings {
                tol: 1e-10,
                max_iter: 20_000,
            },
            mms: MmsSettings {
                case: MmsCase::EtaDiffusion,
                levels: vec![32, 64, 128],
                t_end: 0.05,
                min_order: 0.0,
            },
            init_check: InitCheckSettings {
                r_ladder: vec![4.0, 8.0, 16.0],
                mass_threshold: 0.5,
            },
            twin: TwinSettings {
                epsilon: 1e-4,
                growth_cap: 10.0,
                steps: 200,
            },
            probe: ProbeSettings { n1: 1.0, m1: 0.5 },
        }
    }
}

impl SimConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let cfg = Self::from_keys(&mut kv)?;
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_keys(kv: &mut KeyValues) -> Result<Self> {
        let d = SimConfig::default();
        let dp = d.phys;
        let phys = PhysParams {
            mu: kv.f64_or("phys.mu", dp.mu)?,
            lambda: kv.f64_or("phys.lambda", dp.lambda)?,
            a_pressure: kv.f64_or("phys.a", dp.a_pressure)?,
            gamma: kv.f64_or("phys.gamma", dp.gamma)?,
            beta: kv.f64_or("phys.beta", dp.beta)?,
            sigma0: kv.f64_or("phys.sigma0", dp.sigma0)?,
            a_weight: kv.f64_or("phys.a_weight", dp.a_weight)?,
            q: kv.f64_or("phys.q", dp.q)?,
            r_penalty: kv.f64_or("phys.r_penalty", dp.r_penalty)?,
        };
        phys.validate()?;

        let n = kv.usize_opt("grid.n")?;
        let nx = kv.usize_or("grid.nx", n.unwrap_or(64))?;
        let ny = kv.usize_or("grid.ny", n.unwrap_or(nx))?;
        let half_width = kv.f64_or("grid.half_width", phys.r_penalty)?;
        let grid = Grid::new(nx, ny, half_width)?;

        let potential = match kv.str_or("potential.kind", "gaussian")?.as_str() {
            "zero" => PotentialSpec::Zero,
            "gaussian" => PotentialSpec::Gaussian {
                amplitude: kv.f64_or("potential.amplitude", 0.5)?,
                width: kv.f64_or("potential.width", 0.5)?,
            },
            other => return Err(Error::Config(format!("unknown potential.kind `{other}`"))),
        };

        let velocity = SwirlSpec {
            amp: kv.f64_or("init.u_amp", SwirlSpec::default().amp)?,
            width: kv.f64_or("init.u_width", SwirlSpec::default().width)?,
            compress: kv.f64_or("init.u_compress", SwirlSpec::default().compress)?,
        };
        let init = match kv.str_or("init.family", "zero")?.as_str() {
            "zero" => InitFamily::Zero,
            "gaussian" => InitFamily::Gaussian {
                rho_width: kv.f64_or("init.rho_width", 0.5)?,
                velocity,
                eta_amp: kv.f64_or("init.eta_amp", 0.5)?,
                eta_width: kv.f64_or("init.eta_width", 0.5)?,
            },
            "vacuum-gaussian" | "vacuum-bump" => InitFamily::VacuumBump {
                bump_radius: kv.f64_or("init.bump_radius", 0.8)?,
                velocity,
                eta_amp: kv.f64_or("init.eta_amp", 0.5)?,
                eta_radius: kv.f64_or("init.eta_radius", 0.8)?,
            },
            "smooth" => InitFamily::Smooth {
                rho_background: kv.f64_or("init.rho_background", 1.0)?,
                rho_amp: kv.f64_or("init.rho_amp", 0.5)?,
                rho_width: kv.f64_or("init.rho_width", 0.2)?,
                velocity,
                eta_background: kv.f64_or("init.eta_background", 0.5)?,
                eta_amp: kv.f64_or("init.eta_amp", 0.5)?,
                eta_width: kv.f64_or("init.eta_width", 0.25)?,
            },
            other => return Err(Error::Config(format!("unknown init.family `{other}`"))),
        };

        let integrator = match kv.str_or("run.integrator", "ssp-rk2")?.as_str() {
            "ssp-rk2" | "rk2" => Integrator::SspRk2,
            "euler" | "forward-euler" => Integrator::ForwardEuler,
            other => return Err(Error::Config(format!("unknown run.integrator `{other}`"))),
        };

        let mms_case = match kv.str_or("mms.case", "eta-diffusion")?.as_str() {
            "eta-diffusion" => MmsCase::EtaDiffusion,
            "rho-advection" => MmsCase::RhoAdvection,
            "coupled" => MmsCase::Coupled,
            other => return Err(Error::Config(format!("unknown mms.case `{other}`"))),
        };

        Ok(Self {
            phys,
            grid,
            potential,
            init,
            cfl: kv.f64_or("run.cfl", d.cfl)?,
            t_end: kv.f64_or("run.t_end", d.t_end)?,
            max_steps: kv.usize_opt("run.max_steps")?,
            integrator,
            density_floor: kv.f64_opt("run.density_floor")?,
            output_every: kv.usize_or("run.output_every", d.output_every)?,
            snapshot_every: kv.usize_or("run.snapshot_every", d.snapshot_every)?,
            residual_diagnostics: kv.bool_or("run.residual_diagnostics", d.residual_diagnostics)?,
            output_dir: PathBuf::from(kv.str_or("run.output_dir", "output")?),
            solver: SolverSettings {
                tol: kv.f64_or("solver.tol", d.solver.tol)?,
                max_iter: kv.usize_or("solver.max_iter", d.solver.max_iter)?,
            },
            mms: MmsSettings {
                case: mms_case,
                levels: kv.usize_list_or("mms.levels", &d.mms.levels)?,
                t_end: kv.f64_or("mms.t_end", d.mms.t_end)?,
                min_order: kv.f64_or("mms.min_order", d.mms.min_order)?,
            },
            init_check: InitCheckSettings {
                r_ladder: kv.f64_list_or("init_check.r_ladder", &d.init_check.r_ladder)?,
                mass_threshold: kv.f64_or("init_check.mass_threshold", d.init_check.mass_threshold)?,
            },
            twin: TwinSettings {
                epsilon: kv.f64_or("twin.epsilon", d.twin.epsilon)?,
                growth_cap: kv.f64_or("twin.growth_cap", d.twin.growth_cap)?,
                steps: kv.usize_or("twin.steps", d.twin.steps)?,
            },
            probe: ProbeSettings {
                n1: kv.f64_or("probe.n1", d.probe.n1)?,
                m1: kv.f64_or("probe.m1", d.probe.m1)?,
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.phys.validate()?;
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::InvalidParam {
                name: "cfl",
                reason: format!("must lie in (0, 1), got {}", self.cfl),
            });
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidParam {
                name: "t_end",
                reason: format!("must be finite and >= 0, got {}", self.t_end),
            });
        }
        if let Some(f) = self.density_floor {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::InvalidParam {
                    name: "density_floor",
                    reason: format!("must be > 0, got {f}"),
                });
            }
        }
        if !self.potential.is_valid() {
            return Err(Error::InvalidParam {
                name: "potential",
                reason: "amplitude must be >= 0 and width > 0".into(),
            });
        }
        if self.output_every == 0 {
            return Err(Error::InvalidParam {
                name: "output_every",
                reason: "must be >= 1".into(),
            });
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::InvalidParam {
                name: "solver.tol",
                reason: "must be > 0".into(),
            });
        }
        Ok(())
    }

    /// Density floor for velocity recovery given the initial peak density.
    ///
    /// The configured value must not exceed `1e-8 * max_rho0`.
    pub fn resolve_density_floor(&self, max_rho0: f64) -> Result<f64> {
        let scale = if max_rho0 > 0.0 { max_rho0 } else { 1.0 };
        match self.density_floor {
            None => Ok(1e-10 * scale),
            Some(f) if f <= 1e-8 * scale => Ok(f),
            Some(f) => Err(Error::InvalidParam {
                name: "density_floor",
                reason: format!("{f:e} exceeds 1e-8 * max(rho0) = {:e}", 1e-8 * scale),
            }),
        }
    }

    pub fn with_grid(&self, grid: Grid) -> Self {
        Self {
            grid,
            ..self.clone()
        }
    }
}

/// Parsed `key = value` pairs, consumed as the config is built.
#[derive(Debug, Default)]
struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let key = k.trim().to_string();
            if entries
                .insert(key.clone(), (lineno + 1, v.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            Some((k, (line, _))) => Err(Error::Config(format!("line {line}: unknown key `{k}`"))),
            None => Ok(()),
        }
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|(line, v)| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("line {line}: `{key}` expects a number, got `{v}`")))
            })
            .transpose()
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn usize_opt(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key)
            .map(|(line, v)| {
                v.parse::<usize>().map_err(|_| {
                    Error::Config(format!("line {line}: `{key}` expects a non-negative integer, got `{v}`"))
                })
            })
            .transpose()
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize_opt(key)?.unwrap_or(default))
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some((_, v)) if matches!(v.as_str(), "true" | "yes" | "1" | "on") => Ok(true),
            Some((_, v)) if matches!(v.as_str(), "false" | "no" | "0" | "off") => Ok(false),
            Some((line, v)) => Err(Error::Config(format!("line {line}: `{key}` expects a boolean, got `{v}`"))),
        }
    }

    fn str_or(&mut self, key: &str, default: &str) -> Result<String> {
        Ok(self.take(key).map(|(_, v)| v).unwrap_or_else(|| default.to_string()))
    }

    fn f64_list_or(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("line {line}: bad number `{s}` in `{key}`")))
                })
                .collect(),
        }
    }

    fn usize_list_or(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.take(key) {
            None => Ok(default.to_vec()),
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("line {line}: bad integer `{s}` in `{key}`")))
                })
                .collect(),
        }
    }
}
