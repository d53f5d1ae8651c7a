//! Finite-volume simulator for the two-dimensional compressible
//! Navier-Stokes-Smoluchowski system on a square box, with vacuum in the
//! initial density, plus the harnesses that verify it.
//!
//! The state is `(rho, m = rho u, eta)` on a cell-centred grid. See
//! [`stepper::Stepper`] for the time integration, [`init`] for the
//! regularised initial data and [`diagnostics`] for the energy and
//! weighted-norm monitors.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod init;
pub mod io;
pub mod linsolve;
pub mod ops;
pub mod params;
pub mod potential;
pub mod state;
pub mod stepper;
pub mod targets;
pub mod verify;
pub mod weights;

pub use config::SimConfig;
pub use error::{Error, Result};
pub use grid::{Field, Grid, VectorField};
pub use state::State;

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidGrid(_)
            | Error::InvalidParam { .. }
            | Error::Config(_)
            | Error::UnresolvedMollifier { .. } => 2,
            Error::NotConverged { .. } => 3,
            Error::NonFinite { .. } | Error::Negative { .. } | Error::DtCollapse(_) => 4,
            Error::MassHypothesis { .. } | Error::CheckFailed(_) => 5,
            Error::Io(_) => 1,
        }
    }
}
