use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite value in field `{field}` at cell ({i}, {j})")]
    NonFinite { field: &'static str, i: usize, j: usize },

    #[error("negative value {value:e} in field `{field}` at cell ({i}, {j})")]
    Negative {
        field: &'static str,
        i: usize,
        j: usize,
        value: f64,
    },

    #[error("time step collapsed: dt = {0:e}")]
    DtCollapse(f64),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("mass hypothesis violated: mass in ball of radius {radius} is {mass}, need at least {required}")]
    MassHypothesis { radius: f64, mass: f64, required: f64 },

    #[error("mollifier radius {delta} is below two cell widths ({min})")]
    UnresolvedMollifier { delta: f64, min: f64 },

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
