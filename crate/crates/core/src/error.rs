use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("{field} is not positive at cell {cell} (value {value:e}, t = {t})")]
    Positivity {
        field: &'static str,
        cell: usize,
        value: f64,
        t: f64,
    },

    #[error("non-finite value in {field} at cell {cell} (t = {t})")]
    NumericalBlowup {
        field: &'static str,
        cell: usize,
        t: f64,
    },

    #[error("min n = {min:e} is below the degenerate-density floor {floor:e} (t = {t})")]
    DegenerateDensity { min: f64, floor: f64, t: f64 },

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("{momentum} is nonzero at cell {cell} where {density} vanishes")]
    VacuumMismatch {
        density: &'static str,
        momentum: &'static str,
        cell: usize,
    },

    #[error("{0} has zero total mass")]
    ZeroMass(&'static str),

    #[error("linear solve did not converge: residual {residual:e} after {iterations} iterations")]
    SolverFailure { residual: f64, iterations: usize },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
