use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {what} = {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("kernel {0} is not absolutely integrable on [0, inf)")]
    NonIntegrableKernel(&'static str),

    #[error("quadrature did not reach tolerance {tolerance:e}: estimate {estimate}, error bound {bound:e}")]
    Convergence {
        estimate: f64,
        bound: f64,
        tolerance: f64,
    },

    #[error("target correlation {target} is outside the attainable range [{min}, {max}]")]
    InfeasibleCalibration { target: f64, min: f64, max: f64 },

    #[error(
        "calibration table is not monotone at f = {f}; statistical noise exceeds grid spacing, increase steps per point"
    )]
    CalibrationResolution { f: f64 },

    #[error("chain with |f| = 1 has no stationary distribution in raw mode")]
    NonStationary,

    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed data: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input or of I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. }
                | Error::InfeasibleCalibration { .. }
                | Error::CalibrationResolution { .. }
                | Error::NonStationary
                | Error::NonIntegrableKernel(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}
