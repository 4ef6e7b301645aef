use thiserror::Error;

/// Errors raised while deriving constants, building or evaluating a peak series.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible parameters: {reason} (best margin {best_margin:e})")]
    Infeasible { reason: String, best_margin: f64 },

    #[error("quadrature on [{a}, {b}] stopped at relative width {width:e}")]
    Tolerance { a: f64, b: f64, width: f64 },

    #[error("family audit failed: {0}")]
    FamilyAudit(String),

    #[error("point outside the domain closure: {0}")]
    Domain(String),

    #[error("refusing to build series: {0}")]
    RefuseToBuild(String),

    #[error("malformed series file: {0}")]
    SeriesFormat(String),

    #[error("peaking not certified at {point}: |F|.hi = {abs_hi}")]
    PeakVerification { point: String, abs_hi: f64 },
}

impl Error {
    /// True for failures of a numerical certificate, audit or search, as
    /// opposed to malformed input.
    pub fn is_certificate_failure(&self) -> bool {
        matches!(
            self,
            Error::Infeasible { .. }
                | Error::PeakVerification { .. }
                | Error::Tolerance { .. }
                | Error::FamilyAudit(_)
                | Error::RefuseToBuild(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
