use thiserror::Error;

/// Errors raised across the estimation pipeline.
///
/// Variants split into two families: input/validation problems (the data or
/// the request cannot be used as given) and estimation failures (the data is
/// well-formed but the estimator cannot produce a value). See
/// [`Error::is_validation`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column: {0}")]
    MissingColumn(String),
    #[error("non-binary indicator in column {column} at row {row}: {value}")]
    NonBinary {
        column: String,
        row: usize,
        value: String,
    },
    #[error("non-numeric value in column {column} at row {row}: {value}")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },
    #[error("missing value in column {column} at row {row}")]
    MissingValue { column: String, row: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("instrument column required")]
    InstrumentRequired,
    #[error("treatment column required")]
    TreatmentRequired,
    #[error("group and period columns required")]
    DidColumnsRequired,
    #[error("empty group: {0}")]
    EmptyGroup(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no uncensored observations in {0}")]
    NoUncensored(String),
    #[error("quantile beyond identified region: tau={tau} exceeds attainable mass {mass}")]
    BeyondIdentifiedRegion { tau: f64, mass: f64 },
    #[error("outcome level y={y} lies beyond the identified support bound {bound}")]
    BeyondSupport { y: f64, bound: f64 },
    #[error("defective distribution in {group}: total mass {mass}; pass allow_defective to target the truncated estimand")]
    DefectiveMass { group: String, mass: f64 },
    #[error("integrand is not finite at ordered position {0}")]
    NonFiniteIntegrand(usize),
    #[error("separation detected")]
    Separation,
    #[error("singular weighted design")]
    SingularDesign,
    #[error("bandwidth too small at point {0}")]
    BandwidthTooSmall(usize),
    #[error("weak first stage: |kappa_{arm}| = {kappa:.4} below {threshold}")]
    WeakFirstStage {
        arm: u8,
        kappa: f64,
        threshold: f64,
    },
    #[error("bootstrap unstable: {failed} of {total} replicates failed")]
    BootstrapUnstable { failed: usize, total: usize },
}

impl Error {
    /// True for errors caused by malformed input or an unusable request,
    /// as opposed to failures inside an estimator.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Csv(_)
                | Error::MissingColumn(_)
                | Error::NonBinary { .. }
                | Error::NonNumeric { .. }
                | Error::MissingValue { .. }
                | Error::EmptySample
                | Error::DimensionMismatch { .. }
                | Error::InstrumentRequired
                | Error::TreatmentRequired
                | Error::DidColumnsRequired
                | Error::EmptyGroup(_)
                | Error::InvalidArgument(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
