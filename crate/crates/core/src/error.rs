//! Shared error type for the engine.

use thiserror::Error;

/// Coarse classification used by batch drivers to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Caller passed something structurally wrong (bad config, bad argument).
    Validation,
    /// Input data is unreadable, malformed or inconsistent.
    Data,
    /// A numerical procedure failed (rank deficiency, boundary maximum, ...).
    Numerical,
}

impl ErrorClass {
    /// Process exit code convention: validation 2, data 3, numerical 4.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("geojson: {0}")]
    GeoJson(String),

    #[error("duplicate area id `{0}`")]
    DuplicateAreaId(String),

    #[error("ring in area `{0}` is not closed (first vertex must equal last)")]
    UnclosedRing(String),

    #[error("ring in area `{0}` has fewer than 4 vertices")]
    DegenerateRing(String),

    #[error("region has a zero-extent bounding box")]
    DegenerateRegion,

    #[error("invalid coordinate: lon {lon}, lat {lat}")]
    InvalidCoordinate { lon: f64, lat: f64 },

    #[error("empty station set")]
    EmptyStations,

    #[error("area `{0}` has no tessellation cells (hex edge too large for the area)")]
    AreaWithoutCells(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("weights matrix has no areas")]
    EmptyWeights,

    #[error("rho {rho} outside the admissible interval ({lo}, {hi})")]
    RhoOutOfRange { rho: f64, lo: f64, hi: f64 },

    #[error("spectrum unavailable for this weights matrix")]
    MissingSpectrum,

    #[error("design matrix is rank deficient; near-collinear columns: {0}")]
    RankDeficient(String),

    #[error("column `{0}` is constant; cannot standardize")]
    ConstantColumn(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("csv parse error at row {row}: {message}")]
    CsvRow { row: u64, message: String },

    #[error("csv: {0}")]
    Csv(String),

    #[error("missing covariate `{column}` for area `{area}`")]
    MissingCovariate { column: String, area: String },

    #[error("duplicate covariate column `{0}`")]
    DuplicateCovariate(String),

    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error("no rows survived cleaning")]
    NoSurvivingRows,

    #[error("likelihood maximizer at the admissible-interval boundary (rho = {0}); inspect the data")]
    BoundaryMaximizer(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Map the error to the class a driver should report.
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidCoordinate { .. }
            | EmptyStations
            | DimensionMismatch { .. }
            | EmptyWeights
            | InvalidInput(_)
            | UnknownCovariate(_)
            | DuplicateCovariate(_) => ErrorClass::Validation,
            GeoJson(_)
            | DuplicateAreaId(_)
            | UnclosedRing(_)
            | DegenerateRing(_)
            | DegenerateRegion
            | AreaWithoutCells(_)
            | CsvRow { .. }
            | Csv(_)
            | MissingCovariate { .. }
            | NoSurvivingRows
            | ConstantColumn(_)
            | Io(_) => ErrorClass::Data,
            RhoOutOfRange { .. }
            | MissingSpectrum
            | RankDeficient(_)
            | BoundaryMaximizer(_)
            | Numerical(_) => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
