use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("dangling reference to {0:?} from {1}")]
    DanglingReference(String, String),
    #[error("schema violation in {field}: {reason}")]
    SchemaViolation { field: String, reason: String },
    #[error("series length {len} is not divisible by factor {factor}")]
    LengthMismatch { len: usize, factor: usize },
    #[error("missing reference capacity for tech {0:?}")]
    MissingCapacity(String),
    #[error("number of extreme months must be even, got {0}")]
    OddExtremeCount(usize),
    #[error("clustering is infeasible: {0}")]
    Infeasible(String),
    #[error("probabilities in period {period} sum to {sum}, expected 1")]
    ProbabilityMismatch { period: usize, sum: f64 },
    #[error("no variable touches the balance of carrier {carrier:?} in region {region:?}")]
    UnbalancedCarrier { carrier: String, region: String },
    #[error("empty assignment for representative year {year} in period {period}")]
    EmptyAssignment { year: usize, period: usize },
    #[error("solution status is {0:?}, not optimal")]
    StatusNotOptimal(boreas_lp::Status),
    #[error("missing storage delta for {storage}/{region} in period {period}")]
    MissingDelta {
        storage: String,
        region: String,
        period: usize,
    },
    #[error("solver failure: {0}")]
    Solver(#[from] boreas_lp::LpError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn schema(field: impl Into<String>, reason: impl Into<String>) -> CoreError {
        CoreError::SchemaViolation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> CoreError {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}
