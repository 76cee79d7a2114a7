use thiserror::Error;

pub type Result<T> = std::result::Result<T, KgdError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KgdError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not symmetric (max asymmetry {max_asym:e})")]
    NotSymmetric { max_asym: f64 },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("filter divergence at step {step}: innovation covariance not PD (pivot {pivot} = {value:e})")]
    FilterDivergence {
        step: usize,
        pivot: usize,
        value: f64,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("non-finite objective at coordinate {coord}")]
    NonFiniteObjective { coord: usize },

    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: Box<KgdError>,
    },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for KgdError {
    fn from(e: std::io::Error) -> Self {
        KgdError::Io(e.to_string())
    }
}

impl From<csv::Error> for KgdError {
    fn from(e: csv::Error) -> Self {
        KgdError::Io(e.to_string())
    }
}
