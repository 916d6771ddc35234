use thiserror::Error;

/// Errors raised by the kernels, builders and metric evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimated error {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("quadratic form {value:e} is below the numerical floor -{floor:e}")]
    NegativeQuadraticForm { value: f64, floor: f64 },

    #[error("exhaustive search over {n} atoms refused (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_pair(self, i: usize, j: usize) -> Self {
        Error::Pair { i, j, source: Box::new(self) }
    }

    /// True for numerical failures (quadrature, hard PSD violations), as opposed
    /// to invalid inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Quadrature { .. } | Error::NegativeQuadraticForm { .. } => true,
            Error::Pair { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
