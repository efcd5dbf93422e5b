use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("parameter set violated: {0}")]
    ParameterSet(String),

    #[error("wrong regime: {0}")]
    Regime(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("non-positive statistic: {0}")]
    NonPositiveStatistic(String),

    #[error("degenerate denominator in the extrapolation ({0:e})")]
    DegenerateDenominator(f64),

    #[error("filter condition fails at H = {h}: ratio gap {gap:e}")]
    FilterCondition { h: f64, gap: f64 },

    #[error("quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("series representations disagree: {0}")]
    Truncation(String),

    #[error("circulant embedding failed for n = {n} and Cholesky fallback is not allowed")]
    Embedding { n: usize },

    #[error("lag count {r} is too large for {n} increments")]
    LagTooLarge { r: usize, n: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps `self` with the name of the step that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error below any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
