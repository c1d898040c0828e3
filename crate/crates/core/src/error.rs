use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CopulaError {
    #[error("parameter {theta} is outside the valid range for {family}")]
    InvalidParameter { family: &'static str, theta: f64 },
    #[error("Kendall's tau {tau} is not attainable by {family}")]
    InvalidTau { family: &'static str, tau: f64 },
    #[error("generator derivative of order {order} exceeds the supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("dataset is empty")]
    Empty,
    #[error("record {row}: {message}")]
    InvalidRecord { row: usize, message: String },
    #[error("records disagree on the number of intermediate events ({expected} vs {found} at record {row})")]
    RaggedEvents { row: usize, expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error("no comparable pairs for event {k}")]
    NoComparablePairs { k: usize },
    #[error("self-consistency iteration for event {k} did not converge in {iterations} iterations (last change {change:.3e})")]
    NoConvergence { k: usize, iterations: usize, change: f64 },
    #[error("pseudo-likelihood is not finite at every candidate association value")]
    NonFiniteLikelihood,
    #[error("{failed} of {total} bootstrap replicates failed")]
    BootstrapFailure { failed: usize, total: usize },
    #[error("{failed} of {total} cross-validation splits failed")]
    SplitFailure { failed: usize, total: usize },
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictionError {
    #[error(transparent)]
    Copula(#[from] CopulaError),
    #[error("event {k} is not part of the query history")]
    EventNotObserved { k: usize },
    #[error("event index {k} is out of range for a model with {num_events} events")]
    EventOutOfRange { k: usize, num_events: usize },
    #[error("landmark {landmark} is not below the follow-up horizon {horizon}")]
    LandmarkBeyondHorizon { landmark: f64, horizon: f64 },
    #[error("quantile level {level} is not identified (survival at horizon is {tail})")]
    NotIdentified { level: f64, tail: f64 },
    #[error("conditioning set has zero probability under the fitted model")]
    ZeroDenominator,
    #[error("model has no association copula for {m} observed events")]
    MissingAssociation { m: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
