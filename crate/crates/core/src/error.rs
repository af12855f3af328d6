use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter value lies outside the model's domain.
    #[error("parameter {component} = {value} is outside the model domain")]
    Domain { component: String, value: f64 },

    /// Cholesky factorization hit a non-positive pivot.
    #[error("information matrix is not positive definite (pivot {pivot})")]
    SingularInformation { pivot: usize },

    /// The partial information of a component is not positive.
    #[error("partial information for component {component} is not positive ({value})")]
    NonPositiveVariance { component: usize, value: f64 },

    #[error("special function {name} undefined at {arg}")]
    SpecialDomain { name: &'static str, arg: f64 },

    #[error("quadrature failed for {integrand}: error estimate {error:e} after {subdivisions} subdivisions")]
    Quadrature {
        integrand: String,
        error: f64,
        subdivisions: usize,
    },

    #[error("no sign change on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("enumeration support of size {size} exceeds the limit {limit}")]
    SupportOverflow { size: f64, limit: f64 },

    #[error("empty conditional support")]
    EmptySupport,

    #[error("inner fit for nuisance parameters did not converge at {component} = {value}")]
    InnerConvergence { component: String, value: f64 },

    #[error("{0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Data { line: usize, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
