use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or argument lies outside the domain where the quantity is defined.
    #[error("{name} = {value} violates {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("series argument t(1-s)^beta/A = {ratio} is outside the convergence region [0, 1)")]
    OutsideConvergence { ratio: f64 },

    #[error("case {case} requires {requirement}")]
    CaseMismatch { case: u8, requirement: &'static str },

    #[error("limit of case 3 is only defined for lambda > 0")]
    UndefinedLimit,

    #[error("{0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, constraint: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        constraint,
    }
}
