use iadb::nn::{NnError, WeightsError};
use iadb::oracle::OracleError;
use iadb::samplers::{SamplerError, WarpError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Check(_) => 3,
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Oracle { .. } | SamplerError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::EstimationFailure { .. } | OracleError::NonFinite { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<WarpError> for CliError {
    fn from(e: WarpError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFiniteLoss { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<WeightsError> for CliError {
    fn from(e: WeightsError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<iadb::eval::EvalError> for CliError {
    fn from(e: iadb::eval::EvalError) -> Self {
        use iadb::eval::EvalError;
        match e {
            EvalError::Oracle(o) => o.into(),
            EvalError::Sampler(s) => s.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<iadb::pointio::PointIoError> for CliError {
    fn from(e: iadb::pointio::PointIoError) -> Self {
        CliError::Input(e.to_string())
    }
}
