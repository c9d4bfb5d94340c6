use std::fmt;
use std::process::ExitCode;

use mbqr_core::countdist::CountDistError;
use mbqr_core::experiment::ExperimentError;
use mbqr_core::jitterqr::JitterError;
use mbqr_core::mbqr::MbqrError;

/// Failure categories, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values (exit 2).
    Usage(String),
    /// Malformed or inconsistent input data (exit 3).
    Data(String),
    /// Numerical non-convergence (exit 4).
    NonConvergence(String),
    /// A verification suite reported failures (exit 1).
    VerifyFailed(usize),
    /// Anything else, e.g. failing to write output (exit 1).
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::NonConvergence(_) => 4,
            Self::VerifyFailed(_) | Self::Other(_) => 1,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::NonConvergence(m) => write!(f, "did not converge: {m}"),
            Self::VerifyFailed(n) => write!(f, "{n} verification check(s) failed"),
            Self::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<MbqrError> for CliError {
    fn from(e: MbqrError) -> Self {
        match e {
            MbqrError::InvalidSpec(_) => Self::Usage(e.to_string()),
            MbqrError::InvalidData(_) | MbqrError::RankDeficient { .. } => {
                Self::Data(e.to_string())
            }
            MbqrError::InvalidStart(_) | MbqrError::NotConverged(_) => {
                Self::NonConvergence(e.to_string())
            }
            MbqrError::Dist(d) => d.into(),
        }
    }
}

impl From<CountDistError> for CliError {
    fn from(e: CountDistError) -> Self {
        match e {
            CountDistError::Special(mbqr_core::specfun::SpecialError::NoConvergence { .. }) => {
                Self::NonConvergence(e.to_string())
            }
            _ => Self::Usage(e.to_string()),
        }
    }
}

impl From<JitterError> for CliError {
    fn from(e: JitterError) -> Self {
        match e {
            JitterError::NoConvergence { .. } => Self::NonConvergence(e.to_string()),
            JitterError::InvalidSettings(_) => Self::Usage(e.to_string()),
            JitterError::InvalidInput(_) => Self::Data(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidConfig(m) => Self::Usage(m),
            ExperimentError::Model(m) => m.into(),
            ExperimentError::Jitter(j) => j.into(),
            ExperimentError::Dist(d) => d.into(),
        }
    }
}
