use thiserror::Error;

/// Failures surfaced by the command-line tool, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("capacity error: {0}")]
    Capacity(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Capacity(_) => 4,
        }
    }
}

impl From<blockmom::Error> for CliError {
    fn from(err: blockmom::Error) -> Self {
        use blockmom::Error as E;
        match err {
            E::DesignTooLarge { .. } => CliError::Capacity(err.to_string()),
            E::EmptySequence | E::NonFinite { .. } => CliError::Data(err.to_string()),
            E::TooManyBlocks { .. }
            | E::PlanMismatch { .. }
            | E::InvalidDistribution(_)
            | E::InvalidArgument(_) => CliError::Config(err.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
