use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(acoi::Error),
    #[error("missing prerequisite: {0}")]
    Missing(String),
    #[error("{0}")]
    Censoring(acoi::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(acoi::Error),
}

impl CliError {
    /// Stable exit-code contract.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Missing(_) => 4,
            CliError::Censoring(_) => 5,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<acoi::Error> for CliError {
    fn from(e: acoi::Error) -> Self {
        use acoi::Error as E;
        match e {
            E::NonConvergence { .. } | E::ScheduleSolve { .. } | E::Singular(_) => CliError::Solver(e),
            E::Censoring { .. } => CliError::Censoring(e),
            E::Parameter(_) | E::InvalidModel(_) | E::Spec(_) | E::Json(_) => CliError::Config(e.to_string()),
            other => CliError::Other(other),
        }
    }
}
