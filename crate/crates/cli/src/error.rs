use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid input; exit code 2.
    #[error("{0}")]
    Input(String),
    /// The numerical work itself failed; exit code 3.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<addiso_core::Error> for CliError {
    fn from(e: addiso_core::Error) -> Self {
        use addiso_core::Error as E;
        match e {
            E::InvalidArgument(_) | E::Config(_) => CliError::Input(e.to_string()),
            E::Unsupported(_) | E::Evaluation(_) | E::Solver(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}
