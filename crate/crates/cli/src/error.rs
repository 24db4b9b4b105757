use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] spatial_rumor::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A check the run exists to perform did not pass.
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    /// 2 config, 3 invariant violation, 4 capacity, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        use spatial_rumor::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidLattice(_)
                | E::InvalidSite { .. }
                | E::InvalidParams(_)
                | E::ImpossibleTransition { .. }
                | E::StepSize { .. }
                | E::Parse(_) => 2,
                E::EngineInvariant(_) | E::DominanceViolation { .. } => 3,
                E::Capacity(_) => 4,
            },
            CliError::CheckFailed(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}
