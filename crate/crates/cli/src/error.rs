use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(vexcap_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
}

impl From<vexcap_core::Error> for CliError {
    fn from(e: vexcap_core::Error) -> Self {
        match e {
            vexcap_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}
