//! Error taxonomy shared by the library and the CLI.
//!
//! Exit-code contract: configuration problems (including unreadable or
//! malformed config files) exit 2, physics precondition violations exit 3,
//! solver non-convergence exits 4, plain I/O failures exit 1.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters, malformed config, bad CLI usage.
    #[error("config error: {0}")]
    Config(String),
    /// Input violates a physics precondition (resonant drive, unconverged
    /// crystal, unstable equilibrium, degenerate geometry).
    #[error("precondition error: {0}")]
    Precondition(String),
    /// Iterative solver failed to reach tolerance.
    #[error("convergence error: {0}")]
    Convergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Serde(_) => 2,
            Error::Precondition(_) => 3,
            Error::Convergence(_) => 4,
            Error::Io(_) => 1,
        }
    }

    /// Stable machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Precondition(_) => "precondition",
            Error::Convergence(_) => "convergence",
            Error::Io(_) => "io",
            Error::Serde(_) => "serialization",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_contract() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::Precondition("x".into()).exit_code(), 3);
        assert_eq!(Error::Convergence("x".into()).exit_code(), 4);
        let io = Error::Io(std::io::Error::other("x"));
        assert_eq!(io.exit_code(), 1);
        let parse = serde_json::from_str::<serde_json::Value>("{").unwrap_err();
        assert_eq!(Error::Serde(parse).exit_code(), 2);
    }
}
