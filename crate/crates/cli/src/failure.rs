use std::fmt;
use std::process::ExitCode;

use hopf_core::Error;

/// Why a command did not succeed, mapped onto the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    /// A check ran and did not pass (exit 1).
    Verification(String),
    /// Bad flags, config file, parameters or preconditions (exit 2).
    Config(String),
    /// Integration or a numerical method failed (exit 3).
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParams(_)
            | Error::InvalidState(_)
            | Error::InvalidArgument(_)
            | Error::RegimeMismatch { .. }
            | Error::TrivialAttractor
            | Error::NotApplicable(_)
            | Error::Domain(_) => Failure::Config(msg),
            Error::Verification(_) => Failure::Verification(msg),
            _ => Failure::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o: {e}"))
    }
}

impl From<Failure> for ExitCode {
    fn from(f: Failure) -> Self {
        ExitCode::from(f.exit_code())
    }
}
