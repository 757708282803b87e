//! Error classes and their exit codes.

use std::fmt;

use morphodist::Error;

#[derive(Debug)]
pub enum Failure {
    /// The input is well formed but the computation fails on it (exit 1).
    Domain(String),
    /// Bad arguments, configuration or files (exit 2).
    Usage(String),
}

impl Failure {
    pub fn usage(e: impl fmt::Display) -> Self {
        Failure::Usage(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Domain(m) | Failure::Usage(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Topology(_) | Error::Degenerate(_) | Error::Infeasible(_) | Error::Solver(_) | Error::Flipped(_) => {
                Failure::Domain(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}
