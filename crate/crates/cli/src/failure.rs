use std::fmt::Display;

use serde::Serialize;
use thiserror::Error;

/// A failed command, classified by the exit status it maps to.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("output: {0}")]
    Output(String),
}

#[derive(Serialize)]
struct Report<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

impl Failure {
    pub fn config(e: impl Display) -> Self {
        Failure::Config(e.to_string())
    }

    pub fn data(e: impl Display) -> Self {
        Failure::Data(e.to_string())
    }

    pub fn solver(e: impl Display) -> Self {
        Failure::Solver(e.to_string())
    }

    pub fn output(e: impl Display) -> Self {
        Failure::Output(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Solver(_) => 4,
            Failure::Output(_) => 5,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Verify(_) => "verify",
            Failure::Config(_) => "config",
            Failure::Data(_) => "data",
            Failure::Solver(_) => "solver",
            Failure::Output(_) => "output",
        }
    }

    /// One line of JSON for standard error.
    pub fn to_json(&self) -> String {
        let message = match self {
            Failure::Verify(m)
            | Failure::Config(m)
            | Failure::Data(m)
            | Failure::Solver(m)
            | Failure::Output(m) => m.clone(),
        };
        serde_json::to_string(&Report {
            error: self.kind(),
            message,
            exit_code: self.exit_code(),
        })
        .expect("plain struct serialises")
    }
}
