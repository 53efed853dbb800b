// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Container(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Pipeline(String),
    /// Output directory holds artifacts of another configuration.
    #[error("{0}")]
    Conflict(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::MissingArtifact(_) => "missing_artifact",
            CliError::Config(_) => "config",
            CliError::Container(_) => "container",
            CliError::Input(_) => "input",
            CliError::Io(_) => "io",
            CliError::Pipeline(_) => "pipeline",
            CliError::Conflict(_) => "conflict",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingArtifact(_) => 2,
            CliError::Config(_) => 3,
            _ => 1,
        }
    }

    /// `error kind=<kind> msg=<message on one line>`.
    pub fn line(&self) -> String {
        format!("error kind={} msg={}", self.kind(), crate::config::one_line(&self.to_string()))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

macro_rules! pipeline_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Pipeline(e.to_string())
            }
        })*
    };
}

pipeline_from!(
    sand_core::augment::AugmentError,
    sand_core::encoder::EncoderError,
    sand_core::nas::NasError,
    sand_core::eval::EvalError,
    sand_core::sim::SimError
);
