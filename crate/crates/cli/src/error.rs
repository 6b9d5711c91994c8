use std::fmt;

use thiserror::Error;

/// Pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    Ingest,
    Features,
    Adf,
    Grid,
    Select,
    Report,
    Test,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Features,
        Stage::Adf,
        Stage::Grid,
        Stage::Select,
        Stage::Report,
        Stage::Test,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::Adf => "adf",
            Stage::Grid => "grid",
            Stage::Select => "select",
            Stage::Report => "report",
            Stage::Test => "test",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments; nothing was computed.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }

    pub(crate) fn stage(stage: Stage, err: impl fmt::Display) -> Self {
        CliError::Stage {
            stage,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
