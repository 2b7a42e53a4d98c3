use std::fmt;

/// Pipeline failures, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad config or unreadable input: exit code 2.
    #[error("{0}")]
    Input(String),
    /// A stage ran and failed: exit code 1.
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Stage { .. } => 1,
        }
    }

    pub fn stage(stage: impl fmt::Display, err: impl fmt::Display) -> Self {
        CliError::Stage {
            stage: stage.to_string(),
            message: err.to_string(),
        }
    }
}

/// Classifies a core error raised while a stage was reading its inputs:
/// unreadable or malformed input files are input errors, anything else is
/// a stage failure.
pub fn from_core(stage: impl fmt::Display, err: tvpsv::Error) -> CliError {
    use tvpsv::Error as E;
    match err {
        E::Io { .. } | E::Schema { .. } | E::Row { .. } | E::Gap { .. } | E::Csv(_) | E::ParseQuarter { .. } => {
            CliError::Input(format!("stage {stage}: {err}"))
        }
        other => CliError::stage(stage, other),
    }
}
