use serde::Serialize;
use thiserror::Error;

/// Pipeline stage that produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Track,
    Embed,
    Geometry,
    Dynamics,
    NormalForm,
    Predict,
    Backbone,
    Render,
    Output,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Track => "track",
            Stage::Embed => "embed",
            Stage::Geometry => "geometry",
            Stage::Dynamics => "dynamics",
            Stage::NormalForm => "normal_form",
            Stage::Predict => "predict",
            Stage::Backbone => "backbone",
            Stage::Render => "render",
            Stage::Output => "output",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{} stage failed: {source}", stage.name())]
    Stage {
        stage: Stage,
        #[source]
        source: vidssm_core::Error,
    },

    #[error("{} I/O error on {path}: {message}", stage.name())]
    File { stage: Stage, path: String, message: String },
}

/// Machine-readable error report printed on failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub stage: &'static str,
    pub kind: String,
    pub message: String,
    pub frame: Option<usize>,
}

impl CliError {
    pub fn file(stage: Stage, path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        CliError::File { stage, path: path.as_ref().display().to_string(), message: err.to_string() }
    }

    pub fn report(&self) -> ErrorReport {
        match self {
            CliError::Config(m) => ErrorReport { stage: Stage::Config.name(), kind: "config".into(), message: m.clone(), frame: None },
            CliError::Stage { stage, source } => ErrorReport {
                stage: stage.name(),
                kind: source.kind().into(),
                message: source.to_string(),
                frame: source.frame(),
            },
            CliError::File { stage, .. } => ErrorReport { stage: stage.name(), kind: "io".into(), message: self.to_string(), frame: None },
        }
    }
}
