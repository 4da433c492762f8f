use thiserror::Error;

/// Errors produced by the tracking and modeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("decode error in frame {frame}: {message}")]
    Decode { frame: usize, message: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("bounds error: {0}")]
    Bounds(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("match error: {0}")]
    Match(String),

    #[error("tracking lost at frame {frame}: no candidate scored below {score_thresh}")]
    TrackingLost { frame: usize, score_thresh: f64 },

    #[error("normalization error: channel {channel} has zero range")]
    Normalization { channel: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("ill-conditioned feature matrix; nearly dependent monomials: {}", monomials.join(", "))]
    Conditioning { monomials: Vec<String> },

    #[error("linear part is not diagonalizable: {0}")]
    NotDiagonalizable(String),

    #[error("optimizer did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("internal resonance: {0}")]
    InternalResonance(String),

    #[error("state diverged at t = {time}")]
    Divergence { time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable label for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Decode { .. } => "decode",
            Error::Shape(_) => "shape",
            Error::Bounds(_) => "bounds",
            Error::Input(_) => "input",
            Error::Match(_) => "match",
            Error::TrackingLost { .. } => "tracking_lost",
            Error::Normalization { .. } => "normalization",
            Error::Degenerate(_) => "degenerate",
            Error::Conditioning { .. } => "conditioning",
            Error::NotDiagonalizable(_) => "not_diagonalizable",
            Error::NonConvergence { .. } => "non_convergence",
            Error::InternalResonance(_) => "internal_resonance",
            Error::Divergence { .. } => "divergence",
            Error::Io(_) => "io",
        }
    }

    /// Frame index carried by the error, if any.
    pub fn frame(&self) -> Option<usize> {
        match self {
            Error::Decode { frame, .. } | Error::TrackingLost { frame, .. } => Some(*frame),
            _ => None,
        }
    }
}
