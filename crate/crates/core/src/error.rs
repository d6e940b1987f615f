use thiserror::Error;

/// Errors raised anywhere in the link / photonic-node pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("synchronization failed: correlation peak is {ratio:.2}x the RMS sidelobe (need >= 3)")]
    SyncFailure { ratio: f64 },

    #[error("laser integration unstable at t = {time_s:e} s (|E|^2 = {intensity:e}, limit {limit:e}); delta_f = {delta_f_ghz} GHz, feedback ratio = {feedback_ratio}")]
    Instability {
        time_s: f64,
        intensity: f64,
        limit: f64,
        delta_f_ghz: f64,
        feedback_ratio: f64,
    },

    #[error("normal equations are singular at working precision")]
    RankDeficient,

    #[error("equalizer training matrix is singular")]
    SingularTraining,

    #[error("degenerate node response: {0}")]
    DegenerateResponse(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
