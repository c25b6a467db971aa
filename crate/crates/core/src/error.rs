use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("config validation failed: {0}")]
    Validation(String),

    #[error("morphing angle {angle_deg:.4} deg outside [{lower_deg}, {upper_deg}] deg")]
    MorphBound {
        angle_deg: f64,
        lower_deg: f64,
        upper_deg: f64,
    },

    #[error("singular influence matrix; weakest pivots at panels {panels:?}")]
    SingularInfluence { panels: Vec<usize> },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("non-finite {what} at t = {t}")]
    NonFinite { t: f64, what: String },

    #[error("attitude guard violated at t = {t}: theta = {theta_deg:.2} deg")]
    Attitude { t: f64, theta_deg: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside schedule horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("missing channel: {0}")]
    MissingChannel(String),

    #[error("trim-cost window is empty")]
    EmptyWindow,

    #[error("flexibility surrogate is disabled for this config")]
    FlexibilityDisabled,

    #[error("unknown scenario kind `{0}`")]
    UnknownScenario(String),

    #[error("missing scenario parameter `{0}`")]
    MissingParameter(String),

    #[error("quadratic program: {0}")]
    Qp(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialize(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
