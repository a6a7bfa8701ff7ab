use thiserror::Error;

/// Errors produced by beamkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid direction: {0}")]
    Direction(String),

    #[error("invalid frequency grid: {0}")]
    FrequencyGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("source at {distance_m} m lies inside the sphere of radius {radius_m} m")]
    SourceInsideSphere { distance_m: f64, radius_m: f64 },

    #[error("sphere series did not converge within {max_order} orders (last term ratio {ratio:e})")]
    NonConvergence { max_order: usize, ratio: f64 },

    #[error("HRTF schema violation: {0}")]
    HrtfSchema(String),

    #[error("no stored HRTF direction within {tolerance_deg} deg of az {azimuth_deg}, polar {polar_deg}")]
    HrtfLookup {
        azimuth_deg: f64,
        polar_deg: f64,
        tolerance_deg: f64,
    },

    #[error("WNG bound {gamma_db:.3} dB is infeasible; maximum achievable WNG is {max_wng_db:.3} dB")]
    InfeasibleWng { gamma_db: f64, max_wng_db: f64 },

    #[error("design failed at frequency index {index} ({freq_hz} Hz): {source}")]
    DesignAtFrequency {
        index: usize,
        freq_hz: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("singular problem: {0}")]
    Singular(String),

    #[error("channel mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("invalid signal: {0}")]
    Signal(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Walks through per-frequency wrappers to the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::DesignAtFrequency { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by user input rather than internal failures.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self.root(),
            Error::NonConvergence { .. } | Error::Singular(_) | Error::Internal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_file(path: &std::path::Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
