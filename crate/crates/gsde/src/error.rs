use std::path::PathBuf;

/// Crate-wide error type.
///
/// Variants are grouped by how the command-line driver maps them to exit
/// codes: configuration and validation problems are usage errors, while
/// non-finite states, path explosions, and i/o failures are runtime errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid volatility band: {0}")]
    Band(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("grids are not nested: {0}")]
    GridMismatch(String),

    #[error("unknown builtin problem `{0}`")]
    UnknownBuiltin(String),

    #[error("non-finite state at step {step} (t = {t}): {detail}")]
    NonFinite { step: usize, t: f64, detail: String },

    #[error("{failed} of {total} simulated paths hit non-finite states")]
    Explosion { failed: u64, total: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad user input rather than a failure at
    /// runtime (solver blow-up, filesystem trouble).
    pub fn is_usage(&self) -> bool {
        !matches!(
            self,
            Error::NonFinite { .. } | Error::Explosion { .. } | Error::Io { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
