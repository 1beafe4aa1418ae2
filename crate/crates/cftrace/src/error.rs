//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A network description or parameter set that cannot be built or run.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numeric argument outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Conditioning on an outcome whose probability is numerically zero.
    #[error("post-selection on an outcome with probability {prob:.3e} (below {floor:.0e})")]
    ImpossiblePostSelection { prob: f64, floor: f64 },

    /// The exact branch expansion is exponential in the number of channel
    /// paths; refuse rather than grind.
    #[error("exact oracle limited to {limit} channel paths, network has {paths}")]
    TooManyPaths { paths: usize, limit: usize },

    /// Operation asked of a network family that does not support it.
    #[error("operation not supported for network kind `{0}`")]
    UnsupportedKind(String),

    /// Command-line / config-file misuse.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code for the CLI: 2 for bad invocations/configs, 1 for runtime
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Domain(_)
            | Error::Usage(_)
            | Error::UnsupportedKind(_)
            | Error::TooManyPaths { .. } => 2,
            Error::ImpossiblePostSelection { .. } | Error::Io(_) => 1,
        }
    }
}
