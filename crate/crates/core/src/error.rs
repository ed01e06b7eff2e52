use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration at line {line}, key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("step size underflow at r = {r:.6e} (state {state:?})")]
    StepSizeUnderflow { r: f64, state: Vec<f64> },

    #[error("invariant breach: {0}")]
    InvariantBreach(String),

    #[error("eigenvalue bracket overflow for k = {k}: lambda reached {lambda:.3e} with angle {theta:.6} < {target:.6}")]
    BracketOverflow {
        k: usize,
        lambda: f64,
        theta: f64,
        target: f64,
    },

    #[error("C1 regime is indeterminate: limit probes gave {probes:?}")]
    Indeterminate { probes: Vec<f64> },

    #[error("empty selection: no points to emit")]
    EmptySelection,

    #[error("malformed data: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Config { .. } | Error::Indeterminate { .. })
    }
}
