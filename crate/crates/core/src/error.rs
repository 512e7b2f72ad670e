use std::path::PathBuf;

/// Errors produced by the solver library and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coarse matrix is singular (pivot {pivot:e} at step {step})")]
    SingularCoarseMatrix { step: usize, pivot: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} sweeps")]
    EigNonConvergence { iterations: usize },

    #[error("singular pressure problem: {0}")]
    SingularProblem(String),

    #[error("harmonic Ritz extraction failed: {0}")]
    HarmonicRitzFailure(String),

    #[error("{}: {msg}", location(.path, *.line))]
    Format {
        path: Option<PathBuf>,
        line: Option<usize>,
        msg: String,
    },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("problem size {n} exceeds the limit of {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(path: &Option<PathBuf>, line: Option<usize>) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!("{}:{}", p.display(), l),
        (Some(p), None) => p.display().to_string(),
        (None, Some(l)) => format!("line {l}"),
        (None, None) => "format error".to_string(),
    }
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            line: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn format_at(path: &std::path::Path, line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: Some(path.to_path_buf()),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
