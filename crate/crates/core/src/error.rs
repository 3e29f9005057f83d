use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("integration diverged at step {step} (t = {time}); last finite state {last_state:?}")]
    Diverged {
        step: usize,
        time: f64,
        last_state: Vec<f64>,
    },

    #[error("ensemble path {path} (seed {seed}) failed: {source}")]
    Ensemble {
        path: usize,
        seed: u64,
        source: Box<Error>,
    },

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("CFL condition violated: dt = {requested} exceeds admissible dt = {admissible}")]
    Cfl { requested: f64, admissible: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
