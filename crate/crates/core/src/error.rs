use std::path::PathBuf;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate parameters: |{what}| = {magnitude:e} is below the admissible tolerance")]
    Degenerate { what: &'static str, magnitude: f64 },

    #[error("sampling point ({x}, {y}) lies outside the unit disk")]
    OutsideDomain { x: f64, y: f64 },

    #[error("no singular value passes the cut-off (alpha = {alpha:e}, largest singular value = {largest:e})")]
    EmptySpectrum { alpha: f64, largest: f64 },

    #[error("singular value decomposition did not converge for a {size}x{size} matrix")]
    SvdFailed { size: usize },

    #[error("indicator field has no sampled points")]
    EmptyField,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Degenerate { .. } | Error::EmptySpectrum { .. } | Error::SvdFailed { .. } => true,
            Error::Context { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Process exit status: 1 for rejected inputs, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            2
        } else {
            1
        }
    }
}
