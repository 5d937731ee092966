use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate design: Gram matrix is not positive definite after ridge")]
    DegenerateDesign,

    #[error("gradient blow-up at step {step}")]
    GradientBlowUp { step: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("loss node must hold a 1x1 value, found {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate sample: all points identical")]
    DegenerateSample,

    #[error("confounding mode is one-dimensional")]
    ConfoundingModeDim,

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("degenerate split: train has {train} rows, test has {test} rows")]
    DegenerateSplit { train: usize, test: usize },

    #[error("empty candidate list")]
    EmptyCandidates,

    #[error("outside observational support: a = {0}")]
    OutsideObservationalSupport(f64),

    #[error("missing data block: {0}")]
    MissingBlock(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numerics rather than by the caller's input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateDesign
                | Error::GradientBlowUp { .. }
                | Error::NonFiniteLoss { .. }
                | Error::DegenerateSample
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
