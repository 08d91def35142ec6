use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: {axis} mismatch (expected {expected}, found {found})")]
    Shape {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{op}: {message}")]
    Invalid { op: &'static str, message: String },

    #[error(
        "input {height}x{width} is not divisible by {multiple}; pad the image to the next multiple first"
    )]
    Divisibility {
        height: usize,
        width: usize,
        multiple: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("target class id {id} out of range for {classes} logit channels")]
    TargetOutOfRange { id: u8, classes: usize },

    #[error("non-finite training loss at step {step}")]
    Diverged { step: u64 },

    #[error("{0}")]
    Source(String),

    #[error("backward called without a cached forward pass")]
    NoForwardCache,

    #[error("invalid model configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Weights(#[from] crate::weights::WeightsError),
}

impl Error {
    pub(crate) fn shape(
        op: &'static str,
        axis: &'static str,
        expected: usize,
        found: usize,
    ) -> Self {
        Error::Shape {
            op,
            axis,
            expected,
            found,
        }
    }

    pub(crate) fn invalid(op: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            op,
            message: message.into(),
        }
    }
}

/// Joins names for error messages.
pub(crate) fn join(names: &[String]) -> String {
    let mut out = String::new();
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(n);
    }
    out
}
