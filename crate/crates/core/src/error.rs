use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error(
        "second derivative undefined: layer {layer} uses ReLU; apply softplus surgery \
         (--surgery-beta) before requesting second-order quantities"
    )]
    SecondDerivativeUndefined { layer: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature budget exceeded: {requested} path points requested, cap is {cap}")]
    Budget { requested: usize, cap: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("exact enumeration over {d} players is intractable (limit 20); use sii_monte_carlo")]
    IntractableDimension { d: usize },

    #[error("background dataset is empty")]
    EmptyBackground,

    #[error("model is under-trained: {metric} = {value:.4}, required {requirement}")]
    UnderTrained {
        metric: &'static str,
        value: f64,
        requirement: String,
    },

    #[error("baseline mismatch between interaction matrix and attribution vector")]
    BaselineMismatch,

    #[error("unknown interaction pair ({0}, {1})")]
    UnknownPair(usize, usize),

    #[error("hessian triangles disagree by {0:e}")]
    AsymmetricHessian(f64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// 2 = bad input, 3 = contract violation, 4 = numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Shape { .. }
            | Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::UnknownPair(..)
            | Error::EmptyBackground => 2,
            Error::SecondDerivativeUndefined { .. }
            | Error::Budget { .. }
            | Error::IntractableDimension { .. }
            | Error::BaselineMismatch
            | Error::UnderTrained { .. } => 3,
            Error::Divergence { .. } | Error::AsymmetricHessian(_) => 4,
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
