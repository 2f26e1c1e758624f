use thiserror::Error;

/// Failure reported by a model component (sampler, likelihood, solver).
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{0}")]
pub struct ModelError(pub String);

impl ModelError {
    pub fn new(msg: impl Into<String>) -> Self {
        ModelError(msg.into())
    }
}

#[derive(Debug, Error)]
pub enum SmcError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite log-likelihood {value} for particle {index} at level {level}")]
    Likelihood { index: usize, level: usize, value: f64 },

    #[error("degenerate ensemble: every telescoped weight is zero")]
    DegenerateEnsemble,

    #[error("degenerate estimate: signed normalizer is exactly zero")]
    EstimateDegenerate,

    #[error("transition sampler failed for particle {index}: {source}")]
    Transition {
        index: usize,
        #[source]
        source: ModelError,
    },

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("level {level} out of range for a {levels}-level schedule")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("operation not valid in this phase: {0}")]
    Phase(&'static str),

    #[error("filter step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<SmcError>,
    },
}

impl SmcError {
    pub(crate) fn at_step(self, step: usize) -> SmcError {
        SmcError::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// Step index attached by the filter loop, if any.
    pub fn step(&self) -> Option<usize> {
        match self {
            SmcError::AtStep { step, .. } => Some(*step),
            _ => None,
        }
    }
}

pub type Result<T, E = SmcError> = std::result::Result<T, E>;
