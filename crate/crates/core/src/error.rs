use thiserror::Error;

use crate::reweight::DescentTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample set")]
    EmptySampleSet,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate split: every sample lies on the same side of the threshold")]
    DegenerateSplit,

    #[error("degenerate dimension {0}: zero empirical variance")]
    DegenerateDimension(usize),

    #[error("rank-deficient features")]
    RankDeficientFeatures,

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("observable returned a non-finite value at sample {index}")]
    NonFiniteObservable { index: usize },

    #[error("zero mixture density{}", location(*.sample, *.cluster))]
    ZeroMixtureDensity {
        sample: Option<usize>,
        cluster: Option<usize>,
    },

    #[error("absolute continuity violated: target density vanishes at {point:?} where the model density is positive")]
    AbsoluteContinuity { point: Vec<f64> },

    #[error("quadrature not converged: relative change {delta:e} under grid refinement")]
    QuadratureNotConverged { delta: f64 },

    #[error("trajectory diverged for replica {replica} at step {step}")]
    TrajectoryDiverged { replica: usize, step: usize },

    #[error("descent failed at iteration {iteration}: {source}")]
    Descent {
        iteration: usize,
        partial: Box<DescentTrace>,
        #[source]
        source: Box<Error>,
    },
}

fn location(sample: Option<usize>, cluster: Option<usize>) -> String {
    match (sample, cluster) {
        (Some(s), Some(c)) => format!(" at sample {s} (cluster {c})"),
        (Some(s), None) => format!(" at sample {s}"),
        (None, Some(c)) => format!(" in cluster {c}"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
