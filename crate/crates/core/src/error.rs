use thiserror::Error;

/// Every failure the core pipeline can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("non-finite value produced by {0}")]
    NonFiniteResult(&'static str),
    #[error("loss must be a 1x1 tensor, got {0:?}")]
    NotScalar((usize, usize)),
    #[error("loss does not depend on any trainable tensor")]
    DetachedLoss,
    #[error("no gradient available for parameter {0}")]
    MissingGradient(usize),

    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("adjacency entry ({0}, {1}) is not 0 or 1")]
    NonBinaryAdjacency(usize, usize),

    #[error("anchor set is empty")]
    EmptyAnchorSet,
    #[error("need at least two graphs, got {0}")]
    TooFewGraphs(usize),
    #[error("empty input vector")]
    EmptyVector,
    #[error("discriminator labelled every graph anomalous")]
    NoNormalGraphs,
    #[error("anchor bank is empty")]
    EmptyBank,
    #[error("similarity region for {0} samples is empty")]
    DegeneratePools(&'static str),

    #[error("need at least two error vectors, got {0}")]
    TooFewVectors(usize),
    #[error("score head has not been fitted")]
    UnfittedHead,

    #[error("dataset contains a single class")]
    SingleClassDataset,
    #[error("injection pool holds {available} anomalies, {requested} requested")]
    PoolExhausted { available: usize, requested: usize },
    #[error("labels contain a single class")]
    SingleClassLabels,
}

impl Error {
    /// Numeric failures (as opposed to bad input data or configuration).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ShapeMismatch { .. }
                | Error::NonFiniteResult(_)
                | Error::NotScalar(_)
                | Error::DetachedLoss
                | Error::MissingGradient(_)
        )
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
