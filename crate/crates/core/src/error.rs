use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {id} is out of range 1..={node_count}")]
    NodeOutOfRange { id: usize, node_count: usize },

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge {{{head}, {tail}}}")]
    DuplicateEdge { head: usize, tail: usize },

    #[error("edge {{{head}, {tail}}} has non-positive or non-finite weight {weight}")]
    InvalidWeight {
        head: usize,
        tail: usize,
        weight: f64,
    },

    #[error("graph must have at least one node")]
    EmptyGraph,

    #[error("node {0} is isolated (degree 0); the step size 1/d_i is undefined")]
    IsolatedNode(usize),

    #[error("{what}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("sampling set is empty")]
    EmptySamplingSet,

    #[error("node {0} is labelled more than once")]
    DuplicateLabel(usize),

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("dual vector is not feasible: divergence {residual:e} at unsampled node {node}")]
    NotDualFeasible { node: usize, residual: f64 },

    #[error("sampling set of the extended graph does not match the observations")]
    SamplingMismatch,

    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("graph is not a tree: {0}")]
    NotATree(String),

    #[error("cluster {0} is not connected")]
    DisconnectedCluster(usize),

    #[error("cluster {0} contains no sampled node")]
    UnsampledCluster(usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}
