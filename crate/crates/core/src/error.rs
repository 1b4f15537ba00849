use thiserror::Error;

use crate::model::Axis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CraneError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{axis:?} position {position} outside workspace [{min}, {max}]")]
    OutOfWorkspace {
        axis: Axis,
        position: f64,
        min: f64,
        max: f64,
    },

    #[error("singular configuration in {equation}: {detail}")]
    Singular {
        equation: &'static str,
        detail: String,
    },

    #[error("rope loses tension (z̈_p + g = {margin:.3e})")]
    FreeFall { margin: f64 },

    #[error("node {index}: {source}")]
    AtNode {
        index: usize,
        #[source]
        source: Box<CraneError>,
    },

    #[error("no collision-free path found after {iterations} iterations")]
    NoPathFound { iterations: usize },

    #[error("retry budget exhausted: {0}")]
    RetriesExhausted(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CraneError>,
    },

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("plan failed verification: {0}")]
    Verification(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CraneError {
    pub fn at_node(self, index: usize) -> Self {
        CraneError::AtNode {
            index,
            source: Box::new(self),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        CraneError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error after unwrapping node and stage context.
    pub fn root(&self) -> &CraneError {
        match self {
            CraneError::AtNode { source, .. } | CraneError::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for CraneError {
    fn from(e: std::io::Error) -> Self {
        CraneError::Io(e.to_string())
    }
}

pub type Result<T, E = CraneError> = std::result::Result<T, E>;
