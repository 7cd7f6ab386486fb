use thiserror::Error;

use crate::graph::VertexId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex id {0}")]
    UnknownVertex(VertexId),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("vertex budget exceeded: construction needs {needed} vertices, budget is {budget}")]
    VertexBudget { needed: usize, budget: usize },

    #[error("construction infeasible: {0}")]
    Infeasible(String),

    #[error("empty interior: collar width {collar} leaves no vertex of a depth-{depth} truncation")]
    EmptyInterior { collar: u32, depth: u32 },

    #[error(
        "exact enumeration over {interior} interior vertices (max set size {max_size}) exceeds the \
         budget; use cheeger_family instead"
    )]
    EnumerationBudget { interior: usize, max_size: usize },

    #[error(
        "tree is not geodesically complete: vertex {vertex} lies on no root-to-depth ray; \
         apply complete_core first"
    )]
    NotComplete { vertex: VertexId },

    #[error("resolution exhausted: level {requested} is finer than the space; max usable level is {max_level}")]
    Resolution { requested: u32, max_level: u32 },

    #[error("ball at vertex {vertex} never splits before depth exhaustion (input is not pseudo-regular)")]
    NoSplit { vertex: VertexId },

    #[error("no bounded matching for radii {r_start}..={r_max}: {reason}")]
    NoBoundedMatching { r_start: u32, r_max: u32, reason: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
