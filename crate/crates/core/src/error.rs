use alloc::string::String;

use crate::hierarchy::NodeId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate distribution: {0}")]
    Degenerate(&'static str),

    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("node {0} does not exist")]
    DanglingNode(NodeId),

    #[error("node {child} is not a child of node {parent}")]
    NotAChild { parent: NodeId, child: NodeId },

    #[error("path has length {got}, expected {expected}")]
    PathLength { expected: usize, got: usize },

    #[error("count underflow at node {node}")]
    CountUnderflow { node: NodeId },

    #[error("component index {index} out of range (K = {count})")]
    ComponentOutOfRange { index: usize, count: usize },

    #[error("observation {0} has no component assignment")]
    Unassigned(usize),

    #[error("empty path")]
    EmptyPath,

    #[error("label vectors differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("level {level} outside 1..={max_level}")]
    LevelOutOfRange { level: usize, max_level: usize },

    #[error("dataset is empty")]
    EmptyData,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),
}
