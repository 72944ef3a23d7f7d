use thiserror::Error;

use crate::grid::Vertex;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: malformed header: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: row length mismatch (expected {expected}, found {found})")]
    RowLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown cell character {ch:?}")]
    UnknownCell { line: usize, ch: char },
    #[error("line {line}: row count mismatch (expected {expected}, found {found})")]
    RowCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no path from {start:?} to {goal:?}")]
    NoPath { start: Vertex, goal: Vertex },
    #[error("agent {agent}: no path from {start:?} to {goal:?}")]
    Unreachable {
        agent: usize,
        start: Vertex,
        goal: Vertex,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("map generation failed: {0}")]
    Generation(String),
    #[error("flow underflow on edge {from:?} -> {to:?}")]
    FlowUnderflow { from: Vertex, to: Vertex },
    #[error("conflicting moves at timestep {t}: {detail}")]
    ConflictingMoves { t: usize, detail: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
