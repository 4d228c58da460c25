//! Brickwork measurement patterns, their flow, and a reference executor.

mod brickwork;
mod execute;
mod flow;
mod pattern;

pub use brickwork::{brick_rows, BrickworkGraph, Node};
pub use execute::{corrected_angle, dependency_signals, reference_execute};
pub use flow::{compute_flow, Flow};
pub use pattern::{AngleEntry, MeasurementPattern, PatternDocument};

use thiserror::Error;

use crate::quantum::QuantumError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MbqcError {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("no angle given for measured node {0}")]
    MissingAngle(Node),
    #[error("angle given for node {0}, which is not measured")]
    UnexpectedAngle(Node),
    #[error("node {0} has more than one angle")]
    DuplicateAngle(Node),
    #[error("input has {got} qubits but the pattern needs at least {expected}")]
    InputSize { expected: usize, got: usize },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}
