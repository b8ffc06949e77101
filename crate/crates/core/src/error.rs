// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("line {line}: {kind} id {id} out of range (count {count})")]
    DanglingReference {
        line: usize,
        kind: &'static str,
        id: usize,
        count: usize,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),

    #[error("pin {pin} of net {net} lies outside the layout region at ({x}, {y})")]
    PinOutsideRegion { pin: usize, net: usize, x: f64, y: f64 },

    #[error("cell {cell} center ({x}, {y}) lies outside the layout region")]
    CellOutsideRegion { cell: usize, x: f64, y: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch in {what}: expected {expected}, got {actual}")]
    Shape {
        what: String,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in layer {layer}, tensor {tensor}")]
    NonFinite { layer: String, tensor: String },

    #[error("stale activations: forward ran against model generation {forward}, model is at {current}")]
    StaleActivations { forward: u64, current: u64 },

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint corrupted: {0}")]
    CheckpointCorrupt(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("optimizer diverged at iteration {iter}")]
    Diverged { iter: usize },

    #[error("a trained model is required when the congestion weight is positive")]
    MissingModel,
}
