//! Exact statevector and density-matrix simulation for small registers.

mod angle;
mod density;
mod gate;
mod register;
mod state;

pub use angle::{parity, Octant, Outcome};
pub use density::{trace_distance, trace_norm, DensityMatrix, DENSITY_TOLERANCE};
pub use gate::{Basis, Gate, Pauli};
pub use register::{QubitId, Register};
pub use state::{PureState, MAX_QUBITS, NORM_TOLERANCE, STATE_EQ_TOLERANCE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("gate addresses qubit {0} twice")]
    SameQubit(usize),
    #[error("qubit {0} listed twice")]
    DuplicateQubit(QubitId),
    #[error("register of {0} qubits exceeds the simulator limit")]
    TooManyQubits(usize),
    #[error("amplitude vector of length {0} is not a power of two")]
    BadAmplitudeCount(usize),
    #[error("state norm {0} is not 1")]
    NotNormalized(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("keep set must not be empty")]
    EmptyKeep,
    #[error("mixture has no components")]
    EmptyMixture,
    #[error("matrix is not Hermitian (deviation {0})")]
    NotHermitian(f64),
    #[error("trace {0} is not 1")]
    BadTrace(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0})")]
    NotPositive(f64),
    #[error("measurement branch has zero probability")]
    ImpossibleOutcome,
    #[error("unknown qubit {0}")]
    UnknownQubit(QubitId),
    #[error("{actor} cannot act on {qubit}, which belongs to {owner}")]
    NotOwner {
        qubit: QubitId,
        owner: String,
        actor: String,
    },
    #[error("{0} is entangled with qubits outside the requested set")]
    Entangled(QubitId),
}
