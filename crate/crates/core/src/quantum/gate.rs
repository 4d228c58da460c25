use serde::{Deserialize, Serialize};

use super::Octant;

/// The gate set used by the protocol, generic over how qubits are addressed
/// (register positions or stable qubit handles).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate<Q = usize> {
    X(Q),
    /// Pauli Z, i.e. `ZRot(q, π)`.
    Z(Q),
    /// `diag(1, e^{iθ})`.
    ZRot(Q, Octant),
    H(Q),
    Cnot {
        control: Q,
        target: Q,
    },
    Cz(Q, Q),
}

impl<Q: Copy> Gate<Q> {
    pub fn qubits(&self) -> Vec<Q> {
        match *self {
            Gate::X(q) | Gate::Z(q) | Gate::ZRot(q, _) | Gate::H(q) => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::Cz(a, b) => vec![a, b],
        }
    }

    pub fn map<R, E>(self, mut f: impl FnMut(Q) -> Result<R, E>) -> Result<Gate<R>, E> {
        Ok(match self {
            Gate::X(q) => Gate::X(f(q)?),
            Gate::Z(q) => Gate::Z(f(q)?),
            Gate::ZRot(q, t) => Gate::ZRot(f(q)?, t),
            Gate::H(q) => Gate::H(f(q)?),
            Gate::Cnot { control, target } => Gate::Cnot {
                control: f(control)?,
                target: f(target)?,
            },
            Gate::Cz(a, b) => Gate::Cz(f(a)?, f(b)?),
        })
    }
}

/// Single-qubit Pauli byproducts and deviations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Z,
}

impl Pauli {
    pub fn on<Q>(self, q: Q) -> Gate<Q> {
        match self {
            Pauli::X => Gate::X(q),
            Pauli::Z => Gate::Z(q),
        }
    }
}

/// Measurement basis for a single qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// `{|0⟩, |1⟩}`.
    Computational,
    /// `{|+_δ⟩, |−_δ⟩}`; outcome 0 is `|+_δ⟩`.
    Rotated(Octant),
}
