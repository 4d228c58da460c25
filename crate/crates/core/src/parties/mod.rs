//! Clients, the server and the orchestrated multiparty protocol.
//!
//! All parties share one [`Network`], which owns the quantum register and
//! logs every message into a [`Transcript`]. Qubits move between parties
//! only through logged transfers, and the server can only be handed the
//! message kinds in [`ServerInbound`], none of which carries a client
//! secret.

mod client;
mod message;
mod network;
mod protocol;
mod server;

pub use client::{ClientScript, ClientSecrets, ClientState};
pub use message::{AbortReason, AbortRecord, Body, Message, QubitLabel, ServerInbound, Transcript};
pub use network::Network;
pub use protocol::{run_full_protocol, run_protocol_with_rng, Protocol, ProtocolConfig, ProtocolRun};
pub use server::{ServerState, ServerStrategy};

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::mbqc::{MbqcError, Node};
use crate::oracle::OracleError;
use crate::quantum::QuantumError;
use crate::rsp::RspError;

/// Every entity that can own qubits or send messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    /// Client `C_k`, 1-based.
    Client(usize),
    Server,
    /// The trusted classical functionality.
    Oracle,
    /// Holder of reference qubits that never enter the protocol.
    Environment,
    Simulator,
    /// The ideal functionality.
    Resource,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Client(k) => write!(f, "C{k}"),
            Party::Server => f.write_str("server"),
            Party::Oracle => f.write_str("oracle"),
            Party::Environment => f.write_str("environment"),
            Party::Simulator => f.write_str("simulator"),
            Party::Resource => f.write_str("resource"),
        }
    }
}

impl Serialize for Party {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Lifecycle of a party within one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Preparation,
    Computation,
    Output,
    Done,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Error)]
pub enum PartyError {
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
    #[error("{party} is in phase {actual}, expected {expected}")]
    WrongPhase {
        party: Party,
        expected: Phase,
        actual: Phase,
    },
    #[error("server holds no {what} for node {node}")]
    MissingQubit { node: Node, what: &'static str },
    #[error("no measurement angle received for node {0}")]
    MissingDelta(Node),
    #[error("qubit label {0:?} does not fit the graph")]
    BadLabel(QubitLabel),
    #[error("protocol aborted: {}", .0.record)]
    Aborted(Box<AbortedRun>),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Rsp(#[from] RspError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Mbqc(#[from] MbqcError),
}

/// What is left of a run that stopped on an abort.
#[derive(Clone, Debug)]
pub struct AbortedRun {
    pub record: AbortRecord,
    pub transcript: Transcript,
}
