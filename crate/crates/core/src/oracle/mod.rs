//! The trusted classical oracle: additive secret sharing, the measurement
//! angle and output key functionality, and the client honesty test.

mod delta;
mod ledger;
mod sharing;
mod verify;

pub use delta::{
    compose_delta, oracle_delta, oracle_output_keys, output_keys, phi_prime, solve_share, theta_term, DeltaBreakdown,
};
pub use ledger::OracleLedger;
pub use sharing::{reconstruct, share_secret, SecretShare, SecretTag, SecretValue};
pub use verify::{verify_client, TestedCopy, Verification, DEFAULT_COPIES};

use thiserror::Error;

use crate::mbqc::Node;
use crate::quantum::QuantumError;
use crate::rsp::RspError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("secret sharing needs at least 2 parties, got {0}")]
    TooFewParties(usize),
    #[error("the client test needs at least 2 copies, got {0}")]
    TooFewCopies(usize),
    #[error("no client {0}")]
    UnknownClient(usize),
    #[error("share for {0} has the wrong domain")]
    DomainMismatch(SecretTag),
    #[error("client {owner} already registered a share of {tag}")]
    DuplicateShare { tag: SecretTag, owner: usize },
    #[error("{tag} has {have} of {need} shares; a client has not committed")]
    MissingShares { tag: SecretTag, have: usize, need: usize },
    #[error("no surviving copy recorded for node {node}, client {contributor}")]
    MissingSurvivor { node: Node, contributor: usize },
    #[error("no preparation outcomes recorded for node {0}")]
    MissingOutcomeVector(Node),
    #[error("result of node {0} has not been announced")]
    MissingOutcome(Node),
    #[error("expected the result of node {expected}, got node {got}")]
    OutOfOrder { expected: Node, got: Node },
    #[error("node {0} is not measured")]
    NotMeasured(Node),
    #[error("node {0} is not an output")]
    NotOutput(Node),
    #[error(transparent)]
    Rsp(#[from] RspError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}
