//! Exact desk-scale simulation of multiparty delegated quantum computing.
//!
//! Several clients, each holding one input qubit and able only to prepare
//! rotated single-qubit states, delegate a measurement-based computation on a
//! brickwork graph to a single server. The server fuses the clients'
//! contributions by remote state preparation, a trusted classical oracle
//! turns secret-shared pads into measurement angles, and the decrypted
//! outputs are returned to the clients.
//!
//! * [`quantum`]: statevectors, density matrices and an ownership-tracking register.
//! * [`mbqc`]: brickwork graphs, flow, corrected angles and a reference executor.
//! * [`rsp`]: remote state preparation circuits and their closed-form angles.
//! * [`oracle`]: additive secret sharing, the angle oracle and the client test.
//! * [`parties`]: client and server state machines and the full protocol run.
//! * [`harness`]: server views, blindness, simulators and distinguishers.

pub mod harness;
pub mod mbqc;
pub mod oracle;
pub mod parties;
pub mod quantum;
pub mod rsp;

pub use quantum::{Octant, Outcome};
