//! Security evaluation: exact and sampled server views, the worlds a
//! server or a client coalition cannot tell apart from a real run, and
//! statistics for comparing them.

mod coalition;
mod distinguisher;
pub mod stats;
mod view;
mod worlds;

pub use coalition::{
    assert_coalition_blind, coalition_view, run_real_coalition_world, run_simulated_client_world, Coalition,
    CoalitionRun, CoalitionView,
};
pub use distinguisher::{
    compare_marginals, distinguisher_game, exact_report, play_on_samples, DistinguisherReport, MarginalComparison,
    Method, Rule, CONFIDENCE, MAX_MARGINAL_VALUES, MIN_TRIALS,
};
pub use view::{
    blindness_check, exact_server_views, sampled_server_views, server_view, Averaging, BlindnessReport, Checkpoint,
    ExactBudget, Scenario, ServerView, ViewKey, ViewMethod,
};
pub use worlds::{
    measure_bits, run_intermediate_protocol, run_simulated_server_world, run_world, ClassicalLog, IntermediateVersion,
    World, WorldSample,
};

use thiserror::Error;

use crate::mbqc::MbqcError;
use crate::oracle::OracleError;
use crate::parties::PartyError;
use crate::quantum::QuantumError;
use crate::rsp::RspError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("size leak is permitted; scenarios must match")]
    SizeMismatch,
    #[error("exact enumeration refused: {0}")]
    BudgetExceeded(String),
    #[error("need at least {need} trials, got {got}")]
    TooFewTrials { got: usize, need: usize },
    #[error("invalid coalition: {0}")]
    InvalidCoalition(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Party(#[from] PartyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Mbqc(#[from] MbqcError),
    #[error(transparent)]
    Rsp(#[from] RspError),
}
