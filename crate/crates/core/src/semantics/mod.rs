//! Operational semantics: programs become quantum Markov chains.
//!
//! States pair the remaining instructions with an assignment of the program's
//! bits and booleans. `reset_at q` measures `q` and, on outcome 1, passes
//! through an extra `X_at q` state. States are numbered breadth-first from
//! `(body, O)`, measurement outcome 0 (and the `then` branch) before 1.

mod build;
mod chain;
mod check;

use thiserror::Error;

use crate::linalg::LinalgError;

pub use build::{
    build_body_chain, build_body_chain_with, build_program_chain, build_program_chain_with, residual_bound,
    step, ChainOptions, StepEdge, DEFAULT_STATE_CAP,
};
pub use chain::{ChainState, Edge, EdgeKind, Env, Op, OpLabel, Qmc};
pub use check::{check_qmc, StateVerdict, TpReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("chain exceeds {cap} states")]
    StateExplosion { cap: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("internal error: {0}")]
    Internal(String),
}
