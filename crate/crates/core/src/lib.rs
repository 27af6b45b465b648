//! Compiler and model checker for Quip-E tail-recursive quantum programs.
//!
//! A program is parsed and validated by [`frontend`], turned into a
//! superoperator-weighted quantum Markov chain by [`semantics`], queried with
//! QCTL through [`qctl`], and serialized by [`emit`]. [`refsim`] is an
//! independent state-vector simulator used to cross-check the chain.

pub mod cli;
pub mod emit;
pub mod frontend;
pub mod linalg;
pub mod par;
pub mod qctl;
pub mod refsim;
pub mod semantics;

pub use frontend::{parse_program, validate, CheckedProgram, Program};
pub use linalg::{CMatrix, DensityMatrix, Superoperator};
pub use par::Exec;
pub use semantics::{build_body_chain, build_program_chain, Qmc};
