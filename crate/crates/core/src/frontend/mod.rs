//! Lexer, parser, pretty-printer and guard validation for `.qpe` programs.
//!
//! ```text
//! qubits q1, q2
//! gates { G = [[0, 1], [1, 0]] }
//! body {
//!     reset_at q1
//!     H_at q1
//!     m <- measure q1
//!     b <- dynamic_lift m
//!     if b { G_at q2 } else { CNOT_at [q1, q2] }
//! }
//! exitOn b
//! ```
//!
//! Guards are single boolean variables; boolean combinations have to be
//! written as nested `if`s.

mod ast;
mod lexer;
mod parser;
mod pretty;
mod validate;

use thiserror::Error;

pub use ast::{
    body_size, canonical_gate_name, Body, GateDef, GateTable, Instr, Program, QubitId, VarDecl, VarId,
    VarKind,
};
pub use lexer::Pos;
pub use parser::{parse_program, MAX_VARS};
pub use pretty::pretty_print;
pub use validate::{validate, CheckedProgram, GuardUse};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{pos}: syntax error: expected {expected}, found {found}")]
    Syntax {
        pos: Pos,
        expected: String,
        found: String,
    },
    #[error("missing `{0}` section")]
    MissingSection(&'static str),
    #[error("program body is empty")]
    EmptyBody,
    #[error("{count} qubits declared, at most {max} supported")]
    TooManyQubits { count: usize, max: usize },
    #[error("more than {0} bits and booleans")]
    TooManyVariables(usize),
    #[error("{pos}: name `{name}` is already in use")]
    DuplicateName { name: String, pos: Pos },
    #[error("{pos}: unknown gate `{name}`")]
    UnknownGate { name: String, pos: Pos },
    #[error("{pos}: gate {gate} takes {expected} qubit(s), got {found}")]
    ArityMismatch {
        gate: String,
        expected: usize,
        found: usize,
        pos: Pos,
    },
    #[error("{pos}: qubit `{qubit}` appears twice in a target list")]
    DuplicateTarget { qubit: String, pos: Pos },
    #[error("{pos}: unknown qubit `{name}`")]
    UnknownQubit { name: String, pos: Pos },
    #[error("{pos}: unknown variable `{name}`")]
    UnknownVariable { name: String, pos: Pos },
    #[error("{pos}: `{name}` is a {found}, expected a {expected}")]
    KindMismatch {
        name: String,
        expected: VarKind,
        found: VarKind,
        pos: Pos,
    },
    #[error("{pos}: gate {gate}: {reason}")]
    BadGateMatrix { gate: String, pos: Pos, reason: String },
    #[error("guard `{name}` at {location} is not defined on every path")]
    UndefinedGuard { name: String, location: String },
}

/// Parses and validates in one go.
pub fn load_program(src: &str) -> Result<CheckedProgram, FrontendError> {
    validate(parse_program(src)?)
}
