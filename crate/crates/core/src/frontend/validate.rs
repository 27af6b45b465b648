use std::ops::Deref;

use super::ast::{Instr, Program, VarId};
use super::FrontendError;

/// A guard read together with where it happens, e.g. `body[2].then[0]` or `exitOn`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardUse {
    pub var: VarId,
    pub location: String,
}

/// A program whose guards are all written on every path before being read.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedProgram {
    program: Program,
    guard_uses: Vec<GuardUse>,
}

impl CheckedProgram {
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn into_program(self) -> Program {
        self.program
    }

    /// Every guard read, in textual order. Each one passed definite assignment.
    pub fn guard_uses(&self) -> &[GuardUse] {
        &self.guard_uses
    }
}

impl Deref for CheckedProgram {
    type Target = Program;

    fn deref(&self) -> &Program {
        &self.program
    }
}

struct Checker<'a> {
    program: &'a Program,
    uses: Vec<GuardUse>,
}

impl Checker<'_> {
    fn require(&mut self, var: VarId, defined: u64, location: String) -> Result<(), FrontendError> {
        if defined & (1 << var.0) == 0 {
            return Err(FrontendError::UndefinedGuard {
                name: self.program.var(var).name.clone(),
                location,
            });
        }
        self.uses.push(GuardUse { var, location });
        Ok(())
    }

    /// Returns the set of booleans written on every path through `body`.
    fn body(&mut self, body: &[Instr], mut defined: u64, path: &str) -> Result<u64, FrontendError> {
        for (i, instr) in body.iter().enumerate() {
            let here = format!("{path}[{i}]");
            match instr {
                Instr::DynamicLift { out, .. } => defined |= 1 << out.0,
                Instr::IfElse {
                    guard,
                    then_body,
                    else_body,
                } => {
                    self.require(*guard, defined, here.clone())?;
                    let t = self.body(then_body, defined, &format!("{here}.then"))?;
                    let e = self.body(else_body, defined, &format!("{here}.else"))?;
                    defined = t & e;
                }
                Instr::Reset(_) | Instr::Gate { .. } | Instr::Measure { .. } => {}
            }
        }
        Ok(defined)
    }
}

/// Definite-assignment check: every `if` guard and the `exitOn` guard must be
/// written by a `dynamic_lift` on every path that reaches the read.
pub fn validate(program: Program) -> Result<CheckedProgram, FrontendError> {
    let mut checker = Checker {
        program: &program,
        uses: Vec::new(),
    };
    let defined = checker.body(&program.body, 0, "body")?;
    if let Some(g) = program.exit_guard {
        checker.require(g, defined, "exitOn".to_string())?;
    }
    let guard_uses = checker.uses;
    Ok(CheckedProgram { program, guard_uses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;

    fn check(src: &str) -> Result<CheckedProgram, FrontendError> {
        validate(parse_program(src).unwrap())
    }

    #[test]
    fn lifted_guard_passes() {
        let p = check(
            "qubits q1, q2
             body { reset_at q1; reset_at q2; X_at q2; H_at q2
                    m <- measure q2; b <- dynamic_lift m
                    if b { Z_at q1 } else { X_at q1 } }
             exitOn b",
        )
        .unwrap();
        let locations: Vec<_> = p.guard_uses().iter().map(|u| u.location.as_str()).collect();
        assert_eq!(locations, ["body[6]", "exitOn"]);
    }

    #[test]
    fn unlifted_guard_fails() {
        let err = check("qubits q bools b body { if b { X_at q } else { Z_at q } }").unwrap_err();
        assert_eq!(
            err,
            FrontendError::UndefinedGuard {
                name: "b".into(),
                location: "body[0]".into()
            }
        );
    }

    #[test]
    fn one_branch_is_not_enough() {
        let err = check(
            "qubits q
             body { m <- measure q; c <- dynamic_lift m
                    if c { b <- dynamic_lift m } else { X_at q } }
             exitOn b",
        )
        .unwrap_err();
        assert!(matches!(err, FrontendError::UndefinedGuard { ref location, .. } if location == "exitOn"));
    }

    #[test]
    fn both_branches_suffice() {
        check(
            "qubits q
             body { m <- measure q; c <- dynamic_lift m
                    if c { b <- dynamic_lift m } else { b <- dynamic_lift m } }
             exitOn b",
        )
        .unwrap();
    }

    #[test]
    fn nested_guard_location() {
        let err = check(
            "qubits q
             body { m <- measure q; c <- dynamic_lift m
                    if c { X_at q } else { if d { X_at q } }
                    d <- dynamic_lift m }",
        )
        .unwrap_err();
        assert!(matches!(err, FrontendError::UndefinedGuard { ref location, .. } if location == "body[2].else[0]"));
    }
}
