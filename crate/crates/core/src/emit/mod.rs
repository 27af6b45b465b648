//! Serialization of chains: QPMC model text, Graphviz DOT, and a reader for
//! the QPMC text this module writes.

mod dot;
mod qpmc;
mod reader;

use thiserror::Error;

use crate::linalg::{CMatrix, Superoperator};
use crate::semantics::{OpLabel, Qmc};

pub use dot::emit_dot;
pub use qpmc::emit_qpmc;
pub use reader::{read_qpmc, ModelChain};
pub(crate) use reader::parse_complex;

/// Matrices closer than this are emitted as one constant.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Constant names for the chain's operators, shared by every output format.
#[derive(Debug, Clone)]
pub(crate) struct Constants {
    /// `(name, map)` in first-use order.
    pub defs: Vec<(String, Superoperator)>,
    /// Constant index for each chain operator id.
    pub of_op: Vec<usize>,
}

fn same_kraus(a: &Superoperator, b: &Superoperator) -> bool {
    a.kraus().len() == b.kraus().len()
        && a.kraus()
            .iter()
            .zip(b.kraus())
            .all(|(x, y)| x.approx_eq(y, DEDUP_TOL))
}

fn is_projector(k: &CMatrix) -> bool {
    k.is_hermitian(DEDUP_TOL)
        && k.matmul(k)
            .map(|kk| kk.approx_eq(k, DEDUP_TOL))
            .unwrap_or(false)
}

impl Constants {
    pub fn of(chain: &Qmc) -> Constants {
        let mut defs: Vec<(String, Superoperator)> = Vec::new();
        let mut counters = [0usize; 3];
        let mut of_op = vec![usize::MAX; chain.ops().len()];
        let identity = CMatrix::identity(chain.dim());
        for (_, e) in chain.transitions() {
            if of_op[e.op] != usize::MAX {
                continue;
            }
            let op = chain.op(e.op);
            if let Some(i) = defs.iter().position(|(_, s)| same_kraus(s, &op.superop)) {
                of_op[e.op] = i;
                continue;
            }
            let kraus = op.superop.kraus();
            let name = if kraus.len() == 1 && kraus[0].approx_eq(&identity, DEDUP_TOL) {
                "I".to_string()
            } else {
                let slot = match (&op.label, kraus.len()) {
                    (OpLabel::Measure { .. }, _) => 0,
                    (_, 1) if is_projector(&kraus[0]) => 0,
                    (OpLabel::Gate { .. }, _) => 1,
                    (_, 1) if kraus[0].is_unitary(1e-10) => 1,
                    _ => 2,
                };
                let prefix = ["M", "U", "K"][slot];
                counters[slot] += 1;
                format!("{prefix}{}", counters[slot] - 1)
            };
            of_op[e.op] = defs.len();
            defs.push((name, op.superop.clone()));
        }
        Constants { defs, of_op }
    }

    pub fn name(&self, op: usize) -> &str {
        &self.defs[self.of_op[op]].0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_program;
    use crate::semantics::{build_body_chain, build_program_chain};

    fn chain(src: &str) -> Qmc {
        build_program_chain(&load_program(src).unwrap()).unwrap()
    }

    #[test]
    fn reset_model_text() {
        let c = build_body_chain(&load_program("qubits q body { reset_at q }").unwrap()).unwrap();
        let text = emit_qpmc(&c);
        let consts: Vec<&str> = text
            .lines()
            .filter_map(|l| l.strip_prefix("const matrix "))
            .map(|l| l.split(' ').next().unwrap())
            .collect();
        assert_eq!(consts, ["M0", "M1", "I", "U0"]);
        assert!(text.contains("s : [0..2] init 0;"));
        assert!(text.contains("[] (s=0) -> <<M0>> : (s'=1) + <<M1>> : (s'=2);"));
        assert!(!text.contains("label"));
    }

    #[test]
    fn round_trip_through_text() {
        for src in [
            "qubits q body { reset_at q; H_at q; m <- measure q; b <- dynamic_lift m } exitOn b",
            "qubits a, b body { H_at a; CNOT_at [a, b]; x <- measure a; g <- dynamic_lift x; if g { Z_at b } else { S_at b } }",
            "qubits q gates { G = [[0.6, 0.8i], [0.8i, 0.6]] } body { G q; m <- measure q }",
        ] {
            let c = chain(src);
            let back = read_qpmc(&emit_qpmc(&c)).unwrap();
            assert!(back.approx_eq(&ModelChain::from_qmc(&c), 1e-15), "{src}");
        }
    }

    #[test]
    fn labels_list_states() {
        let c = chain("qubits q body { H_at q; m <- measure q; b <- dynamic_lift m }");
        let text = emit_qpmc(&c);
        let m: Vec<usize> = (0..c.num_states()).filter(|&s| c.holds(s, c.var_id("m").unwrap())).collect();
        let want = m.iter().map(|s| format!("s={s}")).collect::<Vec<_>>().join(" | ");
        assert!(text.contains(&format!("label \"m\" = {want};")));
        let c = chain("qubits q body { m <- measure q; b <- dynamic_lift m; reset_at q }");
        assert!(emit_qpmc(&c).lines().all(|l| !l.starts_with("label") || l.contains("s=")));
    }

    #[test]
    fn output_is_deterministic() {
        let src = "qubits a, b body { H_at a; x <- measure a; g <- dynamic_lift x; if g { X_at b } else { H_at b }; y <- measure b }";
        let first = (emit_qpmc(&chain(src)), emit_dot(&chain(src)));
        for _ in 0..5 {
            assert_eq!((emit_qpmc(&chain(src)), emit_dot(&chain(src))), first);
        }
    }

    #[test]
    fn dot_has_every_state_and_edge() {
        let c = chain("qubits q body { reset_at q; H_at q; m <- measure q; b <- dynamic_lift m } exitOn b");
        let dot = emit_dot(&c);
        assert_eq!(dot.lines().filter(|l| l.contains("[label=") && !l.contains("->")).count(), c.num_states());
        assert_eq!(dot.lines().filter(|l| l.contains("->")).count(), c.num_edges());
        assert_eq!(dot.matches("style=dashed").count(), 1);
        assert!(dot.contains("s0 [label=\"0: (reset_at q (+3), {})\"]"));
    }

    #[test]
    fn reader_errors_carry_lines() {
        assert!(matches!(read_qpmc("module m\n"), Err(EmitError::Parse { line: 1, .. })));
        let bad = "qmc\nmodule m\n    s : [0..0] init 0;\n    [] (s=0) -> <<Z>> : (s'=0);\nendmodule\n";
        assert_eq!(read_qpmc(bad).unwrap_err(), EmitError::Parse { line: 4, message: "undeclared constant `Z`".into() });
        assert!(matches!(read_qpmc("qmc\nconst matrix A = [1+xi];\n"), Err(EmitError::Parse { line: 2, .. })));
    }

    #[test]
    fn negative_and_tiny_entries_survive() {
        let z = num_complex::Complex64::new(-1.25e-7, -3.0e12);
        let m = CMatrix::from_rows(&[vec![z]]).unwrap();
        let text = qpmc::matrix(&m);
        let back = format!("qmc\nconst matrix A = {text};\nmodule m\n    s : [0..0] init 0;\n    [] (s=0) -> <<A>> : (s'=0);\nendmodule\n");
        let mc = read_qpmc(&back).unwrap();
        assert_eq!(mc.transitions[0].2.kraus()[0].data()[0], z);
        assert_eq!(qpmc::complex(num_complex::Complex64::new(-0.0, -0.0)), "0.0000000000000000e0+0.0000000000000000e0i");
    }
}
