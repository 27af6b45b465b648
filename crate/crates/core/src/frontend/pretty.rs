use std::fmt::Write;

use num_complex::Complex64;

use super::ast::{Instr, Program, VarKind};

fn complex(c: Complex64) -> String {
    if c.im.is_sign_negative() {
        format!("{}-{}i", c.re, -c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

fn body(p: &Program, instrs: &[Instr], depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    for instr in instrs {
        match instr {
            Instr::Reset(q) => writeln!(out, "{pad}reset_at {}", p.qubit_name(*q)),
            Instr::Gate { gate, targets } => {
                let names: Vec<_> = targets.iter().map(|q| p.qubit_name(*q)).collect();
                writeln!(out, "{pad}{gate} [{}]", names.join(", "))
            }
            Instr::Measure { out: m, target } => {
                writeln!(out, "{pad}{} <- measure {}", p.var(*m).name, p.qubit_name(*target))
            }
            Instr::DynamicLift { out: b, input } => {
                writeln!(out, "{pad}{} <- dynamic_lift {}", p.var(*b).name, p.var(*input).name)
            }
            Instr::IfElse {
                guard,
                then_body,
                else_body,
            } => {
                writeln!(out, "{pad}if {} {{", p.var(*guard).name).unwrap();
                body(p, then_body, depth + 1, out);
                writeln!(out, "{pad}}} else {{").unwrap();
                body(p, else_body, depth + 1, out);
                writeln!(out, "{pad}}}")
            }
        }
        .unwrap();
    }
}

/// Canonical source text; parsing it yields the same [`Program`].
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    writeln!(out, "qubits {}", p.qubits.join(", ")).unwrap();
    for v in &p.vars {
        let section = match v.kind {
            VarKind::Bit => "bits",
            VarKind::Bool => "bools",
        };
        writeln!(out, "{section} {}", v.name).unwrap();
    }
    let user: Vec<_> = p.gates.user_gates().collect();
    if !user.is_empty() {
        out.push_str("gates {\n");
        for g in user {
            let rows: Vec<String> = (0..g.matrix.rows())
                .map(|r| {
                    let row: Vec<String> = (0..g.matrix.cols()).map(|c| complex(g.matrix[(r, c)])).collect();
                    format!("[{}]", row.join(", "))
                })
                .collect();
            writeln!(out, "    {} = [{}]", g.name, rows.join(", ")).unwrap();
        }
        out.push_str("}\n");
    }
    out.push_str("body {\n");
    body(p, &p.body, 1, &mut out);
    out.push_str("}\n");
    if let Some(g) = p.exit_guard {
        writeln!(out, "exitOn {}", p.var(g).name).unwrap();
    }
    out
}
