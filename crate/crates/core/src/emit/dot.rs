use std::fmt::Write;

use crate::semantics::{EdgeKind, Qmc};

use super::Constants;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz digraph with nodes `(residual, assignment)` and edges named by
/// the same constants as the QPMC output. Loop-back edges are dashed.
pub fn emit_dot(chain: &Qmc) -> String {
    let consts = Constants::of(chain);
    let mut out = String::from("digraph qmc {\n    rankdir=LR;\n    node [shape=ellipse];\n");
    for s in 0..chain.num_states() {
        let label = format!("{s}: ({}, {})", chain.residual_summary(s), chain.env_summary(s));
        writeln!(out, "    s{s} [label=\"{}\"];", escape(&label)).unwrap();
    }
    for (s, e) in chain.transitions() {
        let style = if e.kind == EdgeKind::LoopBack { ", style=dashed" } else { "" };
        writeln!(
            out,
            "    s{s} -> s{} [label=\"{}\"{style}];",
            e.target,
            escape(consts.name(e.op))
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
