use std::fmt::Write;

use num_complex::Complex64;

use crate::linalg::CMatrix;
use crate::semantics::Qmc;

use super::Constants;

fn real(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// `a+bi` with 17 significant digits in each part.
pub(crate) fn complex(z: Complex64) -> String {
    let im = if z.im == 0.0 { 0.0 } else { z.im };
    if im.is_sign_negative() {
        format!("{}-{}i", real(z.re), real(-im))
    } else {
        format!("{}+{}i", real(z.re), real(im))
    }
}

/// Row-major `[a, b; c, d]`.
pub(crate) fn matrix(m: &CMatrix) -> String {
    let rows: Vec<String> = (0..m.rows())
        .map(|r| m.row(r).iter().map(|z| complex(*z)).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", rows.join("; "))
}

/// QPMC model text: one matrix constant per distinct edge map, one guarded
/// command per state and one label per bit or boolean.
pub fn emit_qpmc(chain: &Qmc) -> String {
    let consts = Constants::of(chain);
    let mut out = String::from("qmc\n\n");
    for (name, s) in &consts.defs {
        match s.kraus() {
            [k] => writeln!(out, "const matrix {name} = {};", matrix(k)).unwrap(),
            ks => {
                writeln!(out, "const kraus {name} = {{").unwrap();
                let body: Vec<String> = ks.iter().map(|k| format!("    {}", matrix(k))).collect();
                writeln!(out, "{}", body.join(",\n")).unwrap();
                out.push_str("};\n");
            }
        }
    }
    out.push_str("\nmodule quipe\n");
    writeln!(
        out,
        "    s : [0..{}] init {};",
        chain.num_states().saturating_sub(1),
        chain.start()
    )
    .unwrap();
    for s in 0..chain.num_states() {
        let branches: Vec<String> = chain
            .edges(s)
            .iter()
            .map(|e| format!("<<{}>> : (s'={})", consts.name(e.op), e.target))
            .collect();
        writeln!(out, "    [] (s={s}) -> {};", branches.join(" + ")).unwrap();
    }
    out.push_str("endmodule\n");
    if !chain.vars().is_empty() {
        out.push('\n');
    }
    for (i, v) in chain.vars().iter().enumerate() {
        let states: Vec<String> = (0..chain.num_states())
            .filter(|&s| chain.state(s).env.get(crate::frontend::VarId(i)))
            .map(|s| format!("s={s}"))
            .collect();
        let formula = if states.is_empty() {
            "false".to_string()
        } else {
            states.join(" | ")
        };
        writeln!(out, "label \"{}\" = {formula};", v.name).unwrap();
    }
    out
}
