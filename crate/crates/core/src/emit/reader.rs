use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::linalg::{CMatrix, Superoperator};
use crate::semantics::Qmc;

use super::EmitError;

/// The content of a QPMC model: what survives emission.
#[derive(Debug, Clone)]
pub struct ModelChain {
    pub num_states: usize,
    pub init: usize,
    /// `(from, to, map)` in command order.
    pub transitions: Vec<(usize, usize, Superoperator)>,
    /// Label name to the states it holds in, ascending.
    pub labels: Vec<(String, Vec<usize>)>,
}

impl ModelChain {
    pub fn from_qmc(c: &Qmc) -> ModelChain {
        let transitions = c
            .transitions()
            .map(|(s, e)| (s, e.target, c.superop(e).clone()))
            .collect();
        let labels = c
            .vars()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let states = (0..c.num_states())
                    .filter(|&s| c.holds(s, crate::frontend::VarId(i)))
                    .collect();
                (v.name.clone(), states)
            })
            .collect();
        ModelChain {
            num_states: c.num_states(),
            init: c.start(),
            transitions,
            labels,
        }
    }

    /// Same states, labels and transitions, with Kraus matrices equal within `tol`.
    pub fn approx_eq(&self, other: &ModelChain, tol: f64) -> bool {
        self.num_states == other.num_states
            && self.init == other.init
            && self.labels == other.labels
            && self.transitions.len() == other.transitions.len()
            && self
                .transitions
                .iter()
                .zip(&other.transitions)
                .all(|((a, b, x), (c, d, y))| {
                    a == c
                        && b == d
                        && x.kraus().len() == y.kraus().len()
                        && x.kraus().iter().zip(y.kraus()).all(|(k, l)| k.approx_eq(l, tol))
                })
    }
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, EmitError> {
    Err(EmitError::Parse {
        line,
        message: message.into(),
    })
}

fn parse_real(text: &str, line: usize) -> Result<f64, EmitError> {
    text.trim()
        .parse()
        .or_else(|_| err(line, format!("bad number `{text}`")))
}

pub(crate) fn parse_complex(text: &str, line: usize) -> Result<Complex64, EmitError> {
    let t = text.trim();
    let Some(body) = t.strip_suffix('i') else {
        return Ok(Complex64::new(parse_real(t, line)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => Ok(Complex64::new(
            parse_real(&body[..i], line)?,
            parse_real(&body[i..], line)?,
        )),
        None => Ok(Complex64::new(0.0, parse_real(body, line)?)),
    }
}

fn parse_matrix(text: &str, line: usize) -> Result<CMatrix, EmitError> {
    let inner = text
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .map_or_else(|| err(line, "matrix must be written as `[...]`"), Ok)?;
    let rows = inner
        .split(';')
        .map(|r| r.split(',').map(|z| parse_complex(z, line)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    CMatrix::from_rows(&rows).or_else(|e| err(line, e.to_string()))
}

/// `(from, [(constant, to)], line)` for one guarded command.
type Command = (usize, Vec<(String, usize)>, usize);

/// Reads QPMC text written by [`super::emit_qpmc`].
pub fn read_qpmc(text: &str) -> Result<ModelChain, EmitError> {
    let mut consts: BTreeMap<String, Superoperator> = BTreeMap::new();
    let mut range: Option<(usize, usize)> = None;
    let mut commands: Vec<Command> = Vec::new();
    let mut labels = Vec::new();
    let mut header = false;

    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let no = i + 1;
        let line = lines[i].trim();
        i += 1;
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        if line == "qmc" {
            header = true;
        } else if let Some(rest) = line.strip_prefix("const matrix ") {
            let (name, value) = rest.split_once('=').map_or_else(|| err(no, "expected `=`"), Ok)?;
            let value = value.trim().strip_suffix(';').map_or_else(|| err(no, "expected `;`"), Ok)?;
            let m = parse_matrix(value, no)?;
            let s = Superoperator::new(vec![m]).or_else(|e| err(no, e.to_string()))?;
            consts.insert(name.trim().to_string(), s);
        } else if let Some(rest) = line.strip_prefix("const kraus ") {
            let name = rest
                .trim()
                .strip_suffix('{')
                .and_then(|r| r.trim().strip_suffix('='))
                .map_or_else(|| err(no, "expected `NAME = {`"), Ok)?
                .trim()
                .to_string();
            let mut kraus = Vec::new();
            loop {
                let Some(l) = lines.get(i) else {
                    return err(no, "unterminated Kraus block");
                };
                i += 1;
                let l = l.trim();
                if l == "};" {
                    break;
                }
                kraus.push(parse_matrix(l.trim_end_matches(','), i)?);
            }
            let s = Superoperator::new(kraus).or_else(|e| err(no, e.to_string()))?;
            consts.insert(name, s);
        } else if line.starts_with("module ") || line == "endmodule" {
        } else if let Some(rest) = line.strip_prefix("s : [0..") {
            let (max, init) = rest.split_once("] init ").map_or_else(|| err(no, "bad state range"), Ok)?;
            let max: usize = max.parse().or_else(|_| err(no, "bad state range"))?;
            let init: usize = init
                .trim_end_matches(';')
                .trim()
                .parse()
                .or_else(|_| err(no, "bad initial state"))?;
            range = Some((max + 1, init));
        } else if let Some(rest) = line.strip_prefix("[] (s=") {
            let (from, rest) = rest.split_once(") -> ").map_or_else(|| err(no, "bad command"), Ok)?;
            let from: usize = from.parse().or_else(|_| err(no, "bad state index"))?;
            let rest = rest.strip_suffix(';').map_or_else(|| err(no, "expected `;`"), Ok)?;
            let mut branches = Vec::new();
            for b in rest.split(" + ") {
                let (c, t) = b.split_once(" : (s'=").map_or_else(|| err(no, "bad branch"), Ok)?;
                let c = c
                    .trim()
                    .strip_prefix("<<")
                    .and_then(|c| c.strip_suffix(">>"))
                    .map_or_else(|| err(no, "expected `<<NAME>>`"), Ok)?;
                let t: usize = t
                    .trim_end_matches(')')
                    .parse()
                    .or_else(|_| err(no, "bad target state"))?;
                branches.push((c.to_string(), t));
            }
            commands.push((from, branches, no));
        } else if let Some(rest) = line.strip_prefix("label \"") {
            let (name, formula) = rest.split_once("\" = ").map_or_else(|| err(no, "bad label"), Ok)?;
            let formula = formula.strip_suffix(';').map_or_else(|| err(no, "expected `;`"), Ok)?;
            let states = if formula == "false" {
                Vec::new()
            } else {
                formula
                    .split(" | ")
                    .map(|a| {
                        a.strip_prefix("s=")
                            .and_then(|k| k.parse().ok())
                            .map_or_else(|| err(no, format!("bad label atom `{a}`")), Ok)
                    })
                    .collect::<Result<Vec<usize>, _>>()?
            };
            labels.push((name.to_string(), states));
        } else {
            return err(no, format!("unexpected `{line}`"));
        }
    }
    if !header {
        return err(1, "missing `qmc` header");
    }
    let (num_states, init) = range.map_or_else(|| err(lines.len(), "missing state variable"), Ok)?;
    let mut transitions = Vec::new();
    for (from, branches, no) in commands {
        for (c, t) in branches {
            let s = consts
                .get(&c)
                .map_or_else(|| err(no, format!("undeclared constant `{c}`")), Ok)?;
            if from >= num_states || t >= num_states {
                return err(no, "state index out of range");
            }
            transitions.push((from, t, s.clone()));
        }
    }
    Ok(ModelChain {
        num_states,
        init,
        transitions,
        labels,
    })
}
