use num_complex::Complex64;

use super::ast::{canonical_gate_name, Body, GateTable, Instr, Program, QubitId, VarDecl, VarId, VarKind};
use super::lexer::{tokenize, Pos, Tok, Token};
use super::FrontendError;
use crate::linalg::{CMatrix, MAX_QUBITS, UNITARY_TOL};

/// Largest number of bits and booleans a program may declare.
pub const MAX_VARS: usize = 64;

const KEYWORDS: &[&str] = &[
    "qubits",
    "bits",
    "bools",
    "gates",
    "gate",
    "body",
    "exitOn",
    "if",
    "then",
    "else",
    "reset_at",
    "measure",
    "dynamic_lift",
];

type Name = (String, Pos);

#[derive(Debug)]
enum RawInstr {
    Reset(Name),
    Gate { name: Name, targets: Vec<Name> },
    Measure { out: Name, target: Name },
    Lift { out: Name, input: Name },
    If { guard: Name, then_body: Vec<RawInstr>, else_body: Vec<RawInstr> },
}

#[derive(Default)]
struct RawProgram {
    qubits: Option<Vec<Name>>,
    /// Explicit `bits` and `bools` declarations in source order.
    decls: Vec<(Name, VarKind)>,
    gates: Vec<(Name, Vec<Vec<Complex64>>)>,
    body: Option<(Pos, Vec<RawInstr>)>,
    exit: Option<Name>,
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.at + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, FrontendError> {
        Err(FrontendError::Syntax {
            pos: self.pos(),
            expected: expected.to_string(),
            found: self.peek().to_string(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Pos, FrontendError> {
        if *self.peek() == tok {
            Ok(self.next().pos)
        } else {
            self.error(what)
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn skip_semis(&mut self) {
        while *self.peek() == Tok::Semi {
            self.next();
        }
    }

    fn name(&mut self, what: &str) -> Result<Name, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let pos = self.next().pos;
                Ok((s, pos))
            }
            _ => self.error(what),
        }
    }

    fn name_list(&mut self, what: &str) -> Result<Vec<Name>, FrontendError> {
        let mut names = vec![self.name(what)?];
        while *self.peek() == Tok::Comma {
            self.next();
            names.push(self.name(what)?);
        }
        Ok(names)
    }

    fn program(&mut self) -> Result<RawProgram, FrontendError> {
        let mut raw = RawProgram::default();
        loop {
            self.skip_semis();
            let pos = self.pos();
            let section = match self.peek() {
                Tok::Eof => break,
                Tok::Ident(s) => s.clone(),
                _ => return self.error("a section (`qubits`, `bits`, `bools`, `gates`, `body`, `exitOn`)"),
            };
            self.next();
            match section.as_str() {
                "qubits" if raw.qubits.is_none() => raw.qubits = Some(self.name_list("a qubit name")?),
                "bits" => {
                    let names = self.name_list("a bit name")?;
                    raw.decls.extend(names.into_iter().map(|n| (n, VarKind::Bit)));
                }
                "bools" => {
                    let names = self.name_list("a boolean name")?;
                    raw.decls.extend(names.into_iter().map(|n| (n, VarKind::Bool)));
                }
                "gates" => {
                    self.expect(Tok::LBrace, "`{`")?;
                    loop {
                        self.skip_semis();
                        if *self.peek() == Tok::RBrace {
                            self.next();
                            break;
                        }
                        self.eat_keyword("gate");
                        let name = self.name("a gate name")?;
                        self.expect(Tok::Eq, "`=`")?;
                        let rows = self.matrix()?;
                        raw.gates.push((name, rows));
                    }
                }
                "body" if raw.body.is_none() => {
                    let body = self.block()?;
                    raw.body = Some((pos, body));
                }
                "exitOn" if raw.exit.is_none() => raw.exit = Some(self.name("a boolean name")?),
                "qubits" | "body" | "exitOn" => {
                    return Err(FrontendError::Syntax {
                        pos,
                        expected: "each of `qubits`, `body`, `exitOn` at most once".into(),
                        found: format!("a second `{section}` section"),
                    })
                }
                _ => {
                    return Err(FrontendError::Syntax {
                        pos,
                        expected: "a section (`qubits`, `bits`, `bools`, `gates`, `body`, `exitOn`)".into(),
                        found: format!("`{section}`"),
                    })
                }
            }
        }
        Ok(raw)
    }

    fn matrix(&mut self) -> Result<Vec<Vec<Complex64>>, FrontendError> {
        self.expect(Tok::LBracket, "`[` opening a matrix")?;
        let mut rows = Vec::new();
        loop {
            self.expect(Tok::LBracket, "`[` opening a matrix row")?;
            let mut row = vec![self.complex()?];
            while *self.peek() == Tok::Comma {
                self.next();
                row.push(self.complex()?);
            }
            self.expect(Tok::RBracket, "`]` closing a matrix row")?;
            rows.push(row);
            match self.peek() {
                Tok::Comma => {
                    self.next();
                }
                Tok::RBracket => {
                    self.next();
                    return Ok(rows);
                }
                _ => return self.error("`,` or `]`"),
            }
        }
    }

    /// `a`, `bi`, `a+bi`, `-i`, sums and differences of such terms.
    fn complex(&mut self) -> Result<Complex64, FrontendError> {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut sign = 1.0;
        let mut first = true;
        loop {
            match self.peek() {
                Tok::Minus => {
                    self.next();
                    sign = -sign;
                    continue;
                }
                Tok::Plus => {
                    self.next();
                    continue;
                }
                _ => {}
            }
            let term = match self.peek().clone() {
                Tok::Number(x) => Complex64::new(x, 0.0),
                Tok::Imag(x) => Complex64::new(0.0, x),
                Tok::Ident(s) if s == "i" => Complex64::new(0.0, 1.0),
                _ if first => return self.error("a complex number"),
                _ => return self.error("a number after the sign"),
            };
            self.next();
            acc += term * sign;
            first = false;
            sign = 1.0;
            match self.peek() {
                Tok::Plus | Tok::Minus => continue,
                _ => return Ok(acc),
            }
        }
    }

    fn block(&mut self) -> Result<Vec<RawInstr>, FrontendError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut body = Vec::new();
        loop {
            self.skip_semis();
            if *self.peek() == Tok::RBrace {
                self.next();
                return Ok(body);
            }
            body.push(self.instr()?);
        }
    }

    fn targets(&mut self) -> Result<Vec<Name>, FrontendError> {
        if *self.peek() == Tok::LBracket {
            self.next();
            let names = self.name_list("a qubit name")?;
            self.expect(Tok::RBracket, "`]`")?;
            Ok(names)
        } else {
            self.name_list("a qubit name")
        }
    }

    fn instr(&mut self) -> Result<RawInstr, FrontendError> {
        let head = match self.peek().clone() {
            Tok::Ident(s) => s,
            _ => return self.error("an instruction"),
        };
        if head == "reset_at" {
            self.next();
            return Ok(RawInstr::Reset(self.name("a qubit name")?));
        }
        if head == "if" {
            self.next();
            let guard = if *self.peek() == Tok::LParen {
                self.next();
                let g = self.name("a boolean name")?;
                self.expect(Tok::RParen, "`)`")?;
                g
            } else {
                self.name("a boolean name")?
            };
            self.eat_keyword("then");
            let then_body = self.block()?;
            let else_body = if self.eat_keyword("else") {
                self.block()?
            } else {
                Vec::new()
            };
            return Ok(RawInstr::If {
                guard,
                then_body,
                else_body,
            });
        }
        if *self.peek_at(1) == Tok::Arrow {
            let out = self.name("a variable name")?;
            self.next();
            if self.eat_keyword("measure") {
                let target = self.name("a qubit name")?;
                return Ok(RawInstr::Measure { out, target });
            }
            if self.eat_keyword("dynamic_lift") {
                let input = self.name("a bit name")?;
                return Ok(RawInstr::Lift { out, input });
            }
            return self.error("`measure` or `dynamic_lift`");
        }
        if KEYWORDS.contains(&head.as_str()) {
            return self.error("an instruction");
        }
        let pos = self.next().pos;
        let targets = self.targets()?;
        Ok(RawInstr::Gate {
            name: (head, pos),
            targets,
        })
    }
}

struct Resolver {
    qubits: Vec<String>,
    vars: Vec<VarDecl>,
    gates: GateTable,
}

impl Resolver {
    fn check_fresh(&self, name: &Name) -> Result<(), FrontendError> {
        let (n, pos) = name;
        if self.qubits.contains(n) || self.vars.iter().any(|v| &v.name == n) || self.gates.contains(n) {
            return Err(FrontendError::DuplicateName {
                name: n.clone(),
                pos: *pos,
            });
        }
        Ok(())
    }

    fn declare(&mut self, name: &Name, kind: VarKind) -> Result<(), FrontendError> {
        self.check_fresh(name)?;
        if self.vars.len() == MAX_VARS {
            return Err(FrontendError::TooManyVariables(MAX_VARS));
        }
        self.vars.push(VarDecl {
            name: name.0.clone(),
            kind,
        });
        Ok(())
    }

    fn declare_written(&mut self, name: &Name, kind: VarKind) -> Result<(), FrontendError> {
        match self.vars.iter().find(|v| v.name == name.0) {
            Some(v) if v.kind == kind => Ok(()),
            Some(v) => Err(FrontendError::KindMismatch {
                name: name.0.clone(),
                expected: kind,
                found: v.kind,
                pos: name.1,
            }),
            None => self.declare(name, kind),
        }
    }

    fn collect_writes(&mut self, body: &[RawInstr]) -> Result<(), FrontendError> {
        for instr in body {
            match instr {
                RawInstr::Measure { out, .. } => self.declare_written(out, VarKind::Bit)?,
                RawInstr::Lift { out, .. } => self.declare_written(out, VarKind::Bool)?,
                RawInstr::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    self.collect_writes(then_body)?;
                    self.collect_writes(else_body)?;
                }
                RawInstr::Reset(_) | RawInstr::Gate { .. } => {}
            }
        }
        Ok(())
    }

    fn qubit(&self, name: &Name) -> Result<QubitId, FrontendError> {
        self.qubits
            .iter()
            .position(|q| *q == name.0)
            .map(QubitId)
            .ok_or_else(|| FrontendError::UnknownQubit {
                name: name.0.clone(),
                pos: name.1,
            })
    }

    fn var(&self, name: &Name, kind: VarKind) -> Result<VarId, FrontendError> {
        match self.vars.iter().position(|v| v.name == name.0) {
            Some(i) if self.vars[i].kind == kind => Ok(VarId(i)),
            Some(i) => Err(FrontendError::KindMismatch {
                name: name.0.clone(),
                expected: kind,
                found: self.vars[i].kind,
                pos: name.1,
            }),
            None => Err(FrontendError::UnknownVariable {
                name: name.0.clone(),
                pos: name.1,
            }),
        }
    }

    fn body(&self, raw: &[RawInstr]) -> Result<Body, FrontendError> {
        raw.iter().map(|i| self.instr(i)).collect()
    }

    fn instr(&self, raw: &RawInstr) -> Result<Instr, FrontendError> {
        Ok(match raw {
            RawInstr::Reset(q) => Instr::Reset(self.qubit(q)?),
            RawInstr::Gate { name, targets } => {
                let def = self
                    .gates
                    .get(&name.0)
                    .or_else(|| self.gates.get(resolve_gate_name(&name.0)))
                    .ok_or_else(|| FrontendError::UnknownGate {
                        name: name.0.clone(),
                        pos: name.1,
                    })?;
                if def.arity != targets.len() {
                    return Err(FrontendError::ArityMismatch {
                        gate: def.name.clone(),
                        expected: def.arity,
                        found: targets.len(),
                        pos: name.1,
                    });
                }
                let mut ids = Vec::with_capacity(targets.len());
                for t in targets {
                    let q = self.qubit(t)?;
                    if ids.contains(&q) {
                        return Err(FrontendError::DuplicateTarget {
                            qubit: t.0.clone(),
                            pos: t.1,
                        });
                    }
                    ids.push(q);
                }
                Instr::Gate {
                    gate: def.name.clone(),
                    targets: ids,
                }
            }
            RawInstr::Measure { out, target } => Instr::Measure {
                out: self.var(out, VarKind::Bit)?,
                target: self.qubit(target)?,
            },
            RawInstr::Lift { out, input } => Instr::DynamicLift {
                out: self.var(out, VarKind::Bool)?,
                input: self.var(input, VarKind::Bit)?,
            },
            RawInstr::If {
                guard,
                then_body,
                else_body,
            } => Instr::IfElse {
                guard: self.var(guard, VarKind::Bool)?,
                then_body: self.body(then_body)?,
                else_body: self.body(else_body)?,
            },
        })
    }
}

/// `H_at`, `hadamard_at`, `gate_H` all name the built-in `H`.
fn resolve_gate_name(name: &str) -> &str {
    canonical_gate_name(name.strip_suffix("_at").unwrap_or(name))
}

fn build_gate(name: &Name, rows: Vec<Vec<Complex64>>) -> Result<CMatrix, FrontendError> {
    let bad_shape = || FrontendError::BadGateMatrix {
        gate: name.0.clone(),
        pos: name.1,
        reason: "matrix must be square with a power-of-two dimension of at least 2".into(),
    };
    let dim = rows.len();
    if dim < 2 || !dim.is_power_of_two() || rows.iter().any(|r| r.len() != dim) {
        return Err(bad_shape());
    }
    if dim.trailing_zeros() as usize > MAX_QUBITS {
        return Err(bad_shape());
    }
    let m = CMatrix::from_rows(&rows).map_err(|_| bad_shape())?;
    if !m.is_unitary(UNITARY_TOL) {
        return Err(FrontendError::BadGateMatrix {
            gate: name.0.clone(),
            pos: name.1,
            reason: format!("matrix is not unitary within {UNITARY_TOL:e}"),
        });
    }
    Ok(m)
}

/// Parses `.qpe` source into a resolved [`Program`].
///
/// Bits and booleans may be declared in `bits` / `bools` sections; any
/// variable written by `measure` or `dynamic_lift` is declared implicitly, in
/// order of first appearance. Guard definedness is checked by
/// [`super::validate`], not here.
pub fn parse_program(src: &str) -> Result<Program, FrontendError> {
    let toks = tokenize(src)?;
    let mut parser = Parser { toks, at: 0 };
    let raw = parser.program()?;

    let qubit_names = raw.qubits.ok_or(FrontendError::MissingSection("qubits"))?;
    let (_, raw_body) = raw.body.ok_or(FrontendError::MissingSection("body"))?;
    if qubit_names.len() > MAX_QUBITS {
        return Err(FrontendError::TooManyQubits {
            count: qubit_names.len(),
            max: MAX_QUBITS,
        });
    }

    let mut r = Resolver {
        qubits: Vec::new(),
        vars: Vec::new(),
        gates: GateTable::default(),
    };
    for q in &qubit_names {
        r.check_fresh(q)?;
        r.qubits.push(q.0.clone());
    }
    for (name, rows) in raw.gates {
        let resolved = resolve_gate_name(&name.0);
        if resolved != name.0 && r.gates.contains(resolved) {
            return Err(FrontendError::DuplicateName {
                name: name.0.clone(),
                pos: name.1,
            });
        }
        r.check_fresh(&name)?;
        let m = build_gate(&name, rows)?;
        r.gates.insert_user(name.0, m);
    }
    for (name, kind) in &raw.decls {
        r.declare(name, *kind)?;
    }
    r.collect_writes(&raw_body)?;
    let body = r.body(&raw_body)?;
    if body.is_empty() {
        return Err(FrontendError::EmptyBody);
    }
    let exit_guard = raw.exit.map(|g| r.var(&g, VarKind::Bool)).transpose()?;

    Ok(Program {
        qubits: r.qubits,
        vars: r.vars,
        gates: r.gates,
        body,
        exit_guard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::body_size;

    #[test]
    fn toy_program() {
        let p = parse_program(
            "qubits q1, q2
             body {
                 reset_at q1
                 reset_at q2
                 X_at q2
                 hadamard_at q2
                 m <- measure q2
                 bool <- dynamic_lift m
                 if bool { Z_at q1 } else { X_at q1 }
             }
             exitOn bool",
        )
        .unwrap();
        assert_eq!(p.num_qubits(), 2);
        assert_eq!(p.vars.len(), 2);
        assert_eq!(p.var(VarId(0)).kind, VarKind::Bit);
        assert_eq!(p.var(VarId(1)).kind, VarKind::Bool);
        assert_eq!(p.body.len(), 7);
        assert_eq!(body_size(&p.body), 9);
        assert_eq!(p.exit_guard, Some(VarId(1)));
        assert_eq!(
            p.body[3],
            Instr::Gate {
                gate: "H".into(),
                targets: vec![QubitId(1)]
            }
        );
    }

    #[test]
    fn minimal_program() {
        let p = parse_program("qubits q\nbody { reset_at q }").unwrap();
        assert_eq!(p.num_qubits(), 1);
        assert!(p.vars.is_empty());
        assert_eq!(p.exit_guard, None);
    }

    #[test]
    fn unknown_exit_guard() {
        let err = parse_program("qubits q\nbody { reset_at q }\nexitOn b").unwrap_err();
        assert!(matches!(err, FrontendError::UnknownVariable { ref name, .. } if name == "b"));
    }

    #[test]
    fn gate_errors() {
        let err = parse_program("qubits a, b\nbody { FOO_at a }").unwrap_err();
        assert!(matches!(err, FrontendError::UnknownGate { .. }));
        let err = parse_program("qubits a, b\nbody { CNOT_at a }").unwrap_err();
        assert!(matches!(err, FrontendError::ArityMismatch { expected: 2, found: 1, .. }));
        let err = parse_program("qubits a, b\nbody { CNOT_at [a, a] }").unwrap_err();
        assert!(matches!(err, FrontendError::DuplicateTarget { .. }));
        let err = parse_program("qubits a\ngates { B = [[1, 1], [0, 1]] }\nbody { B a }").unwrap_err();
        assert!(matches!(err, FrontendError::BadGateMatrix { .. }));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_program("qubits a\nbody { reset_at }").unwrap_err();
        match err {
            FrontendError::Syntax { pos, .. } => assert_eq!(pos, Pos { line: 2, col: 17 }),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kinds_are_enforced() {
        let err = parse_program("qubits a\nbody { m <- measure a; if m { X a } }").unwrap_err();
        assert!(matches!(err, FrontendError::KindMismatch { .. }));
        let err = parse_program("qubits a\nbody { m <- measure a; m <- dynamic_lift m }").unwrap_err();
        assert!(matches!(err, FrontendError::KindMismatch { .. }));
        let err = parse_program("qubits a\nbody { a <- measure a }").unwrap_err();
        assert!(matches!(err, FrontendError::DuplicateName { .. }));
    }

    #[test]
    fn complex_entries() {
        let p = parse_program(
            "qubits a\ngates { V = [[0.5+0.5i, 0.5-0.5i], [0.5-0.5i, 0.5+0.5i]] }\nbody { V_at a }",
        )
        .unwrap();
        let v = &p.gates.get("V").unwrap().matrix;
        assert_eq!(v[(0, 1)], Complex64::new(0.5, -0.5));
    }
}
