use std::fmt;

use super::QctlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl Rel {
    /// Compares a probability against a bound, allowing `tol` of slack in the
    /// direction that makes the relation hold (strict ones need a clear margin).
    pub fn holds(self, p: f64, bound: f64, tol: f64) -> bool {
        match self {
            Rel::Ge => p >= bound - tol,
            Rel::Le => p <= bound + tol,
            Rel::Gt => p > bound + tol,
            Rel::Lt => p < bound - tol,
            Rel::Eq => (p - bound).abs() <= tol,
        }
    }

    /// Same comparison, required for every probability in `[lo, hi]`.
    pub fn holds_on_range(self, lo: f64, hi: f64, bound: f64, tol: f64) -> bool {
        self.holds(lo, bound, tol) && self.holds(hi, bound, tol)
    }
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateFormula {
    True,
    False,
    /// Absorbing empty-body states.
    Terminated,
    Var(String),
    /// `s = k`: the chain state numbered `k`.
    StateIs(usize),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Compare { rel: Rel, bound: f64, path: Box<PathFormula> },
}

impl StateFormula {
    pub fn negate(f: StateFormula) -> StateFormula {
        StateFormula::Not(Box::new(f))
    }

    pub fn and(a: StateFormula, b: StateFormula) -> StateFormula {
        StateFormula::And(Box::new(a), Box::new(b))
    }

    /// `a | b` as `!(!a & !b)`.
    pub fn or(a: StateFormula, b: StateFormula) -> StateFormula {
        Self::negate(Self::and(Self::negate(a), Self::negate(b)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathFormula {
    Next(Box<StateFormula>),
    /// `lhs U rhs`, optionally bounded by a number of steps.
    Until {
        lhs: Box<StateFormula>,
        rhs: Box<StateFormula>,
        bound: Option<usize>,
    },
}

impl PathFormula {
    pub fn next(f: StateFormula) -> PathFormula {
        PathFormula::Next(Box::new(f))
    }

    pub fn until(lhs: StateFormula, rhs: StateFormula, bound: Option<usize>) -> PathFormula {
        PathFormula::Until {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            bound,
        }
    }

    /// `F φ` as `true U φ`.
    pub fn eventually(f: StateFormula, bound: Option<usize>) -> PathFormula {
        Self::until(StateFormula::True, f, bound)
    }
}

/// One line of a property file.
#[derive(Debug, Clone, PartialEq)]
pub enum Property {
    /// A state formula checked at the start state.
    Check(StateFormula),
    /// `Q=? [pf]`.
    Query(PathFormula),
    /// `qeval(Q=? [pf], r)`.
    Eval { path: PathFormula, rho: String },
    /// `qprob(Q=? [pf], r)`.
    Prob { path: PathFormula, rho: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Bang,
    Amp,
    Bar,
    Eq,
    Question,
    Le,
    Lt,
    Ge,
    Gt,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(x) => write!(f, "number {x}"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Question => f.write_str("`?`"),
            Tok::Le => f.write_str("`<=`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Ge => f.write_str("`>=`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Eof => f.write_str("end of formula"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, QctlError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let x = text.parse().map_err(|_| QctlError::Syntax {
                col,
                expected: "a number".into(),
                found: format!("`{text}`"),
            })?;
            out.push((Tok::Num(x), col));
            continue;
        }
        let two = chars.get(i + 1) == Some(&'=');
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            ',' => (Tok::Comma, 1),
            '!' => (Tok::Bang, 1),
            '&' => (Tok::Amp, 1),
            '|' => (Tok::Bar, 1),
            '?' => (Tok::Question, 1),
            '=' => (Tok::Eq, 1),
            '<' if two => (Tok::Le, 2),
            '>' if two => (Tok::Ge, 2),
            '<' => (Tok::Lt, 1),
            '>' => (Tok::Gt, 1),
            other => {
                return Err(QctlError::Syntax {
                    col,
                    expected: "a token".into(),
                    found: format!("character `{other}`"),
                })
            }
        };
        out.push((tok, col));
        i += len;
    }
    out.push((Tok::Eof, chars.len() + 1));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, QctlError> {
        Err(QctlError::Syntax {
            col: self.toks[self.at].1,
            expected: expected.into(),
            found: self.peek().to_string(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), QctlError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(what)
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    fn property(&mut self) -> Result<Property, QctlError> {
        let prop = if (self.is_ident("qeval") || self.is_ident("qprob")) && *self.peek2() == Tok::LParen {
            let eval = self.is_ident("qeval");
            self.bump();
            self.bump();
            let path = self.query()?;
            self.expect(Tok::Comma, "`,`")?;
            let rho = match self.bump() {
                Tok::Ident(s) => s,
                _ => {
                    self.at -= 1;
                    return self.error("the name of the initial state");
                }
            };
            self.expect(Tok::RParen, "`)`")?;
            if eval {
                Property::Eval { path, rho }
            } else {
                Property::Prob { path, rho }
            }
        } else if self.is_ident("Q") && *self.peek2() == Tok::Eq && self.toks.get(self.at + 2).map(|t| &t.0) == Some(&Tok::Question) {
            Property::Query(self.query()?)
        } else {
            Property::Check(self.or()?)
        };
        if *self.peek() != Tok::Eof {
            return self.error("end of formula");
        }
        Ok(prop)
    }

    fn query(&mut self) -> Result<PathFormula, QctlError> {
        if !self.is_ident("Q") {
            return self.error("`Q=?`");
        }
        self.bump();
        self.expect(Tok::Eq, "`=`")?;
        self.expect(Tok::Question, "`?`")?;
        self.bracketed_path()
    }

    fn bracketed_path(&mut self) -> Result<PathFormula, QctlError> {
        self.expect(Tok::LBracket, "`[`")?;
        let pf = self.path()?;
        self.expect(Tok::RBracket, "`]`")?;
        Ok(pf)
    }

    fn step_bound(&mut self) -> Result<Option<usize>, QctlError> {
        if *self.peek() != Tok::Le {
            return Ok(None);
        }
        self.bump();
        match self.bump() {
            Tok::Num(x) if x >= 0.0 && x.fract() == 0.0 => Ok(Some(x as usize)),
            _ => {
                self.at -= 1;
                self.error("a non-negative integer step bound")
            }
        }
    }

    fn path(&mut self) -> Result<PathFormula, QctlError> {
        if self.is_ident("X") {
            self.bump();
            return Ok(PathFormula::next(self.unary()?));
        }
        if self.is_ident("F") {
            self.bump();
            let bound = self.step_bound()?;
            return Ok(PathFormula::eventually(self.unary()?, bound));
        }
        let lhs = self.or()?;
        if !self.is_ident("U") {
            return self.error("`U`");
        }
        self.bump();
        let bound = self.step_bound()?;
        let rhs = self.or()?;
        Ok(PathFormula::until(lhs, rhs, bound))
    }

    fn or(&mut self) -> Result<StateFormula, QctlError> {
        let mut f = self.and()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            f = StateFormula::or(f, self.and()?);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<StateFormula, QctlError> {
        let mut f = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            f = StateFormula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<StateFormula, QctlError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(StateFormula::negate(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<StateFormula, QctlError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.or()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(name) => {
                if name == "Q" && matches!(self.peek2(), Tok::Le | Tok::Lt | Tok::Ge | Tok::Gt | Tok::Eq) {
                    self.bump();
                    let rel = match self.bump() {
                        Tok::Le => Rel::Le,
                        Tok::Lt => Rel::Lt,
                        Tok::Ge => Rel::Ge,
                        Tok::Gt => Rel::Gt,
                        _ => Rel::Eq,
                    };
                    if *self.peek() == Tok::Question {
                        return self.error("a probability bound (`Q=?` is only allowed at the top level)");
                    }
                    let bound = match self.bump() {
                        Tok::Num(x) if (0.0..=1.0).contains(&x) => x,
                        _ => {
                            self.at -= 1;
                            return self.error("a probability bound in [0, 1]");
                        }
                    };
                    let path = self.bracketed_path()?;
                    return Ok(StateFormula::Compare {
                        rel,
                        bound,
                        path: Box::new(path),
                    });
                }
                if name == "s" && *self.peek2() == Tok::Eq {
                    self.bump();
                    self.bump();
                    return match self.bump() {
                        Tok::Num(x) if x >= 0.0 && x.fract() == 0.0 => Ok(StateFormula::StateIs(x as usize)),
                        _ => {
                            self.at -= 1;
                            self.error("a state index")
                        }
                    };
                }
                self.bump();
                Ok(match name.as_str() {
                    "true" => StateFormula::True,
                    "false" => StateFormula::False,
                    "terminated" => StateFormula::Terminated,
                    _ => StateFormula::Var(name),
                })
            }
            _ => self.error("a state formula"),
        }
    }
}

/// Parses one property line.
///
/// ```text
/// qeval(Q=? [F (s = 19 & !b0 & !b1 & !b2)], r)
/// Q>=0.25 [F (terminated & !b0 & b1)]
/// Q=? [!b U<=10 terminated]
/// ```
pub fn parse_formula(text: &str) -> Result<Property, QctlError> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    p.property()
}

fn fmt_state(f: &StateFormula, out: &mut String) {
    match f {
        StateFormula::True => out.push_str("true"),
        StateFormula::False => out.push_str("false"),
        StateFormula::Terminated => out.push_str("terminated"),
        StateFormula::Var(v) => out.push_str(v),
        StateFormula::StateIs(k) => out.push_str(&format!("s = {k}")),
        StateFormula::Not(g) => {
            out.push('!');
            fmt_state_atomic(g, out);
        }
        StateFormula::And(a, b) => {
            fmt_state_atomic(a, out);
            out.push_str(" & ");
            fmt_state_atomic(b, out);
        }
        StateFormula::Compare { rel, bound, path } => {
            out.push_str(&format!("Q{rel}{bound} ["));
            fmt_path(path, out);
            out.push(']');
        }
    }
}

fn fmt_state_atomic(f: &StateFormula, out: &mut String) {
    match f {
        StateFormula::And(..) | StateFormula::StateIs(_) => {
            out.push('(');
            fmt_state(f, out);
            out.push(')');
        }
        _ => fmt_state(f, out),
    }
}

fn fmt_path(p: &PathFormula, out: &mut String) {
    match p {
        PathFormula::Next(f) => {
            out.push_str("X ");
            fmt_state_atomic(f, out);
        }
        PathFormula::Until { lhs, rhs, bound } => {
            fmt_state_atomic(lhs, out);
            out.push_str(" U");
            if let Some(k) = bound {
                out.push_str(&format!("<={k}"));
            }
            out.push(' ');
            fmt_state_atomic(rhs, out);
        }
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        fmt_state(self, &mut s);
        f.write_str(&s)
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        fmt_path(self, &mut s);
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use StateFormula as S;

    fn var(n: &str) -> S {
        S::Var(n.into())
    }

    #[test]
    fn qeval_with_state_predicate() {
        let p = parse_formula("qeval(Q=? [F (s = 19 & !b0 & !b1 & !b2)], r)").unwrap();
        let target = S::and(
            S::and(S::and(S::StateIs(19), S::negate(var("b0"))), S::negate(var("b1"))),
            S::negate(var("b2")),
        );
        assert_eq!(
            p,
            Property::Eval {
                path: PathFormula::until(S::True, target, None),
                rho: "r".into()
            }
        );
    }

    #[test]
    fn threshold_comparison() {
        let p = parse_formula("Q>=0.25[F(s=11 & !b0 & !b1)]").unwrap();
        match p {
            Property::Check(S::Compare { rel, bound, path }) => {
                assert_eq!(rel, Rel::Ge);
                assert_eq!(bound, 0.25);
                assert!(matches!(*path, PathFormula::Until { bound: None, .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trivial_and_bounded_forms() {
        assert_eq!(
            parse_formula("Q=1[F(true)]").unwrap(),
            Property::Check(S::Compare {
                rel: Rel::Eq,
                bound: 1.0,
                path: Box::new(PathFormula::eventually(S::True, None))
            })
        );
        assert_eq!(
            parse_formula("Q=? [!b U<=7 terminated]").unwrap(),
            Property::Query(PathFormula::until(S::negate(var("b")), S::Terminated, Some(7)))
        );
        assert_eq!(
            parse_formula("Q=?[X b]").unwrap(),
            Property::Query(PathFormula::next(var("b")))
        );
    }

    #[test]
    fn or_desugars() {
        assert_eq!(
            parse_formula("a | b").unwrap(),
            Property::Check(S::negate(S::and(S::negate(var("a")), S::negate(var("b")))))
        );
    }

    #[test]
    fn errors_carry_columns() {
        match parse_formula("Q>=0.5 [F b").unwrap_err() {
            QctlError::Syntax { col, .. } => assert_eq!(col, 12),
            other => panic!("{other:?}"),
        }
        assert!(parse_formula("Q>=2 [F b]").is_err());
        assert!(parse_formula("!Q=? [F b]").is_err());
    }

    #[test]
    fn display_reparses() {
        for text in [
            "Q>=0.25 [F (terminated & !b0 & b1)]",
            "!(a & Q<0.5 [X b])",
            "Q=1 [a U<=3 (s = 2)]",
        ] {
            let p = parse_formula(text).unwrap();
            let Property::Check(f) = &p else { panic!() };
            assert_eq!(parse_formula(&f.to_string()).unwrap(), p);
        }
    }
}
