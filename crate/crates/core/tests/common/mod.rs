//! Shared helpers for the integration tests: corpus paths and a seeded
//! random program generator.
#![allow(dead_code)]

use std::path::PathBuf;

use num_complex::Complex64;
use quipmc::frontend::{Instr, Program};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CORPUS: [&str; 11] = [
    "reset",
    "hmeasure",
    "doublemeasure",
    "ifelse",
    "exiton",
    "toy",
    "coinflip",
    "dj_const",
    "dj_bal",
    "teleport",
    "switch",
];

pub fn corpus_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(file)
}

pub fn corpus_source(name: &str) -> String {
    std::fs::read_to_string(corpus_path(&format!("{name}.qpe"))).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generated instruction tree, kept apart from the crate's AST so tests can
/// reason about it without going through the frontend.
#[derive(Debug, Clone)]
pub enum Gen {
    Reset(usize),
    Gate(&'static str, Vec<usize>),
    Measure(usize, usize),
    Lift(usize, usize),
    If(usize, Vec<Gen>, Vec<Gen>),
}

#[derive(Debug, Clone)]
pub struct GenProgram {
    pub qubits: usize,
    pub body: Vec<Gen>,
    pub exit: Option<usize>,
}

const ONE_QUBIT: [&str; 7] = ["X", "Y", "Z", "H", "S", "T", "hadamard"];
const TWO_QUBIT: [&str; 3] = ["CNOT", "CZ", "SWAP"];
pub const MAX_INSTRS: usize = 10;
const BITS: usize = 3;
const BOOLS: usize = 2;

fn size(body: &[Gen]) -> usize {
    body.iter()
        .map(|g| match g {
            Gen::If(_, t, e) => 1 + size(t) + size(e),
            _ => 1,
        })
        .sum()
}

struct Builder<'a, R: Rng> {
    rng: &'a mut R,
    qubits: usize,
    /// Guards may be any boolean, defined or not.
    sloppy: bool,
    /// Bits written anywhere so far, so lifts always read a declared bit.
    bits_seen: u8,
}

impl<R: Rng> Builder<'_, R> {
    fn distinct(&mut self, k: usize) -> Vec<usize> {
        let mut all: Vec<usize> = (0..self.qubits).collect();
        for i in 0..k {
            let j = self.rng.random_range(i..all.len());
            all.swap(i, j);
        }
        all.truncate(k);
        all
    }

    /// Fills up to `budget` instructions; `defined` is the set of booleans
    /// written on every path so far. Returns the body and the updated set.
    fn body(&mut self, budget: usize, mut defined: u8, depth: usize) -> (Vec<Gen>, u8) {
        let mut out = Vec::new();
        let len = self.rng.random_range(0..=budget);
        while size(&out) < len {
            let left = len - size(&out);
            let roll = self.rng.random_range(0..100);
            let g = if roll < 35 {
                let arity = match self.qubits {
                    1 => 1,
                    2 => self.rng.random_range(1..=2),
                    _ => self.rng.random_range(1..=3),
                };
                let t = self.distinct(arity);
                match arity {
                    1 => Gen::Gate(ONE_QUBIT[self.rng.random_range(0..ONE_QUBIT.len())], t),
                    2 => Gen::Gate(TWO_QUBIT[self.rng.random_range(0..TWO_QUBIT.len())], t),
                    _ => Gen::Gate("toffoli", t),
                }
            } else if roll < 45 {
                Gen::Reset(self.rng.random_range(0..self.qubits))
            } else if roll < 65 {
                let bit = self.rng.random_range(0..BITS);
                self.bits_seen |= 1 << bit;
                Gen::Measure(bit, self.rng.random_range(0..self.qubits))
            } else if roll < 82 && self.bits_seen != 0 {
                let seen: Vec<usize> = (0..BITS).filter(|b| self.bits_seen >> b & 1 == 1).collect();
                let bit = seen[self.rng.random_range(0..seen.len())];
                let b = self.rng.random_range(0..BOOLS);
                defined |= 1 << b;
                Gen::Lift(b, bit)
            } else if left >= 1 && depth < 3 {
                let candidates: Vec<usize> = (0..BOOLS)
                    .filter(|b| self.sloppy || defined >> b & 1 == 1)
                    .collect();
                if candidates.is_empty() {
                    continue;
                }
                let guard = candidates[self.rng.random_range(0..candidates.len())];
                let inner = left - 1;
                let split = self.rng.random_range(0..=inner);
                let (t, dt) = self.body(split, defined, depth + 1);
                let (e, de) = self.body(inner - split, defined, depth + 1);
                defined = dt & de;
                Gen::If(guard, t, e)
            } else {
                continue;
            };
            out.push(g);
        }
        (out, defined)
    }
}

/// A random program with at most three qubits, ten instructions (counting
/// nested ones) and two booleans. Unless `sloppy`, it passes validation.
/// Recursive programs reset every qubit first.
pub fn random_gen<R: Rng>(rng: &mut R, recursive: bool, sloppy: bool) -> GenProgram {
    let qubits = rng.random_range(1..=3);
    let mut b = Builder {
        rng,
        qubits,
        sloppy,
        bits_seen: 0,
    };
    let mut body: Vec<Gen> = Vec::new();
    let mut defined = 0u8;
    if recursive {
        body.extend((0..qubits).map(Gen::Reset));
        let (mid, d) = b.body(MAX_INSTRS - qubits - 2, 0, 0);
        body.extend(mid);
        defined = d;
        let q = b.rng.random_range(0..qubits);
        let guard = b.rng.random_range(0..BOOLS);
        body.push(Gen::Measure(0, q));
        body.push(Gen::Lift(guard, 0));
        defined |= 1 << guard;
        let choices: Vec<usize> = (0..BOOLS)
            .filter(|x| sloppy || defined >> x & 1 == 1)
            .collect();
        let exit = choices[b.rng.random_range(0..choices.len())];
        return GenProgram {
            qubits,
            body,
            exit: Some(exit),
        };
    }
    while body.is_empty() {
        let (bd, d) = b.body(MAX_INSTRS, 0, 0);
        body = bd;
        defined = d;
    }
    let _ = defined;
    GenProgram {
        qubits,
        body,
        exit: None,
    }
}

pub fn random_program<R: Rng>(rng: &mut R) -> GenProgram {
    let recursive = rng.random_bool(0.4);
    random_gen(rng, recursive, false)
}

fn render_body(body: &[Gen], indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    for g in body {
        match g {
            Gen::Reset(q) => out.push_str(&format!("{pad}reset_at q{q}\n")),
            Gen::Gate(name, t) if t.len() == 1 => out.push_str(&format!("{pad}{name}_at q{}\n", t[0])),
            Gen::Gate(name, t) => {
                let t: Vec<String> = t.iter().map(|q| format!("q{q}")).collect();
                out.push_str(&format!("{pad}{name}_at [{}]\n", t.join(", ")));
            }
            Gen::Measure(m, q) => out.push_str(&format!("{pad}m{m} <- measure q{q}\n")),
            Gen::Lift(b, m) => out.push_str(&format!("{pad}b{b} <- dynamic_lift m{m}\n")),
            Gen::If(b, t, e) => {
                out.push_str(&format!("{pad}if b{b} {{\n"));
                render_body(t, indent + 1, out);
                out.push_str(&format!("{pad}}} else {{\n"));
                render_body(e, indent + 1, out);
                out.push_str(&format!("{pad}}}\n"));
            }
        }
    }
}

impl GenProgram {
    pub fn source(&self) -> String {
        let qs: Vec<String> = (0..self.qubits).map(|q| format!("q{q}")).collect();
        let mut out = format!("qubits {}\nbody {{\n", qs.join(", "));
        render_body(&self.body, 1, &mut out);
        out.push_str("}\n");
        if let Some(b) = self.exit {
            out.push_str(&format!("exitOn b{b}\n"));
        }
        out
    }

    pub fn size(&self) -> usize {
        size(&self.body)
    }

    /// Whether every guard read is preceded by a write on every path,
    /// decided by enumerating the paths explicitly.
    pub fn guards_defined_on_all_paths(&self) -> bool {
        fn paths(body: &[Gen], defined: u8, rest: &mut Vec<(u8, bool)>) {
            // Each entry: set defined at the end of the path, whether all reads were fine.
            let mut states = vec![(defined, true)];
            for g in body {
                let mut next = Vec::new();
                for (d, ok) in states {
                    match g {
                        Gen::Lift(b, _) => next.push((d | 1 << b, ok)),
                        Gen::If(b, t, e) => {
                            let read_ok = ok && d >> b & 1 == 1;
                            for branch in [t, e] {
                                let mut sub = Vec::new();
                                paths(branch, d, &mut sub);
                                next.extend(sub.into_iter().map(|(d2, ok2)| (d2, read_ok && ok2)));
                            }
                        }
                        _ => next.push((d, ok)),
                    }
                }
                states = next;
            }
            rest.extend(states);
        }
        let mut ends = Vec::new();
        paths(&self.body, 0, &mut ends);
        ends.iter().all(|&(d, ok)| ok && self.exit.is_none_or(|b| d >> b & 1 == 1))
    }
}

/// A normalized random pure state on `n` qubits.
pub fn random_pure<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Fewest and most chain steps one pass through `body` can take.
pub fn pass_lengths(body: &[Instr]) -> (usize, usize) {
    body.iter().fold((0, 0), |(lo, hi), i| {
        let (a, b) = match i {
            Instr::Reset(_) => (1, 2),
            Instr::IfElse {
                then_body,
                else_body,
                ..
            } => {
                let (t0, t1) = pass_lengths(then_body);
                let (e0, e1) = pass_lengths(else_body);
                (1 + t0.min(e0), 1 + t1.max(e1))
            }
            _ => (1, 1),
        };
        (lo + a, hi + b)
    })
}

/// Step horizon for comparing `F<=h terminated` against the simulator, with
/// the simulator limits that make the two cover exactly the same runs.
///
/// A run that ends during pass `k` takes at least `k * dmin + (k - 1)` steps,
/// so with `h = 21 * dmin + 19` every run ending by `h` uses at most
/// `passes` = 20 passes.
pub fn oracle_horizon(p: &Program, passes: usize) -> (usize, quipmc::refsim::Limits) {
    let (dmin, dmax) = pass_lengths(&p.body);
    let limits = quipmc::refsim::Limits::default();
    match p.exit_guard {
        None => (dmax + 1, limits),
        Some(_) => {
            let h = (passes + 1) * dmin + passes - 1;
            (
                h,
                quipmc::refsim::Limits {
                    max_loops: passes,
                    max_steps: Some(h),
                    ..limits
                },
            )
        }
    }
}
