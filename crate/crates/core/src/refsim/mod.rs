//! Reference simulator: explicit branch enumeration over state vectors.
//!
//! Every branch carries an unnormalized state vector whose squared norm is the
//! branch probability. Step counts line up with the chain built by
//! [`crate::semantics`]: a reset with outcome 1 takes two steps (projection,
//! then the X correction), an `if` takes one, and a loop-back takes one.
//! Branches at the same step with the same continuation, assignment and loop
//! count are merged when their vectors agree up to a global phase.

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::frontend::{Instr, Program, VarId};
use crate::linalg::{hermitian_eigen, CMatrix, DensityMatrix};

/// Branches lighter than this are dropped and counted in [`Outcome::pruned_mass`].
pub const PRUNE_WEIGHT: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Body passes allowed per branch; a branch that would start pass
    /// `max_loops + 1` is counted as unfinished.
    pub max_loops: usize,
    pub max_steps: Option<usize>,
    /// Live branches allowed at any step.
    pub max_branches: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_loops: 30,
            max_steps: None,
            max_branches: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefsimError {
    #[error("more than {limit} live branches")]
    BranchExplosion { limit: usize },
    #[error("initial state has dimension {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
}

/// A branch that reached the end of the program.
#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    /// Bit `i` is variable `i`.
    pub env: u64,
    pub steps: usize,
    pub loops: usize,
    /// Unnormalized; its squared norm is the branch probability.
    pub state: Vec<Complex64>,
}

impl Terminal {
    pub fn weight(&self) -> f64 {
        norm_sqr(&self.state)
    }

    pub fn normalized_state(&self) -> Vec<Complex64> {
        let n = self.weight().sqrt();
        self.state.iter().map(|a| a / n).collect()
    }

    pub fn get(&self, v: VarId) -> bool {
        self.env >> v.0 & 1 == 1
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub dim: usize,
    /// Sorted by step count.
    pub terminals: Vec<Terminal>,
    /// Mass of branches stopped by the step or loop limit.
    pub unfinished_mass: f64,
    pub pruned_mass: f64,
}

impl Outcome {
    pub fn termination_prob(&self) -> f64 {
        self.terminals.iter().map(Terminal::weight).sum()
    }

    /// Probability of having terminated after at most `steps` steps.
    pub fn prob_within(&self, steps: usize) -> f64 {
        self.terminals
            .iter()
            .filter(|t| t.steps <= steps)
            .map(Terminal::weight)
            .sum()
    }

    /// Unnormalized output state of the terminals accepted by `keep`.
    pub fn branch_density(&self, keep: impl Fn(&Terminal) -> bool) -> CMatrix {
        let mut rho = CMatrix::zeros(self.dim, self.dim);
        for t in self.terminals.iter().filter(|t| keep(t)) {
            for (i, a) in t.state.iter().enumerate() {
                for (j, b) in t.state.iter().enumerate() {
                    rho[(i, j)] += a * b.conj();
                }
            }
        }
        rho
    }

    pub fn output_density(&self) -> CMatrix {
        self.branch_density(|_| true)
    }
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(Complex64::norm_sqr).sum()
}

/// Applies a `2^k`-dimensional gate to `targets`, qubit 0 being the most
/// significant bit of the basis index and `targets[0]` the gate's first qubit.
fn apply_gate(psi: &mut [Complex64], n: usize, u: &CMatrix, targets: &[usize]) {
    let k = targets.len();
    let bits: Vec<usize> = targets.iter().map(|&t| 1 << (n - 1 - t)).collect();
    let mask: usize = bits.iter().sum();
    let offsets: Vec<usize> = (0..1usize << k)
        .map(|local| {
            (0..k)
                .filter(|&p| local >> (k - 1 - p) & 1 == 1)
                .map(|p| bits[p])
                .sum()
        })
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); offsets.len()];
    for base in (0..psi.len()).filter(|b| b & mask == 0) {
        for (r, slot) in buf.iter_mut().enumerate() {
            *slot = (0..offsets.len()).map(|c| u[(r, c)] * psi[base + offsets[c]]).sum();
        }
        for (r, &off) in offsets.iter().enumerate() {
            psi[base + off] = buf[r];
        }
    }
}

/// Zeroes the amplitudes where qubit `q` differs from `outcome`.
fn project(psi: &mut [Complex64], n: usize, q: usize, outcome: bool) {
    let bit = 1 << (n - 1 - q);
    for (i, a) in psi.iter_mut().enumerate() {
        if (i & bit != 0) != outcome {
            *a = Complex64::new(0.0, 0.0);
        }
    }
}

#[derive(Debug, Clone)]
struct Branch {
    cont: Vec<Instr>,
    env: u64,
    loops: usize,
    psi: Vec<Complex64>,
}

type Key = (Vec<Instr>, u64, usize);

/// Folds `b` into an existing bucket entry when the two vectors are parallel.
fn merge_into(bucket: &mut Vec<Vec<Complex64>>, psi: Vec<Complex64>) {
    let w = norm_sqr(&psi);
    for have in bucket.iter_mut() {
        let h = norm_sqr(have);
        let overlap: Complex64 = have.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum();
        if (overlap.norm_sqr() - h * w).abs() <= 1e-12 * h * w {
            let scale = ((h + w) / h).sqrt();
            have.iter_mut().for_each(|a| *a *= scale);
            return;
        }
    }
    bucket.push(psi);
}

struct Sim<'a> {
    program: &'a Program,
    n: usize,
    limits: Limits,
}

impl Sim<'_> {
    /// Advances one branch by one step.
    fn step(&self, b: Branch, out: &mut Vec<Branch>) -> Result<(), RefsimError> {
        let Some((head, rest)) = b.cont.split_first() else {
            unreachable!("terminal branches are removed before stepping")
        };
        let with = |cont: Vec<Instr>, env: u64, psi: Vec<Complex64>| Branch {
            cont,
            env,
            loops: b.loops,
            psi,
        };
        match head {
            Instr::Reset(q) => {
                let mut zero = b.psi.clone();
                let mut one = b.psi.clone();
                project(&mut zero, self.n, q.0, false);
                project(&mut one, self.n, q.0, true);
                let mut fixed = vec![Instr::Gate {
                    gate: "X".into(),
                    targets: vec![*q],
                }];
                fixed.extend_from_slice(rest);
                out.push(with(rest.to_vec(), b.env, zero));
                out.push(with(fixed, b.env, one));
            }
            Instr::Gate { gate, targets } => {
                let def = self
                    .program
                    .gates
                    .get(gate)
                    .ok_or_else(|| RefsimError::UnknownGate(gate.clone()))?;
                let mut psi = b.psi.clone();
                let t: Vec<usize> = targets.iter().map(|q| q.0).collect();
                apply_gate(&mut psi, self.n, &def.matrix, &t);
                out.push(with(rest.to_vec(), b.env, psi));
            }
            Instr::Measure { out: v, target } => {
                for outcome in [false, true] {
                    let mut psi = b.psi.clone();
                    project(&mut psi, self.n, target.0, outcome);
                    let env = (b.env & !(1 << v.0)) | (u64::from(outcome) << v.0);
                    out.push(with(rest.to_vec(), env, psi));
                }
            }
            Instr::DynamicLift { out: v, input } => {
                let bit = b.env >> input.0 & 1;
                let env = (b.env & !(1 << v.0)) | (bit << v.0);
                out.push(with(rest.to_vec(), env, b.psi.clone()));
            }
            Instr::IfElse {
                guard,
                then_body,
                else_body,
            } => {
                let chosen = if b.env >> guard.0 & 1 == 1 { then_body } else { else_body };
                let mut cont = chosen.clone();
                cont.extend_from_slice(rest);
                out.push(with(cont, b.env, b.psi.clone()));
            }
        }
        Ok(())
    }

    fn run(&self, init: Vec<Vec<Complex64>>) -> Result<Outcome, RefsimError> {
        let mut outcome = Outcome {
            dim: 1 << self.n,
            terminals: Vec::new(),
            unfinished_mass: 0.0,
            pruned_mass: 0.0,
        };
        let mut live: Vec<Branch> = init
            .into_iter()
            .map(|psi| Branch {
                cont: self.program.body.clone(),
                env: 0,
                loops: 0,
                psi,
            })
            .collect();
        let mut t = 0usize;
        while !live.is_empty() {
            // Retire branches with an empty continuation.
            let mut active = Vec::with_capacity(live.len());
            for b in live {
                if !b.cont.is_empty() {
                    active.push(b);
                    continue;
                }
                match self.program.exit_guard {
                    Some(g) if b.env >> g.0 & 1 == 0 => {
                        if b.loops + 1 >= self.limits.max_loops {
                            outcome.unfinished_mass += norm_sqr(&b.psi);
                        } else {
                            // The loop-back edge itself is the next step.
                            active.push(Branch {
                                cont: Vec::new(),
                                env: 0,
                                loops: b.loops + 1,
                                psi: b.psi,
                            });
                        }
                    }
                    _ => outcome.terminals.push(Terminal {
                        env: b.env,
                        steps: t,
                        loops: b.loops,
                        state: b.psi,
                    }),
                }
            }
            if active.is_empty() {
                break;
            }
            if self.limits.max_steps.is_some_and(|m| t >= m) {
                outcome.unfinished_mass += active.iter().map(|b| norm_sqr(&b.psi)).sum::<f64>();
                break;
            }
            let mut next = Vec::with_capacity(active.len() * 2);
            for b in active {
                if b.cont.is_empty() {
                    next.push(Branch {
                        cont: self.program.body.clone(),
                        ..b
                    });
                } else {
                    self.step(b, &mut next)?;
                }
            }
            t += 1;

            let mut order: Vec<Key> = Vec::new();
            let mut buckets: HashMap<Key, Vec<Vec<Complex64>>> = HashMap::new();
            for b in next {
                let w = norm_sqr(&b.psi);
                if w <= PRUNE_WEIGHT {
                    outcome.pruned_mass += w;
                    continue;
                }
                let key = (b.cont, b.env, b.loops);
                let bucket = buckets.entry(key.clone()).or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                });
                merge_into(bucket, b.psi);
            }
            live = Vec::new();
            for key in order {
                for psi in buckets.remove(&key).unwrap_or_default() {
                    live.push(Branch {
                        cont: key.0.clone(),
                        env: key.1,
                        loops: key.2,
                        psi,
                    });
                }
            }
            if live.len() > self.limits.max_branches {
                return Err(RefsimError::BranchExplosion {
                    limit: self.limits.max_branches,
                });
            }
        }
        Ok(outcome)
    }
}

/// Runs `program` on the ensemble `init` of `(probability, state vector)` pairs.
pub fn simulate(
    program: &Program,
    init: &[(f64, Vec<Complex64>)],
    limits: Limits,
) -> Result<Outcome, RefsimError> {
    let n = program.num_qubits();
    let dim = 1usize << n;
    let mut vecs = Vec::new();
    for (p, psi) in init {
        if psi.len() != dim {
            return Err(RefsimError::Dimension {
                expected: dim,
                found: psi.len(),
            });
        }
        let norm = norm_sqr(psi).sqrt();
        if *p > 0.0 && norm > 0.0 {
            let s = p.sqrt() / norm;
            vecs.push(psi.iter().map(|a| a * s).collect());
        }
    }
    Sim { program, n, limits }.run(vecs)
}

/// Runs `program` on the computational basis state `|index>`.
pub fn simulate_basis(program: &Program, index: usize, limits: Limits) -> Result<Outcome, RefsimError> {
    let dim = 1usize << program.num_qubits();
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    if index >= dim {
        return Err(RefsimError::Dimension {
            expected: dim,
            found: index + 1,
        });
    }
    psi[index] = Complex64::new(1.0, 0.0);
    simulate(program, &[(1.0, psi)], limits)
}

/// Runs `program` on a density matrix, split into its eigen-ensemble.
pub fn simulate_density(program: &Program, rho: &DensityMatrix, limits: Limits) -> Result<Outcome, RefsimError> {
    let ensemble: Vec<(f64, Vec<Complex64>)> = hermitian_eigen(rho.mat())
        .into_iter()
        .filter(|(p, _)| *p > 1e-15)
        .collect();
    if rho.dim() != 1 << program.num_qubits() {
        return Err(RefsimError::Dimension {
            expected: 1 << program.num_qubits(),
            found: rho.dim(),
        });
    }
    simulate(program, &ensemble, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_program;
    use crate::linalg::{embed_gate, gates};

    fn program(src: &str) -> Program {
        load_program(src).unwrap().into_program()
    }

    #[test]
    fn gate_application_matches_embedding() {
        let n = 3;
        let psi: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        for (u, t) in [
            (gates::cnot(), vec![2, 0]),
            (gates::hadamard(), vec![1]),
            (gates::toffoli(), vec![1, 2, 0]),
            (gates::swap(), vec![0, 2]),
        ] {
            let mut a = psi.clone();
            apply_gate(&mut a, n, &u, &t);
            let b = embed_gate(&u, &t, n).unwrap().mul_vec(&psi).unwrap();
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-12));
        }
    }

    #[test]
    fn reset_takes_one_or_two_steps() {
        let p = program("qubits q body { H_at q; reset_at q }");
        let out = simulate_basis(&p, 0, Limits::default()).unwrap();
        let steps: Vec<usize> = out.terminals.iter().map(|t| t.steps).collect();
        assert_eq!(steps, [2, 3]);
        assert!((out.prob_within(2) - 0.5).abs() < 1e-12);
        let rho = out.output_density();
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coin_flip_is_geometric() {
        let p = program("qubits q body { reset_at q; H_at q; m <- measure q; b <- dynamic_lift m } exitOn b");
        let out = simulate_basis(&p, 0, Limits { max_loops: 20, ..Limits::default() }).unwrap();
        for k in 1..=20 {
            let want = 1.0 - 0.5f64.powi(k);
            assert!((out.prob_within(5 * k as usize - 1) - want).abs() < 1e-12);
        }
        assert!((out.termination_prob() + out.unfinished_mass - 1.0).abs() < 1e-12);
        assert!(out.terminals.iter().all(|t| t.get(VarId(1))));
    }

    #[test]
    fn merging_keeps_mass() {
        let p = program("qubits a, b body { H_at a; x <- measure a; reset_at a; H_at b }");
        let out = simulate_density(&p, &DensityMatrix::maximally_mixed(2), Limits::default()).unwrap();
        assert!((out.termination_prob() - 1.0).abs() < 1e-12);
        let rho = out.output_density();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let x1 = out.branch_density(|t| t.get(VarId(0)));
        assert!((x1.trace().re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn limits_are_reported() {
        let p = program("qubits q body { reset_at q; m <- measure q; b <- dynamic_lift m } exitOn b");
        let out = simulate_basis(&p, 1, Limits { max_loops: 3, ..Limits::default() }).unwrap();
        assert!(out.terminals.is_empty());
        assert!((out.unfinished_mass - 1.0).abs() < 1e-12);
        let coin = program("qubits q body { reset_at q; H_at q; m <- measure q; b <- dynamic_lift m } exitOn b");
        let out = simulate_basis(&coin, 0, Limits { max_loops: 10, ..Limits::default() }).unwrap();
        assert!((out.termination_prob() - (1.0 - 0.5f64.powi(10))).abs() < 1e-12);
        assert!((out.unfinished_mass - 0.5f64.powi(10)).abs() < 1e-12);
        let out = simulate_basis(&p, 1, Limits { max_steps: Some(2), ..Limits::default() }).unwrap();
        assert!((out.unfinished_mass - 1.0).abs() < 1e-12);
        let wide = program("qubits a, b, c body { H_at a; H_at b; H_at c; x <- measure a; y <- measure b; z <- measure c }");
        let err = simulate_basis(&wide, 0, Limits { max_branches: 4, ..Limits::default() }).unwrap_err();
        assert_eq!(err, RefsimError::BranchExplosion { limit: 4 });
    }
}
