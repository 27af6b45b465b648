use std::collections::{HashMap, VecDeque};

use crate::frontend::{CheckedProgram, Instr, Program};

use super::chain::{ChainState, Edge, EdgeKind, Env, Op, OpLabel, Qmc};
use super::SemanticsError;

/// Default bound on the number of chain states.
pub const DEFAULT_STATE_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainOptions {
    pub state_cap: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

/// One transition licensed by the operational rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepEdge {
    pub label: OpLabel,
    pub next: ChainState,
}

fn then(prefix: &[Instr], rest: &[Instr]) -> Vec<Instr> {
    let mut v = Vec::with_capacity(prefix.len() + rest.len());
    v.extend_from_slice(prefix);
    v.extend_from_slice(rest);
    v
}

/// Outgoing transitions of `s`. The measurement-0 branch comes first, and the
/// empty body gets its identity self-loop.
pub fn step(s: &ChainState) -> Vec<StepEdge> {
    let (head, rest) = match s.residual.split_first() {
        None => {
            return vec![StepEdge {
                label: OpLabel::Identity,
                next: s.clone(),
            }]
        }
        Some(split) => split,
    };
    let env = s.env;
    let go = |label, residual: Vec<Instr>, env| StepEdge {
        label,
        next: ChainState { residual, env },
    };
    match head {
        Instr::Reset(q) => {
            let fix = Instr::Gate {
                gate: "X".to_string(),
                targets: vec![*q],
            };
            vec![
                go(OpLabel::Measure { qubit: *q, outcome: 0 }, rest.to_vec(), env),
                go(OpLabel::Measure { qubit: *q, outcome: 1 }, then(&[fix], rest), env),
            ]
        }
        Instr::Gate { gate, targets } => vec![go(
            OpLabel::Gate {
                gate: gate.clone(),
                targets: targets.clone(),
            },
            rest.to_vec(),
            env,
        )],
        Instr::Measure { out, target } => (0..2u8)
            .map(|i| {
                go(
                    OpLabel::Measure {
                        qubit: *target,
                        outcome: i,
                    },
                    rest.to_vec(),
                    env.with(*out, i == 1),
                )
            })
            .collect(),
        Instr::DynamicLift { out, input } => {
            vec![go(OpLabel::Identity, rest.to_vec(), env.with(*out, env.get(*input)))]
        }
        Instr::IfElse {
            guard,
            then_body,
            else_body,
        } => {
            let branch = if env.get(*guard) { then_body } else { else_body };
            vec![go(OpLabel::Identity, then(branch, rest), env)]
        }
    }
}

/// Upper bound on the number of distinct residuals reachable from `body`,
/// counting the empty one.
pub fn residual_bound(body: &[Instr]) -> usize {
    fn pending(body: &[Instr]) -> usize {
        body.iter()
            .map(|i| match i {
                Instr::Reset(_) => 2,
                Instr::IfElse {
                    then_body,
                    else_body,
                    ..
                } => 1 + pending(then_body) + pending(else_body),
                _ => 1,
            })
            .sum()
    }
    pending(body) + 1
}

struct Builder<'a> {
    program: &'a Program,
    cap: usize,
    index: HashMap<ChainState, usize>,
    states: Vec<ChainState>,
    out: Vec<Vec<Edge>>,
    ops: Vec<Op>,
    op_index: HashMap<OpLabel, usize>,
    queue: VecDeque<usize>,
}

impl Builder<'_> {
    fn intern(&mut self, s: ChainState) -> Result<usize, SemanticsError> {
        if let Some(&i) = self.index.get(&s) {
            return Ok(i);
        }
        if self.states.len() == self.cap {
            return Err(SemanticsError::StateExplosion { cap: self.cap });
        }
        let i = self.states.len();
        self.index.insert(s.clone(), i);
        self.states.push(s);
        self.out.push(Vec::new());
        self.queue.push_back(i);
        Ok(i)
    }

    fn op(&mut self, label: OpLabel) -> Result<usize, SemanticsError> {
        if let Some(&i) = self.op_index.get(&label) {
            return Ok(i);
        }
        let superop = label.superop(&self.program.gates, self.program.num_qubits())?;
        let i = self.ops.len();
        self.op_index.insert(label.clone(), i);
        self.ops.push(Op { label, superop });
        Ok(i)
    }

    fn run(mut self, exit_rules: bool) -> Result<Qmc, SemanticsError> {
        let guard = if exit_rules { self.program.exit_guard } else { None };
        let start = self.intern(ChainState {
            residual: self.program.body.clone(),
            env: Env::ZERO,
        })?;
        while let Some(s) = self.queue.pop_front() {
            let state = self.states[s].clone();
            let mut edges = Vec::new();
            match guard {
                Some(g) if state.is_empty_body() => {
                    let id = self.op(OpLabel::Identity)?;
                    let (target, kind) = if state.env.get(g) {
                        (s, EdgeKind::SelfLoop)
                    } else {
                        (start, EdgeKind::LoopBack)
                    };
                    edges.push(Edge { target, op: id, kind });
                }
                _ => {
                    for e in step(&state) {
                        let op = self.op(e.label)?;
                        let target = self.intern(e.next)?;
                        let kind = if target == s { EdgeKind::SelfLoop } else { EdgeKind::Step };
                        if edges.iter().any(|x: &Edge| x.target == target) {
                            return Err(SemanticsError::Internal(format!("parallel edges {s} -> {target}")));
                        }
                        edges.push(Edge { target, op, kind });
                    }
                }
            }
            self.out[s] = edges;
        }

        let vars = self.program.vars.len();
        let bound = residual_bound(&self.program.body).saturating_mul(1usize.checked_shl(vars as u32).unwrap_or(usize::MAX));
        assert!(
            self.states.len() <= bound,
            "{} states exceed the residual-by-assignment bound {bound}",
            self.states.len()
        );

        Ok(Qmc {
            qubits: self.program.qubits.clone(),
            vars: self.program.vars.clone(),
            states: self.states,
            out: self.out,
            ops: self.ops,
        })
    }
}

fn builder(program: &Program, opts: ChainOptions) -> Builder<'_> {
    Builder {
        program,
        cap: opts.state_cap,
        index: HashMap::new(),
        states: Vec::new(),
        out: Vec::new(),
        ops: Vec::new(),
        op_index: HashMap::new(),
        queue: VecDeque::new(),
    }
}

/// The quantum chain of the body started in `(body, O)`, with identity
/// self-loops on every empty-body state.
pub fn build_body_chain(p: &CheckedProgram) -> Result<Qmc, SemanticsError> {
    build_body_chain_with(p, ChainOptions::default())
}

pub fn build_body_chain_with(p: &CheckedProgram, opts: ChainOptions) -> Result<Qmc, SemanticsError> {
    builder(p.program(), opts).run(false)
}

/// The chain of the whole program: a finished pass loops on itself when the
/// exit guard is 1 and returns to `(body, O)` when it is 0. Without an exit
/// guard this is the body chain.
pub fn build_program_chain(p: &CheckedProgram) -> Result<Qmc, SemanticsError> {
    build_program_chain_with(p, ChainOptions::default())
}

pub fn build_program_chain_with(p: &CheckedProgram, opts: ChainOptions) -> Result<Qmc, SemanticsError> {
    builder(p.program(), opts).run(true)
}
