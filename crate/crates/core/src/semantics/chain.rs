use std::fmt;

use crate::frontend::{Body, GateTable, Instr, QubitId, VarDecl, VarId};
use crate::linalg::{embed_gate, LinalgError, Superoperator};

use super::SemanticsError;

/// Total assignment of the program's bits and booleans, one bit per variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Env(pub u64);

impl Env {
    /// The all-zero assignment.
    pub const ZERO: Env = Env(0);

    pub fn get(self, v: VarId) -> bool {
        self.0 >> v.0 & 1 == 1
    }

    pub fn with(self, v: VarId, value: bool) -> Env {
        if value {
            Env(self.0 | 1 << v.0)
        } else {
            Env(self.0 & !(1 << v.0))
        }
    }

    /// Variables set to 1, ascending.
    pub fn ones(self) -> impl Iterator<Item = VarId> {
        (0..64).filter(move |i| self.0 >> i & 1 == 1).map(VarId)
    }
}

/// A chain state: what is left of the body, and the current assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainState {
    pub residual: Body,
    pub env: Env,
}

impl ChainState {
    pub fn is_empty_body(&self) -> bool {
        self.residual.is_empty()
    }
}

/// What an edge superoperator stands for.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OpLabel {
    Identity,
    Gate { gate: String, targets: Vec<QubitId> },
    Measure { qubit: QubitId, outcome: u8 },
    Custom(String),
}

impl OpLabel {
    /// The superoperator over an `n`-qubit register.
    pub fn superop(&self, gates: &GateTable, n: usize) -> Result<Superoperator, SemanticsError> {
        let dim = 1usize << n;
        Ok(match self {
            OpLabel::Identity => Superoperator::identity(dim),
            OpLabel::Gate { gate, targets } => {
                let def = gates
                    .get(gate)
                    .ok_or_else(|| SemanticsError::Internal(format!("gate {gate} missing from table")))?;
                let idx: Vec<usize> = targets.iter().map(|q| q.0).collect();
                Superoperator::unitary(&embed_gate(&def.matrix, &idx, n)?)?
            }
            OpLabel::Measure { qubit, outcome } => {
                let (m0, m1) = Superoperator::measurement(qubit.0, n)?;
                if *outcome == 0 {
                    m0
                } else {
                    m1
                }
            }
            OpLabel::Custom(name) => {
                return Err(SemanticsError::Internal(format!("custom operator {name} has no definition")))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// A Table 1 transition between distinct states.
    Step,
    /// The identity self-loop of an absorbing empty-body state.
    SelfLoop,
    /// The identity edge from a finished pass back to the start.
    LoopBack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub target: usize,
    pub op: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Op {
    pub label: OpLabel,
    pub superop: Superoperator,
}

/// A finite quantum Markov chain: numbered states, superoperator-weighted
/// edges and the assignment each state carries. State 0 is the start.
#[derive(Debug, Clone)]
pub struct Qmc {
    pub(crate) qubits: Vec<String>,
    pub(crate) vars: Vec<VarDecl>,
    pub(crate) states: Vec<ChainState>,
    pub(crate) out: Vec<Vec<Edge>>,
    pub(crate) ops: Vec<Op>,
}

impl Qmc {
    /// Assembles a chain from explicit transitions `(from, to, name, map)`.
    /// Each transition gets its own operator; mostly useful for tests.
    pub fn from_transitions(
        qubits: Vec<String>,
        vars: Vec<VarDecl>,
        states: Vec<ChainState>,
        transitions: Vec<(usize, usize, String, Superoperator)>,
    ) -> Result<Qmc, SemanticsError> {
        let dim = 1usize << qubits.len();
        let mut out = vec![Vec::new(); states.len()];
        let mut ops = Vec::new();
        for (from, to, name, superop) in transitions {
            if from >= states.len() || to >= states.len() {
                return Err(SemanticsError::Internal(format!("edge {from} -> {to} out of range")));
            }
            if superop.dim() != dim {
                return Err(LinalgError::DimensionMismatch {
                    op: "chain edge",
                    left: (dim, dim),
                    right: (superop.dim(), superop.dim()),
                }
                .into());
            }
            let kind = if from == to { EdgeKind::SelfLoop } else { EdgeKind::Step };
            out[from].push(Edge {
                target: to,
                op: ops.len(),
                kind,
            });
            ops.push(Op {
                label: OpLabel::Custom(name),
                superop,
            });
        }
        Ok(Qmc {
            qubits,
            vars,
            states,
            out,
            ops,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn qubit_names(&self) -> &[String] {
        &self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits.len()
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn state(&self, s: usize) -> &ChainState {
        &self.states[s]
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn edges(&self, s: usize) -> &[Edge] {
        &self.out[s]
    }

    pub fn num_edges(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn op(&self, id: usize) -> &Op {
        &self.ops[id]
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn superop(&self, e: &Edge) -> &Superoperator {
        &self.ops[e.op].superop
    }

    /// All edges as `(from, edge)` in state order.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, &Edge)> {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(s, es)| es.iter().map(move |e| (s, e)))
    }

    /// Atomic propositions holding in `s`: the variables set to 1.
    pub fn labels(&self, s: usize) -> Vec<VarId> {
        self.states[s].env.ones().filter(|v| v.0 < self.vars.len()).collect()
    }

    pub fn holds(&self, s: usize, v: VarId) -> bool {
        self.states[s].env.get(v)
    }

    /// Empty-body states whose only way out is their own identity loop.
    pub fn is_terminated(&self, s: usize) -> bool {
        self.states[s].is_empty_body()
            && !self.out[s].is_empty()
            && self.out[s].iter().all(|e| e.kind == EdgeKind::SelfLoop)
    }

    /// Sum of the outgoing superoperators of `s`.
    pub fn outgoing_sum(&self, s: usize) -> Superoperator {
        Superoperator::sum_all(self.dim(), self.out[s].iter().map(|e| self.superop(e)))
            .expect("edge dimensions are checked at construction")
    }

    /// Topological order of the graph without self-loops and loop-back edges,
    /// or `None` if that graph has a cycle.
    pub fn acyclic_order(&self) -> Option<Vec<usize>> {
        let n = self.states.len();
        let mut indeg = vec![0usize; n];
        for (_, e) in self.transitions() {
            if e.kind == EdgeKind::Step {
                indeg[e.target] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n).rev().filter(|&s| indeg[s] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(s) = ready.pop() {
            order.push(s);
            for e in &self.out[s] {
                if e.kind == EdgeKind::Step {
                    indeg[e.target] -= 1;
                    if indeg[e.target] == 0 {
                        ready.push(e.target);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Short operator name such as `I`, `M0[q1]` or `CNOT[a,b]`.
    pub fn op_name(&self, id: usize) -> String {
        match &self.ops[id].label {
            OpLabel::Identity => "I".to_string(),
            OpLabel::Gate { gate, targets } => format!("{gate}[{}]", self.qubit_list(targets)),
            OpLabel::Measure { qubit, outcome } => format!("M{outcome}[{}]", self.qubits[qubit.0]),
            OpLabel::Custom(name) => name.clone(),
        }
    }

    fn qubit_list(&self, qs: &[QubitId]) -> String {
        qs.iter().map(|q| self.qubits[q.0].as_str()).collect::<Vec<_>>().join(",")
    }

    fn instr_text(&self, instr: &Instr) -> String {
        match instr {
            Instr::Reset(q) => format!("reset_at {}", self.qubits[q.0]),
            Instr::Gate { gate, targets } => format!("{gate}_at [{}]", self.qubit_list(targets)),
            Instr::Measure { out, target } => {
                format!("{} <- measure {}", self.vars[out.0].name, self.qubits[target.0])
            }
            Instr::DynamicLift { out, input } => {
                format!("{} <- dynamic_lift {}", self.vars[out.0].name, self.vars[input.0].name)
            }
            Instr::IfElse { guard, .. } => format!("if {}", self.vars[guard.0].name),
        }
    }

    /// First pending instruction and how many follow, or `_` for the empty body.
    pub fn residual_summary(&self, s: usize) -> String {
        let r = &self.states[s].residual;
        match r.split_first() {
            None => "_".to_string(),
            Some((head, [])) => self.instr_text(head),
            Some((head, rest)) => format!("{} (+{})", self.instr_text(head), rest.len()),
        }
    }

    /// Assignment rendered as the names of the variables set to 1, e.g. `{m,b}`.
    pub fn env_summary(&self, s: usize) -> String {
        let names: Vec<_> = self.labels(s).into_iter().map(|v| self.vars[v.0].name.as_str()).collect();
        format!("{{{}}}", names.join(","))
    }
}

impl fmt::Display for Qmc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in 0..self.num_states() {
            write!(f, "{s}: ({}, {})", self.residual_summary(s), self.env_summary(s))?;
            for e in &self.out[s] {
                write!(f, " -{}-> {}", self.op_name(e.op), e.target)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_bits() {
        let e = Env::ZERO.with(VarId(3), true).with(VarId(0), true);
        assert!(e.get(VarId(3)) && e.get(VarId(0)) && !e.get(VarId(1)));
        assert_eq!(e.ones().collect::<Vec<_>>(), vec![VarId(0), VarId(3)]);
        assert_eq!(e.with(VarId(3), false), Env(1));
    }
}
