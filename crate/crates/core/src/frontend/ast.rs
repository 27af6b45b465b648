use std::collections::BTreeMap;
use std::fmt;

use crate::linalg::{gates, CMatrix};

/// Position of a qubit in the declared register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitId(pub usize);

/// Index into [`Program::vars`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Bit,
    Bool,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarKind::Bit => "bit",
            VarKind::Bool => "bool",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateDef {
    pub name: String,
    pub arity: usize,
    pub matrix: CMatrix,
    pub builtin: bool,
}

/// Gate table: the built-in library plus user definitions in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct GateTable {
    gates: BTreeMap<String, GateDef>,
    user_order: Vec<String>,
}

impl Default for GateTable {
    fn default() -> Self {
        let mut gates = BTreeMap::new();
        let builtins = [
            ("X", gates::pauli_x()),
            ("Y", gates::pauli_y()),
            ("Z", gates::pauli_z()),
            ("H", gates::hadamard()),
            ("S", gates::phase_s()),
            ("T", gates::phase_t()),
            ("CNOT", gates::cnot()),
            ("CZ", gates::cz()),
            ("SWAP", gates::swap()),
            ("Toffoli", gates::toffoli()),
        ];
        for (name, matrix) in builtins {
            let arity = matrix.rows().trailing_zeros() as usize;
            gates.insert(
                name.to_string(),
                GateDef {
                    name: name.to_string(),
                    arity,
                    matrix,
                    builtin: true,
                },
            );
        }
        GateTable {
            gates,
            user_order: Vec::new(),
        }
    }
}

impl GateTable {
    pub fn get(&self, name: &str) -> Option<&GateDef> {
        self.gates.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.gates.contains_key(name)
    }

    /// Adds a user gate; returns `false` if the name is taken.
    pub fn insert_user(&mut self, name: String, matrix: CMatrix) -> bool {
        if self.gates.contains_key(&name) {
            return false;
        }
        let arity = matrix.rows().trailing_zeros() as usize;
        self.user_order.push(name.clone());
        self.gates.insert(
            name.clone(),
            GateDef {
                name,
                arity,
                matrix,
                builtin: false,
            },
        );
        true
    }

    pub fn user_gates(&self) -> impl Iterator<Item = &GateDef> {
        self.user_order.iter().map(|n| &self.gates[n])
    }
}

/// Maps common spellings onto the built-in gate names.
pub fn canonical_gate_name(name: &str) -> &str {
    let name = name.strip_prefix("gate_").unwrap_or(name);
    match name {
        "hadamard" => "H",
        "not" => "X",
        "cnot" | "CX" => "CNOT",
        "cz" => "CZ",
        "swap" => "SWAP",
        "toffoli" | "CCX" | "CCNOT" => "Toffoli",
        other => other,
    }
}

pub type Body = Vec<Instr>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Instr {
    Reset(QubitId),
    Gate {
        gate: String,
        targets: Vec<QubitId>,
    },
    Measure {
        out: VarId,
        target: QubitId,
    },
    DynamicLift {
        out: VarId,
        input: VarId,
    },
    IfElse {
        guard: VarId,
        then_body: Body,
        else_body: Body,
    },
}

impl Instr {
    /// Number of instructions including nested branch bodies.
    pub fn size(&self) -> usize {
        match self {
            Instr::IfElse {
                then_body,
                else_body,
                ..
            } => 1 + body_size(then_body) + body_size(else_body),
            _ => 1,
        }
    }
}

pub fn body_size(body: &[Instr]) -> usize {
    body.iter().map(Instr::size).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub qubits: Vec<String>,
    pub vars: Vec<VarDecl>,
    pub gates: GateTable,
    pub body: Body,
    /// `None` for a non-recursive program (exit is always taken).
    pub exit_guard: Option<VarId>,
}

impl Program {
    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn var(&self, id: VarId) -> &VarDecl {
        &self.vars[id.0]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn qubit_name(&self, q: QubitId) -> &str {
        &self.qubits[q.0]
    }
}
