use std::collections::{BTreeMap, VecDeque};

use crate::linalg::{hermitian_eigenvalues, CMatrix, DensityMatrix, Superoperator, VectorizedSuperop};
use crate::par::Exec;
use crate::semantics::Qmc;

use super::formula::{PathFormula, Property, StateFormula};
use super::QctlError;

/// Tolerance for probability comparisons.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Stop fixpoint iterations once successive iterates differ by less than this.
pub const DEFAULT_FIXPOINT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// Everything a formula is evaluated against.
#[derive(Debug, Clone)]
pub struct EvalContext<'a> {
    pub chain: &'a Qmc,
    pub rho0: DensityMatrix,
    pub start: usize,
    pub tol: f64,
    pub fixpoint_tol: f64,
    pub max_iters: usize,
    /// Decide `Q~p` for every normalized input state instead of `rho0` alone.
    pub all_rho: bool,
    pub exec: Exec,
}

impl<'a> EvalContext<'a> {
    pub fn new(chain: &'a Qmc, rho0: DensityMatrix) -> Result<Self, QctlError> {
        if rho0.dim() != chain.dim() {
            return Err(QctlError::InitialState(format!(
                "dimension {} does not match the {}-qubit chain",
                rho0.dim(),
                chain.num_qubits()
            )));
        }
        if (rho0.trace() - 1.0).abs() > 1e-10 {
            return Err(QctlError::InitialState(format!("trace {} is not 1", rho0.trace())));
        }
        Ok(EvalContext {
            chain,
            rho0,
            start: chain.start(),
            tol: DEFAULT_TOL,
            fixpoint_tol: DEFAULT_FIXPOINT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            all_rho: false,
            exec: Exec::default(),
        })
    }

    fn n(&self) -> usize {
        self.chain.num_states()
    }

    fn prob_of(&self, effect: &CMatrix) -> f64 {
        effect
            .matmul(self.rho0.mat())
            .expect("matching dimensions")
            .trace()
            .re
    }
}

/// Value computed for one property.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    /// A probability for `rho0`; `range` spans all normalized inputs when requested.
    Prob { p: f64, range: Option<(f64, f64)> },
    Matrix(CMatrix),
}

/// Satisfaction set of `sf` as one flag per state.
pub fn sat(ctx: &EvalContext, sf: &StateFormula) -> Result<Vec<bool>, QctlError> {
    let c = ctx.chain;
    let n = ctx.n();
    Ok(match sf {
        StateFormula::True => vec![true; n],
        StateFormula::False => vec![false; n],
        StateFormula::Terminated => (0..n).map(|s| c.is_terminated(s)).collect(),
        StateFormula::Var(name) => {
            let v = c.var_id(name).ok_or_else(|| QctlError::UnknownAtom(name.clone()))?;
            (0..n).map(|s| c.holds(s, v)).collect()
        }
        StateFormula::StateIs(k) => {
            if *k >= n {
                return Err(QctlError::UnknownAtom(format!("s = {k}")));
            }
            (0..n).map(|s| s == *k).collect()
        }
        StateFormula::Not(f) => sat(ctx, f)?.into_iter().map(|b| !b).collect(),
        StateFormula::And(a, b) => {
            let a = sat(ctx, a)?;
            let b = sat(ctx, b)?;
            a.into_iter().zip(b).map(|(x, y)| x && y).collect()
        }
        StateFormula::Compare { rel, bound, path } => {
            let effects = path_effects(ctx, path)?;
            let (rel, bound, tol) = (*rel, *bound, ctx.tol);
            if ctx.all_rho {
                ctx.exec.map(&effects, |f| {
                    let (lo, hi) = eigen_range(f);
                    rel.holds_on_range(lo, hi, bound, tol)
                })
            } else {
                ctx.exec.map(&effects, |f| rel.holds(ctx.prob_of(f), bound, tol))
            }
        }
    })
}

/// State indices satisfying `sf`.
pub fn sat_states(ctx: &EvalContext, sf: &StateFormula) -> Result<Vec<usize>, QctlError> {
    Ok(sat(ctx, sf)?
        .into_iter()
        .enumerate()
        .filter_map(|(s, b)| b.then_some(s))
        .collect())
}

fn eigen_range(m: &CMatrix) -> (f64, f64) {
    let v = hermitian_eigenvalues(m);
    (v.first().copied().unwrap_or(0.0), v.last().copied().unwrap_or(0.0))
}

/// States that can reach a `rhs` state through `lhs` states, ignoring weights.
fn can_reach(c: &Qmc, lhs: &[bool], rhs: &[bool]) -> Vec<bool> {
    let n = c.num_states();
    let mut preds = vec![Vec::new(); n];
    for (s, e) in c.transitions() {
        preds[e.target].push(s);
    }
    let mut seen = rhs.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| rhs[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !seen[s] && lhs[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    seen
}

/// Per-state classification for `lhs U rhs`.
struct UntilSets {
    rhs: Vec<bool>,
    /// `lhs & !rhs` states from which `rhs` is reachable.
    active: Vec<bool>,
}

fn until_sets(ctx: &EvalContext, lhs: &StateFormula, rhs: &StateFormula) -> Result<UntilSets, QctlError> {
    let l = sat(ctx, lhs)?;
    let r = sat(ctx, rhs)?;
    let reach = can_reach(ctx.chain, &l, &r);
    let active = (0..ctx.n()).map(|s| reach[s] && l[s] && !r[s]).collect();
    Ok(UntilSets { rhs: r, active })
}

/// Heisenberg-picture effects `F_s` with `tr(E_s(rho)) = tr(F_s rho)`, where
/// `E_s` is the path superoperator of `pf` from state `s`.
pub fn path_effects(ctx: &EvalContext, pf: &PathFormula) -> Result<Vec<CMatrix>, QctlError> {
    let c = ctx.chain;
    let d = c.dim();
    match pf {
        PathFormula::Next(f) => {
            let target = sat(ctx, f)?;
            let id = CMatrix::identity(d);
            Ok(ctx.exec.map_range(ctx.n(), |s| {
                let mut acc = CMatrix::zeros(d, d);
                for e in c.edges(s).iter().filter(|e| target[e.target]) {
                    acc.add_assign(&c.superop(e).apply_dual(&id).expect("dims"))
                        .expect("dims");
                }
                acc
            }))
        }
        PathFormula::Until { lhs, rhs, bound } => {
            let sets = until_sets(ctx, lhs, rhs)?;
            until_effects(ctx, &sets, *bound)
        }
    }
}

fn until_effects(ctx: &EvalContext, sets: &UntilSets, bound: Option<usize>) -> Result<Vec<CMatrix>, QctlError> {
    let c = ctx.chain;
    let d = c.dim();
    let n = ctx.n();
    let mut cur: Vec<CMatrix> = (0..n)
        .map(|s| {
            if sets.rhs[s] {
                CMatrix::identity(d)
            } else {
                CMatrix::zeros(d, d)
            }
        })
        .collect();
    let mut iters = 0;
    loop {
        if bound == Some(iters) {
            return Ok(cur);
        }
        let next: Vec<CMatrix> = ctx.exec.map_range(n, |s| {
            if !sets.active[s] {
                return cur[s].clone();
            }
            let mut acc = CMatrix::zeros(d, d);
            for e in c.edges(s) {
                if sets.rhs[e.target] || sets.active[e.target] {
                    acc.add_assign(&c.superop(e).apply_dual(&cur[e.target]).expect("dims"))
                        .expect("dims");
                }
            }
            acc
        });
        let diff = (0..n)
            .filter(|&s| sets.active[s])
            .map(|s| next[s].max_abs_diff(&cur[s]))
            .fold(0.0, f64::max);
        cur = next;
        iters += 1;
        if bound.is_none() {
            if diff < ctx.fixpoint_tol {
                return Ok(cur);
            }
            if iters >= ctx.max_iters {
                return Err(QctlError::NonConvergence {
                    iters,
                    residual: diff,
                });
            }
        }
    }
}

/// `rho0` pushed forward along every path satisfying `lhs U rhs` from the
/// start state, collected when the path first meets `rhs`.
fn forward_until(
    ctx: &EvalContext,
    lhs: &StateFormula,
    rhs: &StateFormula,
    bound: Option<usize>,
) -> Result<CMatrix, QctlError> {
    let c = ctx.chain;
    let d = c.dim();
    let sets = until_sets(ctx, lhs, rhs)?;
    if sets.rhs[ctx.start] {
        return Ok(ctx.rho0.mat().clone());
    }
    if !sets.active[ctx.start] {
        return Ok(CMatrix::zeros(d, d));
    }
    let effects = match bound {
        None => Some(until_effects(ctx, &sets, None)?),
        Some(_) => None,
    };
    let mut inflight: BTreeMap<usize, CMatrix> = BTreeMap::new();
    inflight.insert(ctx.start, ctx.rho0.mat().clone());
    let mut collected = CMatrix::zeros(d, d);
    let mut iters = 0;
    while !inflight.is_empty() && bound != Some(iters) {
        if let Some(f) = &effects {
            let remaining: f64 = inflight
                .iter()
                .map(|(s, m)| f[*s].matmul(m).expect("dims").trace().re)
                .sum();
            if remaining < ctx.fixpoint_tol {
                break;
            }
            if iters >= ctx.max_iters {
                return Err(QctlError::NonConvergence {
                    iters,
                    residual: remaining,
                });
            }
        }
        let items: Vec<(usize, CMatrix)> = std::mem::take(&mut inflight).into_iter().collect();
        let pushed = ctx.exec.map(&items, |(s, m)| {
            c.edges(*s)
                .iter()
                .map(|e| (e.target, c.superop(e).apply_mat(m).expect("dims")))
                .collect::<Vec<_>>()
        });
        for (t, m) in pushed.into_iter().flatten() {
            if sets.rhs[t] {
                collected.add_assign(&m).expect("dims");
            } else if sets.active[t] {
                match inflight.get_mut(&t) {
                    Some(acc) => acc.add_assign(&m).expect("dims"),
                    None => {
                        inflight.insert(t, m);
                    }
                }
            }
        }
        iters += 1;
    }
    Ok(collected)
}

/// `qeval(Q=? [pf], rho0)`: the (sub-normalized) state reached along the
/// paths satisfying `pf`.
pub fn qeval(ctx: &EvalContext, pf: &PathFormula) -> Result<DensityMatrix, QctlError> {
    let m = match pf {
        PathFormula::Next(f) => next_superop(ctx, f, ctx.start)?.apply_mat(ctx.rho0.mat())?,
        PathFormula::Until { lhs, rhs, bound } => forward_until(ctx, lhs, rhs, *bound)?,
    };
    Ok(DensityMatrix::from_trusted(m))
}

/// `qprob(Q=? [pf], rho0) = tr(qeval(...))`.
pub fn qprob(ctx: &EvalContext, pf: &PathFormula) -> Result<f64, QctlError> {
    Ok(qeval(ctx, pf)?.trace())
}

/// `Σ_{t ⊨ sf} Q(from, t)`.
pub fn next_superop(ctx: &EvalContext, sf: &StateFormula, from: usize) -> Result<Superoperator, QctlError> {
    let target = sat(ctx, sf)?;
    let c = ctx.chain;
    Ok(Superoperator::sum_all(
        c.dim(),
        c.edges(from)
            .iter()
            .filter(|e| target[e.target])
            .map(|e| c.superop(e)),
    )?)
}

/// The superoperator accumulated over all paths from `from` satisfying
/// `lhs U rhs` (bounded when `bound` is given), solved on vectorized maps.
pub fn until_superop(
    ctx: &EvalContext,
    lhs: &StateFormula,
    rhs: &StateFormula,
    bound: Option<usize>,
    from: usize,
) -> Result<Superoperator, QctlError> {
    let c = ctx.chain;
    let d = c.dim();
    let n = ctx.n();
    let sets = until_sets(ctx, lhs, rhs)?;

    // Only states reachable from `from` through active states matter.
    let mut needed = vec![false; n];
    needed[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        if sets.active[s] {
            for e in c.edges(s) {
                if !needed[e.target] {
                    needed[e.target] = true;
                    queue.push_back(e.target);
                }
            }
        }
    }

    let zero = VectorizedSuperop::zero(d)?;
    let id = VectorizedSuperop::identity(d)?;
    let mut cur: Vec<VectorizedSuperop> = (0..n)
        .map(|s| if needed[s] && sets.rhs[s] { id.clone() } else { zero.clone() })
        .collect();
    let mut iters = 0;
    loop {
        if bound == Some(iters) {
            break;
        }
        let next = ctx.exec.map_range(n, |s| -> Result<VectorizedSuperop, QctlError> {
            if !(needed[s] && sets.active[s]) {
                return Ok(cur[s].clone());
            }
            let mut acc = zero.clone();
            for e in c.edges(s) {
                if sets.rhs[e.target] || sets.active[e.target] {
                    acc.add_assign(&cur[e.target].after(c.superop(e), Exec::Sequential)?)?;
                }
            }
            Ok(acc)
        });
        let next: Vec<VectorizedSuperop> = next.into_iter().collect::<Result<_, _>>()?;
        let diff = (0..n)
            .filter(|&s| needed[s] && sets.active[s])
            .map(|s| next[s].max_abs_diff(&cur[s]))
            .fold(0.0, f64::max);
        cur = next;
        iters += 1;
        if bound.is_none() {
            if diff < ctx.fixpoint_tol {
                break;
            }
            if iters >= ctx.max_iters {
                return Err(QctlError::NonConvergence {
                    iters,
                    residual: diff,
                });
            }
        }
    }
    Ok(cur.swap_remove(from).to_superop())
}

/// Whether the start state satisfies `sf`.
pub fn check(ctx: &EvalContext, sf: &StateFormula) -> Result<bool, QctlError> {
    Ok(sat(ctx, sf)?[ctx.start])
}

fn prob_value(ctx: &EvalContext, pf: &PathFormula) -> Result<Value, QctlError> {
    let p = qprob(ctx, pf)?;
    let range = if ctx.all_rho {
        Some(eigen_range(&path_effects(ctx, pf)?[ctx.start]))
    } else {
        None
    };
    Ok(Value::Prob { p, range })
}

/// Evaluates one property. With `superop`, `Q=? [pf]` yields the vectorized
/// matrix of the path superoperator instead of a probability.
pub fn evaluate(ctx: &EvalContext, prop: &Property, superop: bool) -> Result<Value, QctlError> {
    match prop {
        Property::Check(sf) => Ok(Value::Bool(check(ctx, sf)?)),
        Property::Query(pf) if superop => {
            let s = match pf {
                PathFormula::Next(f) => next_superop(ctx, f, ctx.start)?,
                PathFormula::Until { lhs, rhs, bound } => until_superop(ctx, lhs, rhs, *bound, ctx.start)?,
            };
            Ok(Value::Matrix(s.vectorize()?.mat().clone()))
        }
        Property::Query(pf) | Property::Prob { path: pf, .. } => prob_value(ctx, pf),
        Property::Eval { path, .. } => Ok(Value::Matrix(qeval(ctx, path)?.into_mat())),
    }
}
