use crate::linalg::CMatrix;

use super::chain::Qmc;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVerdict {
    pub state: usize,
    /// `max |sum_i K_i^dag K_i - I|` over the outgoing edges.
    pub deviation: f64,
    pub trace_preserving: bool,
}

/// Result of checking the chain conditions state by state.
#[derive(Debug, Clone, PartialEq)]
pub struct TpReport {
    pub tol: f64,
    pub states: Vec<StateVerdict>,
    /// Edges whose map is not trace non-increasing, as `(from, to)`.
    pub increasing_edges: Vec<(usize, usize)>,
    /// States whose assignment sets bits outside the declared variables.
    pub bad_labels: Vec<usize>,
}

impl TpReport {
    pub fn failures(&self) -> impl Iterator<Item = &StateVerdict> {
        self.states.iter().filter(|v| !v.trace_preserving)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none() && self.increasing_edges.is_empty() && self.bad_labels.is_empty()
    }

    pub fn max_deviation(&self) -> f64 {
        self.states.iter().map(|v| v.deviation).fold(0.0, f64::max)
    }
}

/// Checks that every state's outgoing maps sum to a trace-preserving map
/// within `tol`, that each edge map is trace non-increasing, and that labels
/// only mention declared variables.
pub fn check_qmc(c: &Qmc, tol: f64) -> TpReport {
    let id = CMatrix::identity(c.dim());
    let states = (0..c.num_states())
        .map(|s| {
            let deviation = c.outgoing_sum(s).kraus_gram().max_abs_diff(&id);
            StateVerdict {
                state: s,
                deviation,
                trace_preserving: deviation <= tol,
            }
        })
        .collect();
    let increasing_edges = c
        .transitions()
        .filter(|(_, e)| !c.superop(e).is_trace_non_increasing(tol))
        .map(|(s, e)| (s, e.target))
        .collect();
    let declared = c.vars().len();
    let bad_labels = (0..c.num_states())
        .filter(|&s| declared < 64 && c.state(s).env.0 >> declared != 0)
        .collect();
    TpReport {
        tol,
        states,
        increasing_edges,
        bad_labels,
    }
}
