//! QCTL over quantum Markov chains.
//!
//! Probabilities are computed for the context's initial state: `Q>=p [pf]`
//! holds in `s` when `tr(E_s(rho0)) >= p`, where `E_s` is the superoperator
//! accumulated over the paths from `s` satisfying `pf`. Setting
//! [`EvalContext::all_rho`] asks for the bound to hold for every normalized
//! input instead.
//!
//! `s = k` atoms refer to this crate's breadth-first state numbering.

mod eval;
mod formula;

use thiserror::Error;

use crate::linalg::LinalgError;

pub use eval::{
    check, evaluate, next_superop, path_effects, qeval, qprob, sat, sat_states, until_superop, EvalContext, Value,
    DEFAULT_FIXPOINT_TOL, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
pub use formula::{parse_formula, PathFormula, Property, Rel, StateFormula};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QctlError {
    #[error("column {col}: expected {expected}, found {found}")]
    Syntax {
        col: usize,
        expected: String,
        found: String,
    },
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("no convergence after {iters} iterations (last change {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("invalid initial state: {0}")]
    InitialState(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::load_program;
    use crate::linalg::{CMatrix, DensityMatrix, Superoperator};
    use crate::semantics::{build_program_chain, Qmc};

    const COIN: &str = "qubits q
        body { reset_at q; H_at q; m <- measure q; b <- dynamic_lift m }
        exitOn b";

    fn chain(src: &str) -> Qmc {
        build_program_chain(&load_program(src).unwrap()).unwrap()
    }

    fn path(text: &str) -> PathFormula {
        match parse_formula(text).unwrap() {
            Property::Query(pf) => pf,
            other => panic!("{other:?}"),
        }
    }

    fn state(text: &str) -> StateFormula {
        match parse_formula(text).unwrap() {
            Property::Check(sf) => sf,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coin_flip_bounded_is_geometric() {
        let c = chain(COIN);
        let ctx = EvalContext::new(&c, DensityMatrix::basis(0, 1).unwrap()).unwrap();
        for k in 1..=12 {
            let p = qprob(&ctx, &path(&format!("Q=? [F<={} terminated]", 5 * k - 1))).unwrap();
            assert!((p - (1.0 - 0.5f64.powi(k))).abs() < 1e-12, "k={k} p={p}");
            let before = qprob(&ctx, &path(&format!("Q=? [F<={} terminated]", 5 * k - 2))).unwrap();
            assert!((before - (1.0 - 0.5f64.powi(k - 1))).abs() < 1e-12);
        }
    }

    #[test]
    fn coin_flip_unbounded_converges() {
        let c = chain(COIN);
        let ctx = EvalContext::new(&c, DensityMatrix::basis(0, 1).unwrap()).unwrap();
        let p = qprob(&ctx, &path("Q=? [F terminated]")).unwrap();
        assert!((p - 1.0).abs() < 1e-9);
        let out = qeval(&ctx, &path("Q=? [F terminated]")).unwrap();
        let one = CMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(out.mat().max_abs_diff(&one) < 1e-9);
    }

    #[test]
    fn routes_agree() {
        let c = chain(COIN);
        let rho = DensityMatrix::maximally_mixed(1);
        let ctx = EvalContext::new(&c, rho.clone()).unwrap();
        for text in ["Q=? [F terminated]", "Q=? [F<=9 terminated]", "Q=? [!b U<=4 m]", "Q=? [X m]"] {
            let pf = path(text);
            let forward = qeval(&ctx, &pf).unwrap();
            let effect = &path_effects(&ctx, &pf).unwrap()[0];
            let p_effect = effect.matmul(rho.mat()).unwrap().trace().re;
            assert!((forward.trace() - p_effect).abs() < 1e-9, "{text}");
            let s = match &pf {
                PathFormula::Until { lhs, rhs, bound } => until_superop(&ctx, lhs, rhs, *bound, 0).unwrap(),
                PathFormula::Next(f) => next_superop(&ctx, f, 0).unwrap(),
            };
            assert!(s.apply_mat(rho.mat()).unwrap().max_abs_diff(forward.mat()) < 1e-9, "{text}");
        }
    }

    #[test]
    fn base_cases() {
        let c = chain(COIN);
        let ctx = EvalContext::new(&c, DensityMatrix::basis(0, 1).unwrap()).unwrap();
        let s = until_superop(&ctx, &StateFormula::True, &StateFormula::True, None, 3).unwrap();
        assert!(s.same_map(&Superoperator::identity(2), 1e-12));
        let zero = next_superop(&ctx, &StateFormula::False, 0).unwrap();
        assert!(zero.is_zero());
        let k0 = until_superop(&ctx, &StateFormula::True, &StateFormula::Terminated, Some(0), 0).unwrap();
        assert!(k0.is_zero());
        assert!((qprob(&ctx, &path("Q=? [F true]")).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reset_next_into_correction_is_m1() {
        let c = chain("qubits q body { reset_at q }");
        let ctx = EvalContext::new(&c, DensityMatrix::maximally_mixed(1)).unwrap();
        let s = next_superop(&ctx, &StateFormula::StateIs(2), 0).unwrap();
        let (_, m1) = Superoperator::measurement(0, 1).unwrap();
        assert!(s.same_map(&m1, 1e-12));
        let both = next_superop(&ctx, &StateFormula::True, 0).unwrap();
        assert!(both.is_trace_preserving(1e-12));
    }

    #[test]
    fn nested_comparison_picks_post_measurement_states() {
        let c = chain(COIN);
        let ctx = EvalContext::new(&c, DensityMatrix::basis(0, 1).unwrap()).unwrap();
        let states = sat_states(&ctx, &state("Q>=0.5 [X terminated]")).unwrap();
        let expected: Vec<usize> = (0..c.num_states())
            .filter(|&s| c.edges(s).iter().any(|e| c.is_terminated(e.target)))
            .collect();
        assert_eq!(states, expected);
        assert!(states.iter().all(|&s| c.holds(s, c.var_id("m").unwrap())));
    }

    #[test]
    fn atoms_and_negation() {
        let c = chain("qubits q body { H_at q; m <- measure q }");
        let ctx = EvalContext::new(&c, DensityMatrix::basis(0, 1).unwrap()).unwrap();
        let m = sat(&ctx, &state("m")).unwrap();
        let not_m = sat(&ctx, &state("!m")).unwrap();
        assert!(m.iter().zip(&not_m).all(|(a, b)| a != b));
        assert!(matches!(sat(&ctx, &state("zz")), Err(QctlError::UnknownAtom(_))));
        assert!(matches!(sat(&ctx, &state("s = 99")), Err(QctlError::UnknownAtom(_))));
        assert!(check(&ctx, &state("Q>=0 [F m]")).unwrap());
        assert!(check(&ctx, &state("Q=0.5 [F (terminated & m)]")).unwrap());
        assert!(!check(&ctx, &state("Q>0.5 [F (terminated & m)]")).unwrap());
    }

    #[test]
    fn all_rho_uses_the_worst_input() {
        let c = chain("qubits q body { m <- measure q }");
        let mut ctx = EvalContext::new(&c, DensityMatrix::basis(1, 1).unwrap()).unwrap();
        let f = state("Q>=0.9 [F m]");
        assert!(check(&ctx, &f).unwrap());
        ctx.all_rho = true;
        assert!(!check(&ctx, &f).unwrap());
        assert!(check(&ctx, &state("Q<=1 [F m]")).unwrap());
    }

    #[test]
    fn endless_loop_has_probability_zero() {
        let c = chain("qubits q body { reset_at q; m <- measure q; b <- dynamic_lift m } exitOn b");
        let ctx = EvalContext::new(&c, DensityMatrix::maximally_mixed(1)).unwrap();
        assert!(qprob(&ctx, &path("Q=? [F terminated]")).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bounded_probabilities_are_monotone() {
        let c = chain(COIN);
        let ctx = EvalContext::new(&c, DensityMatrix::maximally_mixed(1)).unwrap();
        let mut last = 0.0;
        for k in 0..40 {
            let p = qprob(&ctx, &path(&format!("Q=? [F<={k} terminated]"))).unwrap();
            assert!(p + 1e-15 >= last);
            last = p;
        }
        let limit = qprob(&ctx, &path("Q=? [F terminated]")).unwrap();
        assert!(limit + 1e-12 >= last && (limit - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_initial_state() {
        let c = chain(COIN);
        assert!(EvalContext::new(&c, DensityMatrix::maximally_mixed(2)).is_err());
    }
}
