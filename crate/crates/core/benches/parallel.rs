use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use quipmc::frontend::load_program;
use quipmc::linalg::{embed_gate, gates, DensityMatrix, Superoperator};
use quipmc::par::Exec;
use quipmc::qctl::{path_effects, until_superop, EvalContext, PathFormula, StateFormula};
use quipmc::semantics::{build_program_chain, Qmc};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn corpus(name: &str) -> Qmc {
    let path = format!("{}/corpus/{name}.qpe", env!("CARGO_MANIFEST_DIR"));
    let src = std::fs::read_to_string(path).unwrap();
    build_program_chain(&load_program(&src).unwrap()).unwrap()
}

fn eventually_terminated(bound: Option<usize>) -> PathFormula {
    PathFormula::Until {
        lhs: Box::new(StateFormula::True),
        rhs: Box::new(StateFormula::Terminated),
        bound,
    }
}

fn vectorized_compose(c: &mut Criterion) {
    let mut group = c.benchmark_group("vectorized_compose");
    for n in [3usize, 4, 5] {
        let mut u = embed_gate(&gates::hadamard(), &[0], n).unwrap();
        for q in 1..n {
            u = embed_gate(&gates::cnot(), &[q - 1, q], n).unwrap().matmul(&u).unwrap();
        }
        let s = Superoperator::unitary(&u).unwrap();
        let (m0, m1) = Superoperator::measurement(n - 1, n).unwrap();
        let dephase = m0.sum(&m1).unwrap();
        let v = s.vectorize().unwrap();
        for (mode, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(mode, n), &n, |b, _| {
                b.iter(|| v.after(&dephase, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn heisenberg_effects(c: &mut Criterion) {
    let mut group = c.benchmark_group("path_effects");
    for name in ["teleport", "switch"] {
        let chain = corpus(name);
        let rho = DensityMatrix::maximally_mixed(chain.num_qubits());
        let pf = eventually_terminated(None);
        for (mode, exec) in MODES {
            let mut ctx = EvalContext::new(&chain, rho.clone()).unwrap();
            ctx.exec = exec;
            group.bench_function(BenchmarkId::new(mode, name), |b| {
                b.iter(|| path_effects(&ctx, &pf).unwrap())
            });
        }
    }
    group.finish();
}

fn until_fixpoint(c: &mut Criterion) {
    let mut group = c.benchmark_group("until_superop");
    group.sample_size(10);
    for name in ["coinflip", "toy", "teleport"] {
        let chain = corpus(name);
        let rho = DensityMatrix::maximally_mixed(chain.num_qubits());
        for (mode, exec) in MODES {
            let mut ctx = EvalContext::new(&chain, rho.clone()).unwrap();
            ctx.exec = exec;
            group.bench_function(BenchmarkId::new(mode, name), |b| {
                b.iter(|| {
                    until_superop(&ctx, &StateFormula::True, &StateFormula::Terminated, None, chain.start()).unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, vectorized_compose, heisenberg_effects, until_fixpoint);
criterion_main!(benches);
