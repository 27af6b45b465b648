use super::{CMatrix, LinalgError, ZERO};

/// Lifts a `2^j`-dimensional gate acting on `targets` to the full `n`-qubit
/// register.
///
/// Qubit 0 is the most significant tensor factor. The first target plays the
/// role of the gate's most significant qubit, so `embed_gate(CNOT, [1, 0], 2)`
/// is a CNOT controlled by qubit 1. Register order is never changed: the
/// result equals `P^T (u (x) I) P` where `P` moves the targets to the front.
pub fn embed_gate(u: &CMatrix, targets: &[usize], n: usize) -> Result<CMatrix, LinalgError> {
    let j = targets.len();
    if !u.is_square() || u.rows() != 1usize << j {
        return Err(LinalgError::DimensionMismatch {
            op: "embed_gate",
            left: (u.rows(), u.cols()),
            right: (1 << j, 1 << j),
        });
    }
    if n > super::MAX_QUBITS {
        return Err(LinalgError::DimensionCap {
            requested: 1usize.checked_shl(n as u32).unwrap_or(usize::MAX),
            cap: super::DEFAULT_DIM_CAP,
        });
    }
    for (i, &t) in targets.iter().enumerate() {
        if t >= n {
            return Err(LinalgError::IndexOutOfRange { index: t, len: n });
        }
        if targets[..i].contains(&t) {
            return Err(LinalgError::DuplicateTarget(t));
        }
    }

    let dim = 1usize << n;
    let target_mask: usize = targets.iter().map(|&t| 1usize << (n - 1 - t)).sum();
    // Gate-local index of a full basis index.
    let local = |x: usize| -> usize {
        targets
            .iter()
            .fold(0usize, |acc, &t| (acc << 1) | ((x >> (n - 1 - t)) & 1))
    };
    // Full index with the target bits replaced by the gate-local index `k`.
    let scatter = |rest: usize, k: usize| -> usize {
        targets.iter().enumerate().fold(rest, |acc, (pos, &t)| {
            let b = (k >> (j - 1 - pos)) & 1;
            acc | (b << (n - 1 - t))
        })
    };

    let mut out = CMatrix::zeros(dim, dim);
    for row in 0..dim {
        let rest = row & !target_mask;
        let lr = local(row);
        for lc in 0..(1usize << j) {
            let v = u[(lr, lc)];
            if v != ZERO {
                out[(row, scatter(rest, lc))] = v;
            }
        }
    }
    Ok(out)
}
