//! Standard gate matrices. Multi-qubit gates use the first listed qubit as the
//! most significant index (control first for CNOT / CZ / Toffoli).

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::CMatrix;

pub fn pauli_x() -> CMatrix {
    CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> CMatrix {
    let i = Complex64::new(0.0, 1.0);
    CMatrix::from_rows(&[
        vec![Complex64::new(0.0, 0.0), -i],
        vec![i, Complex64::new(0.0, 0.0)],
    ])
    .expect("2x2")
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

pub fn hadamard() -> CMatrix {
    let s = FRAC_1_SQRT_2;
    CMatrix::from_real(2, 2, &[s, s, s, -s])
}

pub fn phase_s() -> CMatrix {
    let mut m = CMatrix::identity(2);
    m[(1, 1)] = Complex64::new(0.0, 1.0);
    m
}

pub fn phase_t() -> CMatrix {
    let mut m = CMatrix::identity(2);
    m[(1, 1)] = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
    m
}

fn permutation(images: &[usize]) -> CMatrix {
    let n = images.len();
    let mut m = CMatrix::zeros(n, n);
    for (col, &row) in images.iter().enumerate() {
        m[(row, col)] = Complex64::new(1.0, 0.0);
    }
    m
}

pub fn cnot() -> CMatrix {
    permutation(&[0, 1, 3, 2])
}

pub fn cz() -> CMatrix {
    CMatrix::from_real(
        4,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, -1.0,
        ],
    )
}

pub fn swap() -> CMatrix {
    permutation(&[0, 2, 1, 3])
}

pub fn toffoli() -> CMatrix {
    permutation(&[0, 1, 2, 3, 4, 5, 7, 6])
}

/// |i><i| on one qubit.
pub fn projector(outcome: u8) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    let i = usize::from(outcome & 1);
    m[(i, i)] = Complex64::new(1.0, 0.0);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_unitary() {
        for g in [
            pauli_x(),
            pauli_y(),
            pauli_z(),
            hadamard(),
            phase_s(),
            phase_t(),
            cnot(),
            cz(),
            swap(),
            toffoli(),
        ] {
            assert!(g.is_unitary(1e-12), "{g:?}");
        }
    }

    #[test]
    fn t_squared_is_s() {
        let t2 = phase_t().matmul(&phase_t()).unwrap();
        assert!(t2.approx_eq(&phase_s(), 1e-15));
    }
}
