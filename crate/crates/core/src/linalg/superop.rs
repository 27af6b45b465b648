use std::sync::OnceLock;

use num_complex::Complex64;

use super::eig::{hermitian_eigen, hermitian_eigenvalues};
use super::{embed_gate, gates, unvec_col, vec_col, CMatrix, LinalgError, ONE, ZERO};
use crate::par::Exec;

pub const UNITARY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-9;
/// Kraus operators with Frobenius norm below this are dropped.
pub const KRAUS_DROP_TOL: f64 = 1e-14;
/// Largest axis of a vectorized superoperator (6 qubits).
pub const VEC_DIM_CAP: usize = 1 << 12;

/// A (possibly sub-normalized) density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity and `trace in [0, 1]`.
    pub fn new(mat: CMatrix) -> Result<Self, LinalgError> {
        if !mat.is_square() || !mat.rows().is_power_of_two() {
            return Err(LinalgError::NotDensity(format!(
                "shape {}x{} is not a power-of-two square",
                mat.rows(),
                mat.cols()
            )));
        }
        if !mat.is_hermitian(UNITARY_TOL) {
            return Err(LinalgError::NotDensity("not Hermitian".into()));
        }
        let tr = mat.trace();
        if tr.re < -UNITARY_TOL || tr.re > 1.0 + UNITARY_TOL {
            return Err(LinalgError::NotDensity(format!("trace {} outside [0, 1]", tr.re)));
        }
        let min_eig = hermitian_eigenvalues(&mat).first().copied().unwrap_or(0.0);
        if min_eig < -POSITIVITY_TOL {
            return Err(LinalgError::NotDensity(format!(
                "minimum eigenvalue {min_eig:e} is negative"
            )));
        }
        Ok(DensityMatrix { mat })
    }

    /// Wraps a matrix produced by applying trace-non-increasing maps to a
    /// valid state. Skips the eigenvalue check.
    pub(crate) fn from_trusted(mat: CMatrix) -> Self {
        DensityMatrix { mat }
    }

    /// `|psi><psi|`, normalizing `psi`.
    pub fn pure(psi: &[Complex64]) -> Result<Self, LinalgError> {
        let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !psi.len().is_power_of_two() || norm == 0.0 {
            return Err(LinalgError::NotDensity("invalid state vector".into()));
        }
        let v: Vec<Complex64> = psi.iter().map(|a| a / norm).collect();
        Ok(DensityMatrix {
            mat: CMatrix::outer(&v, &v),
        })
    }

    /// Computational basis projector `|index><index|` on `n` qubits.
    pub fn basis(index: usize, n: usize) -> Result<Self, LinalgError> {
        let dim = 1usize << n;
        if index >= dim {
            return Err(LinalgError::IndexOutOfRange { index, len: dim });
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Ok(DensityMatrix { mat: m })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let dim = 1usize << n;
        DensityMatrix {
            mat: CMatrix::identity(dim).scale(Complex64::new(1.0 / dim as f64, 0.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.mat).first().copied().unwrap_or(0.0)
    }
}

/// A completely positive map in Kraus form `rho -> sum_i K_i rho K_i^dag`.
#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    kraus: Vec<CMatrix>,
    vectorized: OnceLock<VectorizedSuperop>,
}

impl PartialEq for Superoperator {
    /// Structural equality of the Kraus lists. Use [`Superoperator::same_map`]
    /// to compare the maps themselves.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.kraus == other.kraus
    }
}

impl Superoperator {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self, LinalgError> {
        let dim = match kraus.first() {
            Some(k) => k.rows(),
            None => return Err(LinalgError::EmptyKraus),
        };
        if let Some(bad) = kraus.iter().find(|k| k.rows() != dim || k.cols() != dim) {
            return Err(LinalgError::DimensionMismatch {
                op: "superoperator",
                left: (dim, dim),
                right: (bad.rows(), bad.cols()),
            });
        }
        Ok(Self::from_parts(dim, kraus))
    }

    fn from_parts(dim: usize, kraus: Vec<CMatrix>) -> Self {
        let mut kraus: Vec<CMatrix> = kraus
            .into_iter()
            .filter(|k| k.frobenius_norm() >= KRAUS_DROP_TOL)
            .collect();
        if kraus.is_empty() {
            kraus.push(CMatrix::zeros(dim, dim));
        }
        Superoperator {
            dim,
            kraus,
            vectorized: OnceLock::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(dim, vec![CMatrix::identity(dim)])
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_parts(dim, Vec::new())
    }

    /// `rho -> U rho U^dag`.
    pub fn unitary(u: &CMatrix) -> Result<Self, LinalgError> {
        if !u.is_unitary(UNITARY_TOL) {
            return Err(LinalgError::NotUnitary);
        }
        Ok(Self::from_parts(u.rows(), vec![u.clone()]))
    }

    /// The two projective measurement branches on qubit `k` of an `n`-qubit
    /// register, `(M0, M1)`.
    pub fn measurement(k: usize, n: usize) -> Result<(Self, Self), LinalgError> {
        if k >= n {
            return Err(LinalgError::IndexOutOfRange { index: k, len: n });
        }
        let p0 = embed_gate(&gates::projector(0), &[k], n)?;
        let p1 = embed_gate(&gates::projector(1), &[k], n)?;
        Ok((
            Self::from_parts(p0.rows(), vec![p0]),
            Self::from_parts(p1.rows(), vec![p1]),
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn is_zero(&self) -> bool {
        self.kraus.iter().all(|k| k.max_norm() == 0.0)
    }

    /// `sum_i K_i rho K_i^dag`.
    pub fn apply_mat(&self, rho: &CMatrix) -> Result<CMatrix, LinalgError> {
        if rho.rows() != self.dim || rho.cols() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                op: "apply",
                left: (self.dim, self.dim),
                right: (rho.rows(), rho.cols()),
            });
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            let t = k.matmul(rho)?.matmul(&k.adjoint())?;
            out.add_assign(&t)?;
        }
        Ok(out)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix, LinalgError> {
        Ok(DensityMatrix::from_trusted(self.apply_mat(rho.mat())?))
    }

    /// Heisenberg-picture action `sum_i K_i^dag E K_i`.
    pub fn apply_dual(&self, effect: &CMatrix) -> Result<CMatrix, LinalgError> {
        if effect.rows() != self.dim || effect.cols() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                op: "apply_dual",
                left: (self.dim, self.dim),
                right: (effect.rows(), effect.cols()),
            });
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            let t = k.adjoint().matmul(effect)?.matmul(k)?;
            out.add_assign(&t)?;
        }
        Ok(out)
    }

    /// `self` after `first`: Kraus set `{K_i L_j}`.
    pub fn compose(&self, first: &Superoperator) -> Result<Superoperator, LinalgError> {
        self.check_dim("compose", first)?;
        let mut kraus = Vec::with_capacity(self.kraus.len() * first.kraus.len());
        for a in &self.kraus {
            for b in &first.kraus {
                kraus.push(a.matmul(b)?);
            }
        }
        Ok(Self::from_parts(self.dim, kraus))
    }

    /// Pointwise sum of maps: concatenated Kraus lists.
    pub fn sum(&self, other: &Superoperator) -> Result<Superoperator, LinalgError> {
        self.check_dim("sum", other)?;
        let kraus = self.kraus.iter().chain(&other.kraus).cloned().collect();
        Ok(Self::from_parts(self.dim, kraus))
    }

    /// Sum of an arbitrary non-empty collection of maps of dimension `dim`.
    pub fn sum_all<'a, I>(dim: usize, maps: I) -> Result<Superoperator, LinalgError>
    where
        I: IntoIterator<Item = &'a Superoperator>,
    {
        let mut kraus = Vec::new();
        for m in maps {
            if m.dim != dim {
                return Err(LinalgError::DimensionMismatch {
                    op: "sum",
                    left: (dim, dim),
                    right: (m.dim, m.dim),
                });
            }
            kraus.extend(m.kraus.iter().cloned());
        }
        Ok(Self::from_parts(dim, kraus))
    }

    /// `sum_i K_i^dag K_i`.
    pub fn kraus_gram(&self) -> CMatrix {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            acc.add_assign(&k.adjoint().matmul(k).expect("square"))
                .expect("same shape");
        }
        acc
    }

    /// `|| sum K^dag K - I ||_max <= tol`.
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.kraus_gram().approx_eq(&CMatrix::identity(self.dim), tol)
    }

    /// Largest eigenvalue of `sum K^dag K` is at most `1 + tol`.
    pub fn is_trace_non_increasing(&self, tol: f64) -> bool {
        hermitian_eigenvalues(&self.kraus_gram())
            .last()
            .is_none_or(|&max| max <= 1.0 + tol)
    }

    /// Range of `tr(E(rho))` over all normalized states `rho`.
    pub fn trace_range(&self) -> (f64, f64) {
        let vals = hermitian_eigenvalues(&self.kraus_gram());
        (
            vals.first().copied().unwrap_or(0.0),
            vals.last().copied().unwrap_or(0.0),
        )
    }

    /// Column-stacking matrix `sum_i conj(K_i) (x) K_i`, computed once.
    pub fn vectorize(&self) -> Result<&VectorizedSuperop, LinalgError> {
        if let Some(v) = self.vectorized.get() {
            return Ok(v);
        }
        let v = VectorizedSuperop::from_kraus(self.dim, &self.kraus)?;
        Ok(self.vectorized.get_or_init(|| v))
    }

    /// Same map as `other`, compared on vectorized matrices.
    pub fn same_map(&self, other: &Superoperator, tol: f64) -> bool {
        match (self.vectorize(), other.vectorize()) {
            (Ok(a), Ok(b)) => a.mat().approx_eq(b.mat(), tol),
            _ => false,
        }
    }

    fn check_dim(&self, op: &'static str, other: &Superoperator) -> Result<(), LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch {
                op,
                left: (self.dim, self.dim),
                right: (other.dim, other.dim),
            });
        }
        Ok(())
    }
}

/// Matrix of a superoperator acting on column-stacked `vec(rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedSuperop {
    dim: usize,
    mat: CMatrix,
}

impl VectorizedSuperop {
    fn check_cap(dim: usize) -> Result<usize, LinalgError> {
        match dim.checked_mul(dim) {
            Some(d2) if d2 <= VEC_DIM_CAP => Ok(d2),
            _ => Err(LinalgError::DimensionCap {
                requested: dim.saturating_mul(dim),
                cap: VEC_DIM_CAP,
            }),
        }
    }

    pub fn from_kraus(dim: usize, kraus: &[CMatrix]) -> Result<Self, LinalgError> {
        let d2 = Self::check_cap(dim)?;
        let mut mat = CMatrix::zeros(d2, d2);
        for k in kraus {
            mat.add_assign(&k.conj().kron_capped(k, VEC_DIM_CAP)?)?;
        }
        Ok(VectorizedSuperop { dim, mat })
    }

    pub fn identity(dim: usize) -> Result<Self, LinalgError> {
        let d2 = Self::check_cap(dim)?;
        Ok(VectorizedSuperop {
            dim,
            mat: CMatrix::identity(d2),
        })
    }

    pub fn zero(dim: usize) -> Result<Self, LinalgError> {
        let d2 = Self::check_cap(dim)?;
        Ok(VectorizedSuperop {
            dim,
            mat: CMatrix::zeros(d2, d2),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn apply_mat(&self, rho: &CMatrix) -> Result<CMatrix, LinalgError> {
        let out = self.mat.mul_vec(&vec_col(rho))?;
        Ok(unvec_col(&out, self.dim))
    }

    pub fn add_assign(&mut self, other: &VectorizedSuperop) -> Result<(), LinalgError> {
        self.mat.add_assign(&other.mat)
    }

    pub fn max_abs_diff(&self, other: &VectorizedSuperop) -> f64 {
        self.mat.max_abs_diff(&other.mat)
    }

    /// Matrix of `self` after the single-Kraus map `rho -> K rho K^dag`.
    ///
    /// Row `r` of `self` is reshaped to `A` and replaced by `vec(K^T A conj(K))`,
    /// which costs `O(d^5)` instead of the `O(d^6)` dense product.
    pub fn after_kraus(&self, k: &CMatrix, exec: Exec) -> Result<VectorizedSuperop, LinalgError> {
        let d = self.dim;
        if k.rows() != d || k.cols() != d {
            return Err(LinalgError::DimensionMismatch {
                op: "after_kraus",
                left: (d, d),
                right: (k.rows(), k.cols()),
            });
        }
        let d2 = d * d;
        let kt = k.transpose();
        let kbar = k.conj();
        let mut out = CMatrix::zeros(d2, d2);
        exec.for_each_row(out.data_mut(), d2, |r, out_row| {
            let row = self.mat.row(r);
            if row.iter().all(|z| *z == ZERO) {
                return;
            }
            let a = unvec_col(row, d);
            let t = kt
                .matmul_with(&a, Exec::Sequential)
                .and_then(|m| m.matmul_with(&kbar, Exec::Sequential))
                .expect("square operands");
            out_row.copy_from_slice(&vec_col(&t));
        });
        Ok(VectorizedSuperop { dim: d, mat: out })
    }

    /// Matrix of `self` after an arbitrary superoperator.
    pub fn after(&self, first: &Superoperator, exec: Exec) -> Result<VectorizedSuperop, LinalgError> {
        let mut acc = VectorizedSuperop::zero(self.dim)?;
        for k in first.kraus() {
            acc.add_assign(&self.after_kraus(k, exec)?)?;
        }
        Ok(acc)
    }

    /// Kraus form recovered from the Choi matrix. Eigenvalues below
    /// `1e-14 * max(1, lambda_max)` are discarded.
    pub fn to_superop(&self) -> Superoperator {
        let d = self.dim;
        let d2 = d * d;
        // choi[(i,a),(j,b)] = E(|i><j|)[a,b], and vec(|i><j|) sits at i + d*j.
        let mut choi = CMatrix::zeros(d2, d2);
        for i in 0..d {
            for j in 0..d {
                let col = i + d * j;
                for a in 0..d {
                    for b in 0..d {
                        choi[(i * d + a, j * d + b)] = self.mat[(a + d * b, col)];
                    }
                }
            }
        }
        let pairs = hermitian_eigen(&choi);
        let top = pairs.last().map_or(0.0, |p| p.0).max(1.0);
        let mut kraus = Vec::new();
        for (lambda, v) in pairs.into_iter().rev() {
            if lambda <= KRAUS_DROP_TOL * top {
                continue;
            }
            let s = lambda.sqrt();
            let mut k = CMatrix::zeros(d, d);
            for i in 0..d {
                for a in 0..d {
                    k[(a, i)] = v[i * d + a] * s;
                }
            }
            kraus.push(k);
        }
        Superoperator::from_parts(d, kraus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ket0() -> DensityMatrix {
        DensityMatrix::basis(0, 1).unwrap()
    }

    #[test]
    fn identity_superop_fixes_states() {
        let rho = DensityMatrix::maximally_mixed(1);
        let out = Superoperator::identity(2).apply(&rho).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn hadamard_on_zero_is_plus_projector() {
        let h = Superoperator::unitary(&gates::hadamard()).unwrap();
        let out = h.apply(&ket0()).unwrap();
        let plus = CMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!(out.mat().approx_eq(&plus, 1e-15));
        let back = h.apply(&out).unwrap();
        assert!(back.mat().approx_eq(ket0().mat(), 1e-15));
    }

    #[test]
    fn x_flips_zero() {
        let x = Superoperator::unitary(&gates::pauli_x()).unwrap();
        let out = x.apply(&ket0()).unwrap();
        assert_eq!(out, DensityMatrix::basis(1, 1).unwrap());
    }

    #[test]
    fn non_unitary_rejected() {
        assert_eq!(
            Superoperator::unitary(&gates::projector(0)),
            Err(LinalgError::NotUnitary)
        );
    }

    #[test]
    fn measurement_branches_split_mixed_state() {
        let (m0, m1) = Superoperator::measurement(0, 1).unwrap();
        let rho = DensityMatrix::maximally_mixed(1);
        assert!((m0.apply(&rho).unwrap().trace() - 0.5).abs() < 1e-15);
        assert!((m1.apply(&rho).unwrap().trace() - 0.5).abs() < 1e-15);
        let plus = Superoperator::unitary(&gates::hadamard())
            .unwrap()
            .apply(&ket0())
            .unwrap();
        assert!((m0.apply(&plus).unwrap().trace() - 0.5).abs() < 1e-15);
        assert!(!m0.is_trace_preserving(1e-10));
        assert!(m0.sum(&m1).unwrap().is_trace_preserving(1e-10));
        assert!(m0.apply(&DensityMatrix::basis(1, 1).unwrap()).unwrap().mat().max_norm() == 0.0);
        assert!(matches!(
            Superoperator::measurement(2, 2),
            Err(LinalgError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn compose_and_sum_match_vectorized_algebra() {
        let x = Superoperator::unitary(&gates::pauli_x()).unwrap();
        let xx = x.compose(&x).unwrap();
        assert!(xx.same_map(&Superoperator::identity(2), 1e-12));

        let (m0, m1) = Superoperator::measurement(0, 1).unwrap();
        assert!(m0.compose(&m1).unwrap().same_map(&Superoperator::zero(2), 1e-12));

        let h = Superoperator::unitary(&gates::hadamard()).unwrap();
        let hm = h.compose(&m1).unwrap();
        let prod = h
            .vectorize()
            .unwrap()
            .mat()
            .matmul(m1.vectorize().unwrap().mat())
            .unwrap();
        assert!(hm.vectorize().unwrap().mat().approx_eq(&prod, 1e-12));
        let s = h.sum(&m1).unwrap();
        let vs = h.vectorize().unwrap().mat().add(m1.vectorize().unwrap().mat()).unwrap();
        assert!(s.vectorize().unwrap().mat().approx_eq(&vs, 1e-12));
    }

    #[test]
    fn vectorized_x_is_x_kron_x() {
        let x = Superoperator::unitary(&gates::pauli_x()).unwrap();
        let xm = gates::pauli_x();
        assert_eq!(
            x.vectorize().unwrap().mat(),
            &xm.kron_capped(&xm, 16).unwrap()
        );
        assert_eq!(
            Superoperator::identity(4).vectorize().unwrap().mat(),
            &CMatrix::identity(16)
        );
    }

    #[test]
    fn after_kraus_matches_dense_product() {
        let h2 = gates::hadamard().kron_capped(&gates::phase_t(), 16).unwrap();
        let cz = gates::cz();
        let base = Superoperator::unitary(&h2).unwrap();
        let v = base.vectorize().unwrap();
        let fast = v.after_kraus(&cz, Exec::default()).unwrap();
        let dense = v
            .mat()
            .matmul(Superoperator::unitary(&cz).unwrap().vectorize().unwrap().mat())
            .unwrap();
        assert!(fast.mat().approx_eq(&dense, 1e-12));
    }

    #[test]
    fn choi_roundtrip_recovers_map() {
        let (m0, _) = Superoperator::measurement(1, 2).unwrap();
        let u = Superoperator::unitary(&gates::cnot()).unwrap();
        let mix = u.sum(&m0.compose(&u).unwrap()).unwrap();
        let back = mix.vectorize().unwrap().to_superop();
        assert!(back.same_map(&mix, 1e-12));
        assert!(back.kraus().len() <= 2);
    }

    #[test]
    fn density_validation() {
        let mut bad = CMatrix::identity(2);
        bad[(1, 1)] = Complex64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(bad).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(2)).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(2).scale(Complex64::new(0.5, 0.0))).is_ok());
    }

    #[test]
    fn trace_range_of_projector() {
        let (m0, _) = Superoperator::measurement(0, 1).unwrap();
        let (lo, hi) = m0.trace_range();
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        assert!(m0.is_trace_non_increasing(1e-9));
    }
}
