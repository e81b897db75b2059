//! Dense complex linear algebra and validated quantum-state types.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, QestimError, RMatrix, Result, Tolerances, C64};

/// Largest absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_real(a: &RMatrix) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖A − A†‖_max`.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(a - a.adjoint()))
}

/// `(A + A†)/2`.
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Checks that `a` is Hermitian to `tol` relative to its scale and returns
/// the symmetrized matrix.
pub fn validated_hermitian(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(QestimError::validation(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QestimError::validation("matrix has non-finite entries"));
    }
    let dev = hermitian_deviation(a);
    if dev > tol * max_abs(a).max(1.0) {
        return Err(QestimError::NotHermitian { deviation: dev });
    }
    Ok(symmetrize(a))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn to_complex(a: &RMatrix) -> CMatrix {
    a.map(|x| C64::new(x, 0.0))
}

pub fn real_part(a: &CMatrix) -> RMatrix {
    a.map(|z| z.re)
}

pub fn imag_part(a: &CMatrix) -> RMatrix {
    a.map(|z| z.im)
}

/// Outer product `|u⟩⟨v|`.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

/// `⟨u|v⟩`.
pub fn inner(u: &CVector, v: &CVector) -> C64 {
    u.dotc(v)
}

/// Gram matrix `[⟨x_i|y_j⟩]` of two ordered systems of vectors.
pub fn gram(xs: &[CVector], ys: &[CVector]) -> CMatrix {
    CMatrix::from_fn(xs.len(), ys.len(), |i, j| xs[i].dotc(&ys[j]))
}

/// Result of a Hermitian eigendecomposition `A = U diag(λ) U†`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Unitary whose columns are the eigenvectors, in the order of `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// `U f(Λ) U†` for a real function of the eigenvalues.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let c = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= c;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|l| C64::new(l, 0.0))
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues and a
/// fixed phase convention: the first component of each eigenvector whose
/// modulus exceeds `1e-10` is made real positive.
pub fn hermitian_eigendecomposition(a: &CMatrix) -> Result<HermitianEigen> {
    hermitian_eigendecomposition_with(a, &Tolerances::default())
}

pub fn hermitian_eigendecomposition_with(a: &CMatrix, tol: &Tolerances) -> Result<HermitianEigen> {
    let h = validated_hermitian(a, tol.hermitian)?;
    let n = h.nrows();
    if n == 0 {
        return Ok(HermitianEigen { values: vec![], vectors: CMatrix::zeros(0, 0) });
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut col = eig.eigenvectors.column(src).into_owned();
        let norm = col.norm();
        if norm > 0.0 {
            col /= C64::new(norm, 0.0);
        }
        if let Some(z) = col.iter().find(|z| z.norm() > 1e-10) {
            let phase = z.conj() / z.norm();
            col *= phase;
        }
        vectors.set_column(k, &col);
    }
    Ok(HermitianEigen { values, vectors })
}

/// `exp(i·scale·H)` for Hermitian `H`, via the eigendecomposition.
pub fn matrix_exponential_skew(h: &CMatrix, scale: f64) -> Result<CMatrix> {
    let eig = hermitian_eigendecomposition(h)?;
    Ok(eig.map(|l| C64::from_polar(1.0, scale * l)))
}

/// Square root of a positive semidefinite Hermitian matrix (negative
/// eigenvalues clipped to zero).
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eigendecomposition(a)?;
    Ok(eig.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)))
}

/// Output of [`gram_schmidt_real_coefficients`].
#[derive(Debug, Clone)]
pub struct RealSchmidt {
    /// Orthonormal basis `b^1..b^k`.
    pub basis: Vec<CVector>,
    /// `coefficients[(j, i)]` is the real coefficient of `b^j` in input `i`.
    pub coefficients: RMatrix,
    /// Largest imaginary part discarded from the coefficients.
    pub max_imag: f64,
    /// Indices of inputs dropped as linearly dependent.
    pub dropped: Vec<usize>,
}

impl RealSchmidt {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

/// Schmidt orthogonalization of a system whose Gram matrix is real. Every
/// input is expanded in the output basis with real coefficients.
pub fn gram_schmidt_real_coefficients(vectors: &[CVector], tol: &Tolerances) -> Result<RealSchmidt> {
    let g = gram(vectors, vectors);
    let max_imag = g.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    let scale = g.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    if max_imag > tol.real_gram * scale {
        return Err(QestimError::NotRealGram { max_imag });
    }
    let (basis, coeffs, dropped) = modified_gram_schmidt(vectors, tol.rank);
    let mut max_coeff_imag = 0.0f64;
    let coefficients = RMatrix::from_fn(coeffs.nrows(), coeffs.ncols(), |j, i| {
        let z = coeffs[(j, i)];
        max_coeff_imag = max_coeff_imag.max(z.im.abs());
        z.re
    });
    Ok(RealSchmidt { basis, coefficients, max_imag: max_coeff_imag, dropped })
}

/// Complex modified Gram–Schmidt with one re-orthogonalization pass.
/// Returns the basis, the complex coefficient matrix (rank × n) and the
/// indices dropped as dependent (residual below `rank_tol` times the input
/// norm, or below `rank_tol` absolutely for tiny inputs).
pub fn modified_gram_schmidt(vectors: &[CVector], rank_tol: f64) -> (Vec<CVector>, CMatrix, Vec<usize>) {
    let mut basis: Vec<CVector> = Vec::new();
    let mut coeff_cols: Vec<Vec<C64>> = Vec::new();
    let mut dropped = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        let mut r = v.clone();
        let mut c = vec![C64::new(0.0, 0.0); basis.len() + 1];
        for _pass in 0..2 {
            for (k, b) in basis.iter().enumerate() {
                let proj = b.dotc(&r);
                c[k] += proj;
                r -= b * proj;
            }
        }
        let norm = r.norm();
        if norm > rank_tol * v.norm().max(1.0) {
            c[basis.len()] = C64::new(norm, 0.0);
            basis.push(r / C64::new(norm, 0.0));
        } else {
            c.pop();
            dropped.push(i);
        }
        coeff_cols.push(c);
    }
    let k = basis.len();
    let mut coeffs = CMatrix::zeros(k, vectors.len());
    for (i, col) in coeff_cols.iter().enumerate() {
        for (j, z) in col.iter().enumerate() {
            coeffs[(j, i)] = *z;
        }
    }
    (basis, coeffs, dropped)
}

/// Symmetric eigendecomposition of a real matrix, ascending.
pub fn real_symmetric_eigen(a: &RMatrix) -> (Vec<f64>, RMatrix) {
    let s = (a + a.transpose()) * 0.5;
    let n = s.nrows();
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut vecs = RMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        vecs.set_column(k, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// `f(A)` for a real symmetric matrix.
pub fn real_symmetric_map(a: &RMatrix, f: impl Fn(f64) -> f64) -> RMatrix {
    let (vals, vecs) = real_symmetric_eigen(a);
    let d = RMatrix::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|&l| f(l))));
    &vecs * d * vecs.transpose()
}

/// Inverse of a real symmetric positive definite matrix; `None` if singular.
pub fn spd_inverse(a: &RMatrix) -> Option<RMatrix> {
    let s = (a + a.transpose()) * 0.5;
    s.cholesky().map(|c| c.inverse())
}

/// A pure or mixed quantum state that has passed validation.
#[derive(Debug, Clone)]
pub enum QuantumState {
    Pure(CVector),
    Mixed(CMatrix),
}

impl QuantumState {
    pub fn pure(v: CVector, tol: &Tolerances) -> Result<Self> {
        if v.is_empty() {
            return Err(QestimError::validation("empty state vector"));
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QestimError::validation("state vector has non-finite entries"));
        }
        let n2 = v.norm_squared();
        if (n2 - 1.0).abs() > tol.normalization {
            return Err(QestimError::validation(format!("state vector norm² = {n2:.15} is not 1")));
        }
        Ok(QuantumState::Pure(v))
    }

    /// Normalizes before validating.
    pub fn pure_normalized(v: CVector, tol: &Tolerances) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(QestimError::validation("cannot normalize a zero or non-finite vector"));
        }
        Self::pure(v / C64::new(n, 0.0), tol)
    }

    pub fn mixed(rho: CMatrix, tol: &Tolerances) -> Result<Self> {
        let rho = validated_hermitian(&rho, tol.hermitian)?;
        let tr = rho.trace().re;
        if (tr - 1.0).abs() > tol.normalization {
            return Err(QestimError::validation(format!("density matrix trace {tr:.15} is not 1")));
        }
        let eig = hermitian_eigendecomposition_with(&rho, tol)?;
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min < -tol.psd {
            return Err(QestimError::validation(format!("density matrix has negative eigenvalue {min:.3e}")));
        }
        Ok(QuantumState::Mixed(rho))
    }

    /// Like [`QuantumState::mixed`] but also requires every eigenvalue to be
    /// at least the faithfulness threshold.
    pub fn faithful(rho: CMatrix, tol: &Tolerances) -> Result<Self> {
        let s = Self::mixed(rho, tol)?;
        let min = s.min_eigenvalue()?;
        if min < tol.faithful {
            return Err(QestimError::NotFaithful { min_eigenvalue: min, threshold: tol.faithful });
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Mixed(r) => r.nrows(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, QuantumState::Pure(_))
    }

    pub fn density(&self) -> CMatrix {
        match self {
            QuantumState::Pure(v) => outer(v, v),
            QuantumState::Mixed(r) => r.clone(),
        }
    }

    pub fn vector(&self) -> Option<&CVector> {
        match self {
            QuantumState::Pure(v) => Some(v),
            QuantumState::Mixed(_) => None,
        }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        match self {
            QuantumState::Pure(v) => Ok(if v.len() > 1 { 0.0 } else { 1.0 }),
            QuantumState::Mixed(r) => {
                Ok(hermitian_eigendecomposition(r)?.values.first().copied().unwrap_or(0.0))
            }
        }
    }

    /// Number of eigenvalues above `threshold`.
    pub fn rank(&self, threshold: f64) -> Result<usize> {
        match self {
            QuantumState::Pure(_) => Ok(1),
            QuantumState::Mixed(r) => {
                Ok(hermitian_eigendecomposition(r)?.values.iter().filter(|&&l| l > threshold).count())
            }
        }
    }

    /// `tr ρ A`.
    pub fn expectation(&self, a: &CMatrix) -> C64 {
        match self {
            QuantumState::Pure(v) => v.dotc(&(a * v)),
            QuantumState::Mixed(r) => (r * a).trace(),
        }
    }
}

/// A `d × r` matrix `W` with `WW†` a density matrix.
#[derive(Debug, Clone)]
pub struct Purification {
    w: CMatrix,
}

impl Purification {
    pub fn new(w: CMatrix, tol: &Tolerances) -> Result<Self> {
        let tr = (&w * w.adjoint()).trace().re;
        if (tr - 1.0).abs() > tol.normalization {
            return Err(QestimError::validation(format!("purification has tr WW† = {tr:.15}")));
        }
        Ok(Purification { w })
    }

    /// `W = ρ^{1/2}`.
    pub fn from_density(rho: &CMatrix) -> Result<Self> {
        Ok(Purification { w: psd_sqrt(rho)? })
    }

    pub fn from_vector(v: &CVector) -> Self {
        Purification { w: CMatrix::from_column_slice(v.len(), 1, v.as_slice()) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.w
    }

    pub fn into_matrix(self) -> CMatrix {
        self.w
    }

    /// `π(W) = WW†`.
    pub fn density(&self) -> CMatrix {
        &self.w * self.w.adjoint()
    }
}

/// Flattens a complex vector into `[re, im]` pairs.
pub fn vector_to_pairs(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn pairs_to_vector(p: &[[f64; 2]]) -> CVector {
    DVector::from_iterator(p.len(), p.iter().map(|&[re, im]| C64::new(re, im)))
}

pub fn matrix_to_pairs(a: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect()
}

pub fn pairs_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(QestimError::validation("ragged complex matrix"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn real_matrix_to_rows(a: &RMatrix) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

pub fn rows_to_real_matrix(rows: &[Vec<f64>]) -> Result<RMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(QestimError::validation("ragged real matrix"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Serializable complex number as an `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair(pub [f64; 2]);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        symmetrize(&a)
    }

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        a.qr().q()
    }

    #[test]
    fn diagonal_eigen() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
        let e = hermitian_eigendecomposition(&a).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0]);
        assert!((e.vectors[(1, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((e.vectors[(0, 1)] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn pauli_x_spectrum() {
        let sx = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let e = hermitian_eigendecomposition(&sx).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction_from_known_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(6, &mut rng);
        let lam: Vec<f64> = (0..6).map(|k| k as f64 - 2.5 + 0.1 * k as f64 * k as f64).collect();
        let d = CMatrix::from_diagonal(&CVector::from_iterator(6, lam.iter().map(|&l| c(l, 0.0))));
        let a = &u * d * u.adjoint();
        let e = hermitian_eigendecomposition(&a).unwrap();
        let err = (e.reconstruct() - &a).norm() / a.norm();
        assert!(err <= 1e-10, "reconstruction error {err}");
        let mut sorted = lam.clone();
        sorted.sort_by(f64::total_cmp);
        for (x, y) in e.values.iter().zip(&sorted) {
            assert!((x - y).abs() < 1e-12);
        }
        // phase convention
        for k in 0..6 {
            let z = e.vectors.column(k).iter().copied().find(|z| z.norm() > 1e-10).unwrap();
            assert!(z.im.abs() < 1e-14 && z.re > 0.0);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(hermitian_eigendecomposition(&a), Err(QestimError::NotHermitian { .. })));
    }

    #[test]
    fn exp_sigma_z_pi_is_minus_identity() {
        let sz = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1., 0.), c(-1., 0.)]));
        let u = matrix_exponential_skew(&sz, std::f64::consts::PI).unwrap();
        let target = -CMatrix::identity(2, 2);
        assert!(max_abs(&(u - target)) < 1e-14);
    }

    #[test]
    fn exp_zero_is_identity() {
        let u = matrix_exponential_skew(&CMatrix::zeros(3, 3), 1.3).unwrap();
        assert!(max_abs(&(u - CMatrix::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn exp_inverse_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 5, 9] {
            let h = random_hermitian(n, &mut rng);
            let u = matrix_exponential_skew(&h, 1.0).unwrap();
            let v = matrix_exponential_skew(&h, -1.0).unwrap();
            assert!(max_abs(&(&u * &v - CMatrix::identity(n, n))) <= 1e-10);
            let sv = u.singular_values();
            assert!(sv.iter().all(|s| (s - 1.0).abs() <= 1e-10));
        }
    }

    #[test]
    fn schmidt_identity_basis() {
        let e0 = CVector::from_vec(vec![c(1., 0.), c(0., 0.)]);
        let e1 = CVector::from_vec(vec![c(0., 0.), c(1., 0.)]);
        let r = gram_schmidt_real_coefficients(&[e0.clone(), e1.clone()], &Tolerances::default()).unwrap();
        assert_eq!(r.rank(), 2);
        assert!((r.coefficients.clone() - RMatrix::identity(2, 2)).abs().max() < 1e-15);
    }

    #[test]
    fn schmidt_two_dimensional_real_case() {
        let s = 1.0 / 2f64.sqrt();
        let v0 = CVector::from_vec(vec![c(1., 0.), c(0., 0.)]);
        let v1 = CVector::from_vec(vec![c(s, 0.), c(s, 0.)]);
        let r = gram_schmidt_real_coefficients(&[v0, v1], &Tolerances::default()).unwrap();
        assert!((r.basis[1][1] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((r.coefficients[(0, 1)] - s).abs() < 1e-14);
        assert!((r.coefficients[(1, 1)] - s).abs() < 1e-14);
        assert!(r.max_imag < 1e-14);
    }

    #[test]
    fn schmidt_random_real_span_has_real_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(6, &mut rng);
        let frame: Vec<CVector> = (0..3).map(|k| u.column(k).into_owned()).collect();
        let inputs: Vec<CVector> = (0..5)
            .map(|_| {
                frame.iter().fold(CVector::zeros(6), |acc, f| acc + f * c(rng.random_range(-1.0..1.0), 0.0))
            })
            .collect();
        let r = gram_schmidt_real_coefficients(&inputs, &Tolerances::default()).unwrap();
        assert_eq!(r.rank(), 3);
        assert_eq!(r.dropped, vec![3, 4]);
        assert!(r.max_imag <= 1e-10);
        let b = CMatrix::from_columns(&r.basis);
        assert!(max_abs(&(b.adjoint() * &b - CMatrix::identity(3, 3))) <= 1e-10);
        for (i, v) in inputs.iter().enumerate() {
            let rebuilt = r.basis.iter().enumerate().fold(CVector::zeros(6), |acc, (j, bj)| {
                acc + bj * c(r.coefficients[(j, i)], 0.0)
            });
            assert!((rebuilt - v).norm() < 1e-10);
        }
    }

    #[test]
    fn schmidt_rejects_complex_gram() {
        let v0 = CVector::from_vec(vec![c(1., 0.), c(0., 0.)]);
        let v1 = CVector::from_vec(vec![c(0., 1.), c(1., 0.)]);
        let err = gram_schmidt_real_coefficients(&[v0, v1], &Tolerances::default()).unwrap_err();
        assert!(matches!(err, QestimError::NotRealGram { .. }));
    }

    #[test]
    fn state_validation() {
        let tol = Tolerances::default();
        assert!(QuantumState::pure(CVector::from_vec(vec![c(1.0, 0.0), c(0.1, 0.0)]), &tol).is_err());
        let rho = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.7, 0.), c(0.3, 0.)]));
        assert!(QuantumState::faithful(rho, &tol).is_ok());
        let rank1 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.), c(0.0, 0.)]));
        assert!(matches!(QuantumState::faithful(rank1, &tol), Err(QestimError::NotFaithful { .. })));
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.1, 0.), c(-0.1, 0.)]));
        assert!(QuantumState::mixed(neg, &tol).is_err());
    }

    #[test]
    fn purification_of_density() {
        let rho = CMatrix::from_row_slice(2, 2, &[c(0.6, 0.), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.)]);
        let w = Purification::from_density(&rho).unwrap();
        assert!(max_abs(&(w.density() - rho)) < 1e-14);
    }
}
