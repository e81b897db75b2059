//! Truncated bosonic operators and spin matrices.

use crate::{CMatrix, CVector, QestimError, Result, C64};

/// Annihilation operator on the span of `|0⟩..|n−1⟩`.
pub fn annihilation(n: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation(n: usize) -> CMatrix {
    annihilation(n).adjoint()
}

pub fn fock_state(n: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[k] = C64::new(1.0, 0.0);
    v
}

/// Population of the top two levels.
pub fn top_leakage(v: &CVector) -> f64 {
    let n = v.len();
    v.iter().skip(n.saturating_sub(2)).map(|z| z.norm_sqr()).sum()
}

pub fn check_leakage(v: &CVector, limit: f64) -> Result<()> {
    let leakage = top_leakage(v);
    if leakage > limit {
        return Err(QestimError::Truncation { leakage, limit, trunc_dim: v.len() });
    }
    Ok(())
}

/// Quadratures `X = √(ℏ/2)(a + a†)`, `P = i√(ℏ/2)(a† − a)`.
pub fn quadratures(n: usize, hbar: f64) -> (CMatrix, CMatrix) {
    let a = annihilation(n);
    let ad = a.adjoint();
    let s = (hbar / 2.0).sqrt();
    let x = (&a + &ad) * C64::new(s, 0.0);
    let p = (&ad - &a) * C64::new(0.0, s);
    (x, p)
}

/// Spin operators `(S_x, S_y, S_z)` including the factor `ℏ`, in the basis
/// `|s,s⟩, |s,s−1⟩, …, |s,−s⟩`.
#[derive(Debug, Clone)]
pub struct SpinMatrices {
    pub twice_s: u32,
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
}

impl SpinMatrices {
    pub fn new(twice_s: u32, hbar: f64) -> Self {
        let n = twice_s as usize + 1;
        let s = twice_s as f64 / 2.0;
        let mut sp = CMatrix::zeros(n, n);
        let mut sz = CMatrix::zeros(n, n);
        for k in 0..n {
            let m = s - k as f64;
            sz[(k, k)] = C64::new(hbar * m, 0.0);
            if k > 0 {
                // S+|s,m⟩ = ℏ√(s(s+1) − m(m+1)) |s,m+1⟩
                sp[(k - 1, k)] = C64::new(hbar * (s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
            }
        }
        let sm = sp.adjoint();
        let sx = (&sp + &sm) * C64::new(0.5, 0.0);
        let sy = (&sp - &sm) * C64::new(0.0, -0.5);
        SpinMatrices { twice_s, sx, sy, sz }
    }

    pub fn dim(&self) -> usize {
        self.twice_s as usize + 1
    }

    /// Index of `|s, m⟩` given `2m`.
    pub fn index_of(&self, twice_m: i64) -> Option<usize> {
        let ts = self.twice_s as i64;
        if twice_m.abs() > ts || (ts - twice_m) % 2 != 0 {
            return None;
        }
        Some(((ts - twice_m) / 2) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{commutator, max_abs};

    #[test]
    fn ladder_commutator_away_from_edge() {
        let n = 10;
        let a = annihilation(n);
        let c = commutator(&a, &creation(n));
        for k in 0..n - 1 {
            assert!((c[(k, k)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn spin_algebra() {
        for ts in 1..6 {
            let s = SpinMatrices::new(ts, 1.0);
            let lhs = commutator(&s.sx, &s.sy);
            let rhs = &s.sz * C64::new(0.0, 1.0);
            assert!(max_abs(&(lhs - rhs)) < 1e-12);
            let casimir = &s.sx * &s.sx + &s.sy * &s.sy + &s.sz * &s.sz;
            let sv = ts as f64 / 2.0;
            let expect = CMatrix::identity(s.dim(), s.dim()) * C64::new(sv * (sv + 1.0), 0.0);
            assert!(max_abs(&(casimir - expect)) < 1e-12);
        }
    }

    #[test]
    fn spin_indices() {
        let s = SpinMatrices::new(3, 1.0);
        assert_eq!(s.index_of(3), Some(0));
        assert_eq!(s.index_of(-3), Some(3));
        assert_eq!(s.index_of(2), None);
        assert_eq!(s.index_of(5), None);
    }

    #[test]
    fn quadrature_commutator() {
        let (x, p) = quadratures(12, 2.0);
        let c = commutator(&x, &p);
        for k in 0..11 {
            assert!((c[(k, k)] - C64::new(0.0, 2.0)).norm() < 1e-12);
        }
    }
}
