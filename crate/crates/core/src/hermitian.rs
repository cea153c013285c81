//! Dense small complex Hermitian matrices.
//!
//! Matrices here are tiny (N is the channel count, rarely above 8), so the
//! eigensolver is a cyclic complex Jacobi iteration.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::Tolerances;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Square complex Hermitian matrix. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: CMatrix,
}

/// Ascending eigenvalues with orthonormal eigenvectors stored as matrix columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

/// Largest entrywise distance between `a` and its conjugate transpose.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((a[(j, k)] - a[(k, j)].conj()).norm());
        }
    }
    worst
}

impl HermitianMatrix {
    /// Builds from a square complex matrix, symmetrizing defects below
    /// `tol.hermitian_defect` and rejecting anything larger.
    pub fn new(a: CMatrix, tol: &Tolerances) -> Result<Self> {
        Self::with_tolerance(a, tol.hermitian_defect)
    }

    pub fn with_tolerance(a: CMatrix, defect_tol: f64) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
        }
        if a.nrows() == 0 {
            return Err(Error::InvalidProblem("matrix dimension must be at least 1".into()));
        }
        let defect = hermitian_defect(&a);
        if !defect.is_finite() || defect > defect_tol {
            return Err(Error::NotHermitian { defect, tol: defect_tol });
        }
        Ok(Self::symmetrized(a))
    }

    /// Symmetrizes unconditionally: (A + A*)/2.
    pub fn symmetrized(a: CMatrix) -> Self {
        let adj = a.adjoint();
        let mut inner = (a + adj) * Complex64::new(0.5, 0.0);
        for j in 0..inner.nrows() {
            inner[(j, j)].im = 0.0;
        }
        Self { inner }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { inner: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { inner: CMatrix::identity(dim, dim) }
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        Self::from_real_diagonal(&vec![value; dim])
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut inner = CMatrix::zeros(n, n);
        for (j, &d) in diag.iter().enumerate() {
            inner[(j, j)] = Complex64::new(d, 0.0);
        }
        Self { inner }
    }

    /// Real symmetric input given as rows.
    pub fn from_real_rows(rows: &[Vec<f64>], tol: &Tolerances) -> Result<Self> {
        let n = rows.len();
        let mut a = CMatrix::zeros(n, n);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            for (k, &v) in row.iter().enumerate() {
                a[(j, k)] = Complex64::new(v, 0.0);
            }
        }
        Self::new(a, tol)
    }

    /// Row-major (re, im) pairs, the layout used by problem files.
    pub fn from_row_major_pairs(dim: usize, pairs: &[[f64; 2]], tol: &Tolerances) -> Result<Self> {
        if pairs.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: pairs.len() });
        }
        let a = CMatrix::from_fn(dim, dim, |j, k| {
            let [re, im] = pairs[j * dim + k];
            Complex64::new(re, im)
        });
        Self::new(a, tol)
    }

    pub fn to_row_major_pairs(&self) -> Vec<[f64; 2]> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                let z = self.inner[(j, k)];
                out.push([z.re, z.im]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> CMatrix {
        self.inner
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.inner[(j, k)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|j| self.inner[(j, j)].re).sum()
    }

    /// Spectral norm via the eigenvalues.
    pub fn op_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|k| j == k || self.inner[(j, k)].norm() <= tol))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.inner[(j, j)].re).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { inner: &self.inner + &other.inner }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { inner: &self.inner - &other.inner }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { inner: &self.inner * Complex64::new(s, 0.0) }
    }

    pub fn shift(&self, s: f64) -> Self {
        let mut inner = self.inner.clone();
        for j in 0..inner.nrows() {
            inner[(j, j)] += Complex64::new(s, 0.0);
        }
        Self { inner }
    }

    /// A² with Hermiticity restored exactly.
    pub fn square(&self) -> Self {
        Self::symmetrized(&self.inner * &self.inner)
    }

    /// U* A U for a unitary U.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self::symmetrized(u.adjoint() * &self.inner * u)
    }

    pub fn eig(&self) -> EigenDecomposition {
        jacobi_eig(&self.inner, &Tolerances::default())
    }

    pub fn eig_with(&self, tol: &Tolerances) -> EigenDecomposition {
        jacobi_eig(&self.inner, tol)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eig().eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("dim >= 1")
    }

    /// Tr Aᵖ as the sum of eigenvalue powers.
    pub fn trace_power(&self, p: u32) -> f64 {
        self.eigenvalues().iter().map(|v| v.powi(p as i32)).sum()
    }

    /// Number of eigenvalues with |μ| ≤ tol.
    pub fn kernel_dim(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|v| v.abs() <= tol).count()
    }

    /// Applies a real function to the eigenvalues.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        let e = self.eig();
        e.rebuild(e.eigenvalues.iter().map(|&v| f(v)))
    }
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// U diag(values) U*.
    pub fn rebuild(&self, values: impl IntoIterator<Item = f64>) -> HermitianMatrix {
        let u = &self.eigenvectors;
        let n = u.nrows();
        let mut scaled = u.clone();
        for (k, v) in values.into_iter().enumerate().take(n) {
            scaled.column_mut(k).scale_mut(v);
        }
        HermitianMatrix::symmetrized(scaled * u.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.rebuild(self.eigenvalues.iter().copied())
    }
}

/// Cyclic Jacobi on a complex Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot a_pq with a diagonal
/// unitary and then applies the classical real rotation.
pub fn jacobi_eig(a: &CMatrix, tol: &Tolerances) -> EigenDecomposition {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = CMatrix::identity(n, n);
    let total: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let threshold = tol.jacobi_rel * total.max(f64::MIN_POSITIVE);

    for _ in 0..tol.jacobi_max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|j| (0..n).filter(move |&k| k != j).map(move |k| (j, k)))
            .map(|(j, k)| m[(j, k)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let abs = apq.norm();
                if abs <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / abs;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * abs);
                let t = if theta.is_infinite() {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let cph = phase.conj();
                // U = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] acting on columns p, q.
                for k in 0..n {
                    let mp = m[(k, p)];
                    let mq = m[(k, q)];
                    m[(k, p)] = mp * c - mq * cph * s;
                    m[(k, q)] = mp * s + mq * cph * c;
                }
                for k in 0..n {
                    let mp = m[(p, k)];
                    let mq = m[(q, k)];
                    m[(p, k)] = mp * c - mq * phase * s;
                    m[(q, k)] = mp * s + mq * phase * c;
                }
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
                m[(p, p)].im = 0.0;
                m[(q, q)].im = 0.0;
                for k in 0..n {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = vp * c - vq * cph * s;
                    v[(k, q)] = vp * s + vq * cph * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].re.total_cmp(&m[(y, y)].re));
    let eigenvalues = order.iter().map(|&k| m[(k, k)].re).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    EigenDecomposition { eigenvalues, eigenvectors }
}

impl Serialize for HermitianMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major_pairs().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        let dim = (pairs.len() as f64).sqrt().round() as usize;
        HermitianMatrix::from_row_major_pairs(dim, &pairs, &Tolerances::default())
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn real(rows: &[Vec<f64>]) -> HermitianMatrix {
        HermitianMatrix::from_real_rows(rows, &Tolerances::default()).unwrap()
    }

    fn random_hermitian(n: usize, vals: &[f64]) -> HermitianMatrix {
        let mut a = CMatrix::zeros(n, n);
        let mut it = vals.iter().cycle();
        for j in 0..n {
            a[(j, j)] = Complex64::new(*it.next().unwrap(), 0.0);
            for k in (j + 1)..n {
                let z = Complex64::new(*it.next().unwrap(), *it.next().unwrap());
                a[(j, k)] = z;
                a[(k, j)] = z.conj();
            }
        }
        HermitianMatrix::symmetrized(a)
    }

    /// Unitary from the QR factor of a random complex matrix.
    fn random_unitary(n: usize, vals: &[f64]) -> CMatrix {
        let mut it = vals.iter().cycle();
        let g = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(*it.next().unwrap(), *it.next().unwrap())
        }) + CMatrix::identity(n, n) * Complex64::new(0.1, 0.0);
        g.qr().q()
    }

    #[test]
    fn identity_eigenvalues() {
        let e = HermitianMatrix::identity(2).eigenvalues();
        assert_eq!(e, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_eigenvalues() {
        let e = HermitianMatrix::from_real_diagonal(&[0.5, -1.0]).eigenvalues();
        assert_eq!(e, vec![-1.0, 0.5]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let e = real(&[vec![-1.0, 0.5], vec![0.5, -1.0]]).eigenvalues();
        assert!((e[0] + 1.5).abs() < 1e-14);
        assert!((e[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn complex_entries() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        let e = HermitianMatrix::new(a, &Tolerances::default()).unwrap().eig();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn trace_power_cases() {
        let (sigma, alpha) = (-1.0, 2.0);
        let s = HermitianMatrix::from_real_diagonal(&[sigma, -alpha * sigma]);
        let expected: f64 = sigma.powi(3) * (1.0 - alpha.powi(3));
        assert!((s.trace_power(3) - expected).abs() < 1e-12);
        assert_eq!(expected, 7.0);
        assert_eq!(HermitianMatrix::zeros(3).trace_power(2), 0.0);
        let x = real(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!((x.trace_power(2) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_dim_cases() {
        assert_eq!(HermitianMatrix::identity(2).kernel_dim(1e-8), 0);
        assert_eq!(HermitianMatrix::from_real_diagonal(&[0.0, 3.0]).kernel_dim(1e-8), 1);
        assert_eq!(HermitianMatrix::from_real_diagonal(&[1e-10, 1e-10]).kernel_dim(1e-8), 2);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        assert!(matches!(
            HermitianMatrix::new(a, &Tolerances::default()),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn symmetrizes_tiny_defect() {
        let mut a = CMatrix::identity(2, 2);
        a[(0, 1)] = Complex64::new(1e-13, 0.0);
        let h = HermitianMatrix::new(a, &Tolerances::default()).unwrap();
        assert_eq!(h.get(0, 1), h.get(1, 0).conj());
    }

    proptest! {
        #[test]
        fn trace_matches_eigen_sum(n in 1usize..6, vals in prop::collection::vec(-3.0f64..3.0, 40)) {
            let a = random_hermitian(n, &vals);
            let e = a.eig();
            let scale = 1.0 + a.frobenius_norm();
            prop_assert!((a.trace() - e.eigenvalues.iter().sum::<f64>()).abs() <= 1e-10 * scale);
            let rec = e.reconstruct();
            prop_assert!(rec.sub(&a).frobenius_norm() <= 1e-10 * scale);
            let gram = e.eigenvectors.adjoint() * &e.eigenvectors;
            let err = (gram - CMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-10);
        }

        #[test]
        fn unitary_invariance(n in 2usize..4, vals in prop::collection::vec(-2.0f64..2.0, 40),
                              uvals in prop::collection::vec(-1.0f64..1.0, 40)) {
            let a = random_hermitian(n, &vals);
            let u = random_unitary(n, &uvals);
            let b = a.conjugate_by(&u);
            let ea = a.eigenvalues();
            let eb = b.eigenvalues();
            for (x, y) in ea.iter().zip(&eb) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}
