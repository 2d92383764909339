//! Dense symmetric linear algebra used throughout the crate.
//!
//! Everything here sits on top of `nalgebra`. The wrappers pin down the
//! contracts the rest of the crate relies on: symmetric inputs, a
//! scale-invariant singularity cutoff, and log-space determinants.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `lambda_min <= SINGULAR_RTOL * lambda_max` declares a PSD matrix singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

const SYMMETRY_RTOL: f64 = 1e-12;
const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITERS: usize = 10_000;

/// A square symmetric matrix. Construction averages `(M + Mᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `m`. Fails if `m` is not square or is asymmetric beyond
    /// `1e-12 * (1 + |m_ij|)`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let d = m.nrows();
        for i in 0..d {
            for j in (i + 1)..d {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::invalid("matrix has non-finite entries"));
                }
                if (a - b).abs() > SYMMETRY_RTOL * (1.0 + a.abs()) {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages `m` with its transpose without checking the asymmetry.
    /// For sums of outer products where drift is expected.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn identity(d: usize) -> Self {
        SymMatrix(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix(DMatrix::zeros(d, d))
    }

    pub fn scaled_identity(d: usize, s: f64) -> Self {
        SymMatrix(DMatrix::identity(d, d) * s)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix(&self.0 * s)
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }

    /// `self + x xᵀ`.
    pub fn add_outer(&self, x: &[f64], weight: f64) -> SymMatrix {
        let mut m = self.0.clone();
        add_outer_in_place(&mut m, x, weight);
        SymMatrix(m)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

pub(crate) fn add_outer_in_place(m: &mut DMatrix<f64>, x: &[f64], weight: f64) {
    let d = x.len();
    for i in 0..d {
        let wi = weight * x[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            m[(i, j)] += wi * x[j];
        }
    }
}

/// Eigenvalues in nonincreasing order with matching orthonormal columns.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPair {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True when the smallest eigenvalue is below the relative cutoff.
    pub fn is_singular(&self) -> bool {
        let max = self.max_value();
        max <= 0.0 || self.min_value() <= SINGULAR_RTOL * max
    }
}

pub fn sym_eigen(m: &SymMatrix) -> Result<EigenPair> {
    let d = m.dim();
    if d == 0 {
        return Ok(EigenPair {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = m
        .0
        .clone()
        .try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITERS)
        .ok_or(Error::NumericalFailure)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok(EigenPair { values, vectors })
}

/// Spectral factor of a PSD matrix that is nonsingular to tolerance.
///
/// Holds the decomposition once so repeated solves, inverses, square roots
/// and log-determinants share it.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    eig: EigenPair,
}

impl PsdFactor {
    pub fn new(m: &SymMatrix) -> Result<Self> {
        let eig = sym_eigen(m)?;
        if eig.is_singular() {
            return Err(Error::SingularMatrix);
        }
        Ok(PsdFactor { eig })
    }

    pub fn dim(&self) -> usize {
        self.eig.values.len()
    }

    pub fn eigen(&self) -> &EigenPair {
        &self.eig
    }

    pub fn logdet(&self) -> f64 {
        self.eig.values.iter().map(|v| v.ln()).sum()
    }

    /// `V f(Λ) Vᵀ` for a spectral function `f`.
    fn spectral(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eig.vectors;
        let mut scaled = v.clone();
        for (j, &lam) in self.eig.values.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * v.transpose()
    }

    pub fn inverse(&self) -> SymMatrix {
        SymMatrix::symmetrized(self.spectral(|l| 1.0 / l))
    }

    pub fn inv_sqrt(&self) -> SymMatrix {
        SymMatrix::symmetrized(self.spectral(|l| 1.0 / l.sqrt()))
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let v = &self.eig.vectors;
        let mut coeffs = v.transpose() * rhs;
        for (j, &lam) in self.eig.values.iter().enumerate() {
            coeffs.row_mut(j).scale_mut(1.0 / lam);
        }
        v * coeffs
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let v = &self.eig.vectors;
        let mut coeffs = v.transpose() * rhs;
        for (c, &lam) in coeffs.iter_mut().zip(self.eig.values.iter()) {
            *c /= lam;
        }
        v * coeffs
    }

    /// `tr(M⁻¹)`.
    pub fn trace_inverse(&self) -> f64 {
        self.eig.values.iter().map(|l| 1.0 / l).sum()
    }
}

/// Solves `m · X = rhs` for PSD, numerically nonsingular `m`.
pub fn psd_solve(m: &SymMatrix, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rhs.nrows() != m.dim() {
        return Err(Error::invalid(format!(
            "rhs has {} rows, matrix is {}x{}",
            rhs.nrows(),
            m.dim(),
            m.dim()
        )));
    }
    Ok(PsdFactor::new(m)?.solve(rhs))
}

/// `ln det(m)` for PSD `m`; `-inf` when singular to tolerance.
pub fn logdet(m: &SymMatrix) -> f64 {
    if m.dim() == 0 {
        return 0.0;
    }
    match PsdFactor::new(m) {
        Ok(f) => f.logdet(),
        Err(_) => f64::NEG_INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(d: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::symmetrized(&g * g.transpose() + DMatrix::identity(d, d) * 0.1)
    }

    #[test]
    fn identity_spectrum() {
        let e = sym_eigen(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 1.0, 1.0]);
        let vtv = e.vectors.transpose() * &e.vectors;
        assert!((vtv - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn diagonal_spectrum_sorted() {
        let e = sym_eigen(&SymMatrix::from_diagonal(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values.as_slice(), &[3.0, 1.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((e.vectors[(0, 1)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_symmetric_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-2.0..2.0));
        let m = SymMatrix::symmetrized(g);
        let e = sym_eigen(&m).unwrap();
        let resid = (e.reconstruct() - m.as_matrix()).amax();
        assert!(resid <= 1e-8 * m.max_abs(), "residual {resid}");
        let ortho = (e.vectors.transpose() * &e.vectors - DMatrix::identity(5, 5)).amax();
        assert!(ortho <= 1e-8);
        for w in e.values.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(SymMatrix::new(m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-14, 1.0]);
        assert!(SymMatrix::new(m).is_ok());
    }

    #[test]
    fn solve_trivial_cases() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = psd_solve(&SymMatrix::identity(3), &b).unwrap();
        assert!((x - &b).amax() < 1e-14);
        let x = psd_solve(&SymMatrix::scaled_identity(3, 2.0), &b).unwrap();
        assert!((x - &b / 2.0).amax() < 1e-14);
    }

    #[test]
    fn solve_matches_explicit_inverse() {
        let m = random_spd(6, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let inv = m.as_matrix().clone().try_inverse().unwrap();
        let x = psd_solve(&m, &b).unwrap();
        let expected = inv * &b;
        assert!((&x - &expected).amax() <= 1e-8 * expected.amax());
        let resid = (m.as_matrix() * &x - &b).amax();
        assert!(resid <= 1e-8 * b.amax());
    }

    #[test]
    fn solve_singular_is_error() {
        let m = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let b = DMatrix::identity(2, 1);
        assert!(matches!(psd_solve(&m, &b), Err(Error::SingularMatrix)));
        let m = SymMatrix::from_diagonal(&[1.0, 1e-13]);
        assert!(matches!(psd_solve(&m, &b), Err(Error::SingularMatrix)));
    }

    #[test]
    fn logdet_values() {
        assert_eq!(logdet(&SymMatrix::identity(4)), 0.0);
        let v = logdet(&SymMatrix::from_diagonal(&[2.0, 3.0]));
        assert!((v - 6f64.ln()).abs() < 1e-14);
        assert_eq!(logdet(&SymMatrix::from_diagonal(&[2.0, 0.0])), f64::NEG_INFINITY);
    }

    #[test]
    fn logdet_matches_eigenvalue_product() {
        for seed in 0..5 {
            let m = random_spd(5, seed);
            let prod: f64 = sym_eigen(&m).unwrap().values.iter().product();
            let ld = logdet(&m);
            assert!((ld.exp() - prod).abs() <= 1e-8 * prod.abs().max(1.0));
            let lu_det = m.as_matrix().clone().determinant();
            assert!((ld.exp() / lu_det - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn solve_roundtrip() {
        let m = random_spd(4, 99);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(4, 1, |_, _| rng.random_range(-1.0..1.0));
        let y = psd_solve(&m, &(m.as_matrix() * &x)).unwrap();
        assert!((y - x).amax() < 1e-8);
    }
}
