#![allow(dead_code)]

use bed::dataset::{DesignMatrix, Prior};
use bed::numerics::SymMatrix;
use bed::rng::DesignRng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn gaussian(rng: &mut DesignRng) -> f64 {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn random_matrix(rng: &mut DesignRng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| gaussian(rng))
}

pub fn random_design(rng: &mut DesignRng, n: usize, d: usize) -> DesignMatrix {
    DesignMatrix::from_matrix(random_matrix(rng, n, d)).unwrap()
}

/// Random PSD `d × d` matrix of the given rank, scaled by `scale`.
pub fn random_psd(rng: &mut DesignRng, d: usize, rank: usize, scale: f64) -> DMatrix<f64> {
    if rank == 0 {
        return DMatrix::zeros(d, d);
    }
    let b = random_matrix(rng, d, rank);
    let m = &b * b.transpose() * (scale / rank as f64);
    (&m + m.transpose()) * 0.5
}

pub fn prior_from(a: &DMatrix<f64>) -> Prior {
    Prior::new(SymMatrix::symmetrized(a.clone())).unwrap()
}

pub fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0usize..1 << n).map(move |m| (0..n).filter(|i| m >> i & 1 == 1).collect())
}

pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    subsets(n).filter(|s| s.len() == k).collect()
}

pub fn gram(x: &DMatrix<f64>, s: &[usize]) -> DMatrix<f64> {
    let d = x.ncols();
    let mut g = DMatrix::zeros(d, d);
    for &i in s {
        let r = x.row(i);
        g += r.transpose() * r;
    }
    g
}

pub fn weighted_gram(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let d = x.ncols();
    let mut g = DMatrix::zeros(d, d);
    for (i, &wi) in w.iter().enumerate() {
        let r = x.row(i);
        g += r.transpose() * r * wi;
    }
    g
}

/// `det(X_SᵀX_S + A)·Πp·Π(1−p) / det(Σ pᵢxᵢxᵢᵀ + A)` with plain
/// determinants.
pub fn oracle_pmf(x: &DMatrix<f64>, a: &DMatrix<f64>, p: &[f64], s: &[usize]) -> f64 {
    let n = x.nrows();
    let z = (weighted_gram(x, p) + a).determinant();
    let num = (gram(x, s) + a).determinant();
    let mut prod = 1.0;
    for i in 0..n {
        prod *= if s.contains(&i) { p[i] } else { 1.0 - p[i] };
    }
    num * prod / z
}

pub fn oracle_law(x: &DMatrix<f64>, a: &DMatrix<f64>, p: &[f64]) -> Vec<(Vec<usize>, f64)> {
    subsets(x.nrows()).map(|s| {
        let pr = oracle_pmf(x, a, p, &s);
        (s, pr)
    }).collect()
}

/// Symmetric `M^{-1/2}` from an eigendecomposition.
pub fn inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let d = DVector::from_iterator(e.eigenvalues.len(), e.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// `D_p + (I−D_p)^{1/2} B Bᵀ (I−D_p)^{1/2}` with
/// `B = D_p^{1/2} X (A + XᵀD_pX)^{-1/2}`.
pub fn oracle_marginal_kernel(x: &DMatrix<f64>, a: &DMatrix<f64>, p: &[f64]) -> DMatrix<f64> {
    let n = x.nrows();
    let z = weighted_gram(x, p) + a;
    let zi = inv_sqrt(&z);
    let sp = DMatrix::from_diagonal(&DVector::from_iterator(n, p.iter().map(|v| v.sqrt())));
    let b = &sp * x * zi;
    let k = &b * b.transpose();
    let sq = DMatrix::from_diagonal(&DVector::from_iterator(n, p.iter().map(|v| (1.0 - v).sqrt())));
    DMatrix::from_diagonal(&DVector::from_column_slice(p)) + &sq * k * &sq
}

pub fn trace_inv(m: &DMatrix<f64>) -> f64 {
    m.clone().try_inverse().map_or(f64::INFINITY, |i| i.trace())
}

/// A-optimal value `tr((X_SᵀX_S + A)⁻¹)`.
pub fn a_value(x: &DMatrix<f64>, a: &DMatrix<f64>, s: &[usize]) -> f64 {
    trace_inv(&(gram(x, s) + a))
}

pub fn brute_force_a_opt(x: &DMatrix<f64>, a: &DMatrix<f64>, k: usize) -> f64 {
    k_subsets(x.nrows(), k).iter().map(|s| a_value(x, a, s)).fold(f64::INFINITY, f64::min)
}

/// `tr(Σ(Σ+A)⁻¹)`
pub fn oracle_deff(sigma: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    (sigma * (sigma + a).try_inverse().unwrap()).trace()
}
