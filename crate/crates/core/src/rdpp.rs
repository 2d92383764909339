//! The regularized DPP: `Pr(S) ∝ det(X_SᵀX_S + A) · Π_{i∈S} pᵢ · Π_{i∉S} (1−pᵢ)`.
//!
//! Sampling goes through its decomposition into a correlation DPP with the
//! rank-≤d kernel `BBᵀ`, `B = D_p^{1/2} X (A + XᵀD_pX)^{-1/2}`, unioned with
//! independent Bernoulli(pᵢ) draws. The kernel is built from the thin SVD of
//! the `n × d` matrix `B`, so nothing `n × n` is ever formed on this path.
//!
//! [`pmf`] and [`enumerate_law`] evaluate the distribution directly from its
//! determinant formula and serve as the oracle for the sampler.

use nalgebra::DMatrix;
use rand::Rng;

use crate::criteria::effective_dim;
use crate::dataset::{covariance, DesignMatrix, Prior};
use crate::error::{Error, Result};
use crate::numerics::{logdet, PsdFactor};

/// Largest `n` accepted by [`enumerate_law`].
pub const MAX_ENUMERATION: usize = 20;

/// Rows with `1 − pᵢ` below this are always included and left out of `B`.
const FORCED_TOL: f64 = 1e-15;
/// Spectral components with `λ` at or below this are dropped from the kernel.
const DROP_EIGVAL: f64 = 1e-15;
/// Residual mass below which the sequential phase restarts.
const DEGENERATE_MASS: f64 = 1e-12;

/// Inclusion weights `p ∈ [0,1]ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InfeasibleWeights(format!("p[{i}] = {v} is outside [0, 1]")));
        }
        Ok(WeightVector(p))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Spectral form of the correlation kernel `BBᵀ` plus the Bernoulli weights.
#[derive(Debug, Clone)]
pub struct SpectralKernel {
    eigvals: Vec<f64>,
    eigvecs: DMatrix<f64>,
    p: WeightVector,
    z_factor: PsdFactor,
    forced: Vec<bool>,
    d_eff: f64,
}

impl SpectralKernel {
    /// Eigenvalues of `BBᵀ` in `[0, 1]`, nonincreasing.
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    /// `n × r` orthonormal eigenvectors matching [`Self::eigvals`].
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn weights(&self) -> &WeightVector {
        &self.p
    }

    /// Factor of `Z = A + XᵀD_pX`.
    pub fn z_factor(&self) -> &PsdFactor {
        &self.z_factor
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    /// `d_A(XᵀD_pX) = tr(BBᵀ)`.
    pub fn effective_dim(&self) -> f64 {
        self.d_eff
    }

    /// Diagonal of `BBᵀ` (zero for forced rows).
    pub fn projection_diagonal(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                self.eigvals
                    .iter()
                    .enumerate()
                    .map(|(j, l)| l * self.eigvecs[(i, j)].powi(2))
                    .sum()
            })
            .collect()
    }

    /// Dense marginal kernel `D_p + (I−D_p)^{1/2} BBᵀ (I−D_p)^{1/2}`.
    /// `n × n`, for diagnostics and small-instance checks.
    pub fn marginal_kernel(&self) -> DMatrix<f64> {
        let n = self.n();
        let p = self.p.as_slice();
        let mut v = self.eigvecs.clone();
        for (j, &l) in self.eigvals.iter().enumerate() {
            v.column_mut(j).scale_mut(l.sqrt());
        }
        for i in 0..n {
            v.row_mut(i).scale_mut((1.0 - p[i]).max(0.0).sqrt());
        }
        let mut k = &v * v.transpose();
        for i in 0..n {
            k[(i, i)] += p[i];
        }
        k
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<usize>, SampleDiag) {
        sample(self, rng)
    }
}

/// Sizes of the two parts of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleDiag {
    pub t_size: usize,
    pub bern_size: usize,
    pub union_size: usize,
}

pub fn build_kernel(x: &DesignMatrix, prior: &Prior, p: &WeightVector) -> Result<SpectralKernel> {
    let n = x.n();
    if p.len() != n {
        return Err(Error::InfeasibleWeights(format!("{} weights for {} rows", p.len(), n)));
    }
    if prior.dim() != x.d() {
        return Err(Error::invalid(format!(
            "prior is {}x{}, design has d = {}",
            prior.dim(),
            prior.dim(),
            x.d()
        )));
    }
    let sigma_p = covariance(x, Some(p.as_slice()))?;
    let z = sigma_p.add(&prior.a);
    let z_factor = PsdFactor::new(&z)?;
    let d_eff = effective_dim(&sigma_p, &prior.a)?.value();
    let z_inv_sqrt = z_factor.inv_sqrt();

    let forced: Vec<bool> = p.as_slice().iter().map(|&v| 1.0 - v < FORCED_TOL).collect();
    let mut scaled = x.as_matrix().clone();
    for (i, &pi) in p.as_slice().iter().enumerate() {
        let s = if forced[i] { 0.0 } else { pi.sqrt() };
        scaled.row_mut(i).scale_mut(s);
    }
    let b = scaled * z_inv_sqrt.as_matrix();

    let svd = b.svd(true, false);
    let u = svd.u.ok_or(Error::NumericalFailure)?;
    let mut comps: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(j, s)| ((s * s).clamp(0.0, 1.0), j))
        .filter(|(l, _)| *l > DROP_EIGVAL)
        .collect();
    comps.sort_by(|a, b| b.0.total_cmp(&a.0));
    let eigvals: Vec<f64> = comps.iter().map(|c| c.0).collect();
    let mut eigvecs = DMatrix::zeros(n, comps.len());
    for (col, &(_, j)) in comps.iter().enumerate() {
        eigvecs.set_column(col, &u.column(j));
    }

    Ok(SpectralKernel { eigvals, eigvecs, p: p.clone(), z_factor, forced, d_eff })
}

/// One exact draw `S = T ∪ {i : bᵢ = 1}`.
pub fn sample<R: Rng + ?Sized>(kernel: &SpectralKernel, rng: &mut R) -> (Vec<usize>, SampleDiag) {
    let t = loop {
        let chosen: Vec<usize> = kernel
            .eigvals
            .iter()
            .enumerate()
            .filter(|(_, &l)| rng.random::<f64>() < l)
            .map(|(j, _)| j)
            .collect();
        if let Some(t) = sample_projection(&kernel.eigvecs, &chosen, rng) {
            break t;
        }
        log::debug!("degenerate pivot in projection DPP phase; restarting draw");
    };

    let mut in_s = vec![false; kernel.n()];
    for &i in &t {
        in_s[i] = true;
    }
    let mut bern_size = 0;
    for (i, &pi) in kernel.p.as_slice().iter().enumerate() {
        if kernel.forced[i] || rng.random::<f64>() < pi {
            bern_size += 1;
            in_s[i] = true;
        }
    }
    let s: Vec<usize> = (0..kernel.n()).filter(|&i| in_s[i]).collect();
    let diag = SampleDiag { t_size: t.len(), bern_size, union_size: s.len() };
    (s, diag)
}

/// Sequential phase of spectral DPP sampling for the projection kernel
/// spanned by the chosen columns. `None` signals a degenerate pivot.
fn sample_projection<R: Rng + ?Sized>(
    eigvecs: &DMatrix<f64>,
    chosen: &[usize],
    rng: &mut R,
) -> Option<Vec<usize>> {
    let n = eigvecs.nrows();
    let mut basis: Vec<Vec<f64>> = chosen.iter().map(|&j| eigvecs.column(j).iter().copied().collect()).collect();
    let mut out = Vec::with_capacity(basis.len());
    while !basis.is_empty() {
        let mass: Vec<f64> = (0..n).map(|i| basis.iter().map(|v| v[i] * v[i]).sum()).collect();
        let total: f64 = mass.iter().sum();
        if total < DEGENERATE_MASS {
            return None;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &m) in mass.iter().enumerate() {
            if u < m {
                pick = i;
                break;
            }
            u -= m;
        }
        while mass[pick] == 0.0 {
            pick -= 1;
        }
        out.push(pick);

        let (pivot, _) = basis
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v[pick].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty basis");
        let pv = basis.swap_remove(pivot);
        for v in basis.iter_mut() {
            let coef = v[pick] / pv[pick];
            for (a, b) in v.iter_mut().zip(&pv) {
                *a -= coef * b;
            }
            v[pick] = 0.0;
        }
        // modified Gram-Schmidt, two passes
        for _ in 0..2 {
            for j in 0..basis.len() {
                let (done, rest) = basis.split_at_mut(j);
                let v = &mut rest[0];
                for q in done.iter() {
                    let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                    for (a, b) in v.iter_mut().zip(q) {
                        *a -= dot * b;
                    }
                }
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm < DEGENERATE_MASS {
                    return None;
                }
                v.iter_mut().for_each(|a| *a /= norm);
            }
        }
    }
    out.sort_unstable();
    Some(out)
}

fn log_bernoulli(p: &[f64], in_s: impl Fn(usize) -> bool) -> f64 {
    p.iter()
        .enumerate()
        .map(|(i, &pi)| if in_s(i) { pi.ln() } else { (1.0 - pi).ln() })
        .sum()
}

fn check_instance(x: &DesignMatrix, prior: &Prior, p: &WeightVector) -> Result<f64> {
    if p.len() != x.n() {
        return Err(Error::InfeasibleWeights(format!("{} weights for {} rows", p.len(), x.n())));
    }
    let z = covariance(x, Some(p.as_slice()))?.add(&prior.a);
    Ok(PsdFactor::new(&z)?.logdet())
}

fn log_pmf_given_norm(x: &DesignMatrix, prior: &Prior, p: &[f64], s: &[usize], log_z: f64) -> f64 {
    let mut member = vec![false; x.n()];
    for &i in s {
        member[i] = true;
    }
    let ld = logdet(&x.subset_covariance(s).add(&prior.a));
    ld - log_z + log_bernoulli(p, |i| member[i])
}

/// Exact `Pr(S)`, computed as the exponential of log-determinant differences.
pub fn pmf(x: &DesignMatrix, prior: &Prior, p: &WeightVector, s: &[usize]) -> Result<f64> {
    let log_z = check_instance(x, prior, p)?;
    if let Some(&i) = s.iter().find(|&&i| i >= x.n()) {
        return Err(Error::invalid(format!("index {i} out of range for n = {}", x.n())));
    }
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != s.len() {
        return Err(Error::invalid("subset has repeated indices"));
    }
    Ok(log_pmf_given_norm(x, prior, p.as_slice(), s, log_z).exp())
}

/// Expected size of a draw and its upper bound `d_A(XᵀD_pX) + Σpᵢ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedSize {
    pub exact: f64,
    pub bound: f64,
}

/// `E|S| = Σpᵢ + Σ(1−pᵢ)·(BBᵀ)ᵢᵢ`, the trace of the marginal kernel.
pub fn expected_size(kernel: &SpectralKernel) -> ExpectedSize {
    let p = kernel.p.as_slice();
    let psum: f64 = p.iter().sum();
    let diag = kernel.projection_diagonal();
    let exact = psum + p.iter().zip(&diag).map(|(pi, k)| (1.0 - pi) * k).sum::<f64>();
    ExpectedSize { exact, bound: kernel.d_eff + psum }
}

/// The full law over all `2ⁿ` subsets, indexed by bitmask (bit `i` set iff
/// `i ∈ S`).
#[derive(Debug, Clone)]
pub struct SubsetLaw {
    n: usize,
    probs: Vec<f64>,
}

pub fn mask_of(s: &[usize]) -> usize {
    s.iter().fold(0usize, |m, &i| m | (1 << i))
}

pub fn members(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

impl SubsetLaw {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prob(&self, s: &[usize]) -> f64 {
        self.probs[mask_of(s)]
    }

    pub fn prob_mask(&self, mask: usize) -> f64 {
        self.probs[mask]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.probs.iter().enumerate().map(|(m, &p)| (members(m, self.n), p))
    }

    /// `Pr(T ⊆ S)`.
    pub fn inclusion(&self, t: &[usize]) -> f64 {
        let tm = mask_of(t);
        self.probs
            .iter()
            .enumerate()
            .filter(|(m, _)| m & tm == tm)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn expected_size(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(m, p)| m.count_ones() as f64 * p)
            .sum()
    }

    /// Total variation distance to an empirical histogram of masks.
    pub fn tv_distance(&self, counts: &[u64]) -> f64 {
        let total: u64 = counts.iter().sum();
        0.5 * self
            .probs
            .iter()
            .zip(counts)
            .map(|(p, &c)| (p - c as f64 / total as f64).abs())
            .sum::<f64>()
    }
}

/// Exhaustive law for `n ≤ 20`.
pub fn enumerate_law(x: &DesignMatrix, prior: &Prior, p: &WeightVector) -> Result<SubsetLaw> {
    let n = x.n();
    if n > MAX_ENUMERATION {
        return Err(Error::TooLarge { n, max: MAX_ENUMERATION });
    }
    let log_z = check_instance(x, prior, p)?;
    let probs = (0..1usize << n)
        .map(|mask| log_pmf_given_norm(x, prior, p.as_slice(), &members(mask, n), log_z).exp())
        .collect();
    Ok(SubsetLaw { n, probs })
}
