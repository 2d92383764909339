//! Bayesian optimality criteria `f_A(Σ)`, their gradients with respect to
//! row weights, and effective dimensions.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{covariance, DesignMatrix, Prior};
use crate::error::{Error, Result};
use crate::numerics::{PsdFactor, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CriterionKind {
    A,
    C,
    D,
    V,
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CriterionKind::A => "A",
            CriterionKind::C => "C",
            CriterionKind::D => "D",
            CriterionKind::V => "V",
        };
        f.write_str(s)
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(CriterionKind::A),
            "C" | "c" => Ok(CriterionKind::C),
            "D" | "d" => Ok(CriterionKind::D),
            "V" | "v" => Ok(CriterionKind::V),
            other => Err(Error::invalid(format!("unknown criterion {other:?}"))),
        }
    }
}

/// An optimality criterion together with the data it needs.
///
/// V-optimality keeps `XᵀX` of the full design so each evaluation is
/// `tr(M⁻¹·XᵀX)/n` at `O(d³)`.
#[derive(Debug, Clone)]
pub enum Criterion {
    /// `tr((Σ+A)⁻¹)`
    A,
    /// `cᵀ(Σ+A)⁻¹c`
    C { c: DVector<f64> },
    /// `det(Σ+A)^(−1/d)`
    D,
    /// `tr(X(Σ+A)⁻¹Xᵀ)/n`
    V { gram: SymMatrix, n: usize },
}

impl Criterion {
    pub fn c_optimal(c: DVector<f64>) -> Result<Self> {
        if c.iter().all(|v| *v == 0.0) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("C-optimality needs a finite nonzero direction"));
        }
        Ok(Criterion::C { c })
    }

    pub fn v_optimal(x_full: &DesignMatrix) -> Self {
        Criterion::V {
            gram: covariance(x_full, None).expect("unweighted covariance"),
            n: x_full.n(),
        }
    }

    /// Builds a criterion of the given kind. `C` takes its direction from
    /// `prior.c`; `V` uses `x` as the full design.
    pub fn build(kind: CriterionKind, x: &DesignMatrix, prior: &Prior) -> Result<Self> {
        match kind {
            CriterionKind::A => Ok(Criterion::A),
            CriterionKind::D => Ok(Criterion::D),
            CriterionKind::V => Ok(Criterion::v_optimal(x)),
            CriterionKind::C => {
                let c = prior
                    .c
                    .clone()
                    .ok_or_else(|| Error::invalid("C-optimality needs a direction vector c"))?;
                if c.len() != x.d() {
                    return Err(Error::invalid(format!(
                        "c has length {}, expected {}",
                        c.len(),
                        x.d()
                    )));
                }
                Criterion::c_optimal(c)
            }
        }
    }

    pub fn kind(&self) -> CriterionKind {
        match self {
            Criterion::A => CriterionKind::A,
            Criterion::C { .. } => CriterionKind::C,
            Criterion::D => CriterionKind::D,
            Criterion::V { .. } => CriterionKind::V,
        }
    }

    /// Criterion value from a factor of `M = Σ + A`.
    pub fn value_from_factor(&self, m: &PsdFactor) -> f64 {
        match self {
            Criterion::A => m.trace_inverse(),
            Criterion::C { c } => c.dot(&m.solve_vec(c)),
            Criterion::D => (-m.logdet() / m.dim() as f64).exp(),
            Criterion::V { gram, n } => {
                let eig = m.eigen();
                let g = gram.as_matrix();
                let mut acc = 0.0;
                for (j, &lam) in eig.values.iter().enumerate() {
                    let v = eig.vectors.column(j);
                    acc += (g * v).dot(&v) / lam;
                }
                acc / *n as f64
            }
        }
    }
}

/// `f_A(Σ)`; `+∞` when `Σ + A` is singular to tolerance.
pub fn eval(crit: &Criterion, sigma: &SymMatrix, prior: &Prior) -> f64 {
    match PsdFactor::new(&sigma.add(&prior.a)) {
        Ok(f) => crit.value_from_factor(&f),
        Err(_) => f64::INFINITY,
    }
}

/// `ln f_A(Σ)`. For D this is `−logdet(Σ+A)/d` without exponentiating.
pub fn log_eval(crit: &Criterion, sigma: &SymMatrix, prior: &Prior) -> f64 {
    match PsdFactor::new(&sigma.add(&prior.a)) {
        Ok(f) => match crit {
            Criterion::D => -f.logdet() / f.dim() as f64,
            _ => crit.value_from_factor(&f).ln(),
        },
        Err(_) => f64::INFINITY,
    }
}

/// Criterion value of a subset of rows.
pub fn eval_subset(crit: &Criterion, x: &DesignMatrix, subset: &[usize], prior: &Prior) -> f64 {
    eval(crit, &x.subset_covariance(subset), prior)
}

fn weighted_factor(x: &DesignMatrix, w: &[f64], prior: &Prior) -> Result<PsdFactor> {
    PsdFactor::new(&covariance(x, Some(w))?.add(&prior.a))
}

/// `M⁻¹ Xᵀ` as a `d × n` matrix.
fn solve_rows(m: &PsdFactor, x: &DesignMatrix) -> DMatrix<f64> {
    m.solve(&x.as_matrix().transpose())
}

/// `∂f_A(Σ_w)/∂wᵢ` for `Σ_w = Σᵢ wᵢxᵢxᵢᵀ`.
pub fn grad_w(crit: &Criterion, x: &DesignMatrix, w: &[f64], prior: &Prior) -> Result<Vec<f64>> {
    let m = weighted_factor(x, w, prior)?;
    Ok(grad_from_factor(crit, x, &m))
}

pub(crate) fn grad_from_factor(crit: &Criterion, x: &DesignMatrix, m: &PsdFactor) -> Vec<f64> {
    let n = x.n();
    match crit {
        Criterion::A => {
            let y = solve_rows(m, x);
            (0..n).map(|i| -y.column(i).norm_squared()).collect()
        }
        Criterion::C { c } => {
            let u = m.solve_vec(c);
            (0..n)
                .map(|i| {
                    let s: f64 = x.row(i).iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                    -s * s
                })
                .collect()
        }
        Criterion::D => {
            let d = m.dim() as f64;
            let f = (-m.logdet() / d).exp();
            leverages(m, x).into_iter().map(|l| -f * l / d).collect()
        }
        Criterion::V { gram, n: n_full } => {
            let y = solve_rows(m, x);
            let gy = gram.as_matrix() * &y;
            (0..n)
                .map(|i| -y.column(i).dot(&gy.column(i)) / *n_full as f64)
                .collect()
        }
    }
}

/// `xᵢᵀ M⁻¹ xᵢ` for every row.
pub(crate) fn leverages(m: &PsdFactor, x: &DesignMatrix) -> Vec<f64> {
    let y = solve_rows(m, x);
    (0..x.n())
        .map(|i| y.column(i).iter().zip(x.row(i)).map(|(a, b)| a * b).sum())
        .collect()
}

/// A-effective dimension `tr(Σ(Σ+A)⁻¹)`, clamped into `[0, d]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EffDim(f64);

impl EffDim {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for EffDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn effective_dim(sigma: &SymMatrix, a: &SymMatrix) -> Result<EffDim> {
    let m = PsdFactor::new(&sigma.add(a))?;
    let eig = m.eigen();
    let s = sigma.as_matrix();
    let mut acc = 0.0;
    for (j, &lam) in eig.values.iter().enumerate() {
        let v = eig.vectors.column(j);
        acc += (s * v).dot(&v) / lam;
    }
    Ok(EffDim(acc.clamp(0.0, sigma.dim() as f64)))
}

/// `d_{(n/k)A}(Σ_X) = d_A((k/n)·Σ_X)`.
pub fn scaled_effective_dim(sigma_x: &SymMatrix, a: &SymMatrix, k: usize, n: usize) -> Result<EffDim> {
    if k == 0 || n < k {
        return Err(Error::invalid(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    effective_dim(&sigma_x.scale(k as f64 / n as f64), a)
}
