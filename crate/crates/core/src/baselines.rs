//! Comparison methods: greedy bottom-up, uniform subsets, and
//! predictive-length sampling.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::criteria::{eval_subset, Criterion};
use crate::dataset::{DesignMatrix, Prior};
use crate::error::{Error, Result};
use crate::numerics::{PsdFactor, SymMatrix};
use crate::selector::DesignResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Greedy,
    Uniform,
    PredictiveLength,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Greedy => "greedy",
            BaselineKind::Uniform => "uniform",
            BaselineKind::PredictiveLength => "predictive-length",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(BaselineKind::Greedy),
            "uniform" => Ok(BaselineKind::Uniform),
            "predictive-length" | "plen" => Ok(BaselineKind::PredictiveLength),
            _ => Err(Error::invalid(format!("unknown baseline {s:?}"))),
        }
    }
}

/// Row weights for predictive-length sampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LengthWeight {
    /// `∝ ‖xᵢ‖`
    #[default]
    Norm,
    /// `∝ ‖xᵢ‖²`, for sensitivity runs.
    SquaredNorm,
}

/// Indices added by greedy selection and the criterion value after each
/// addition.
#[derive(Debug, Clone)]
pub struct GreedyTrace {
    pub subset: Vec<usize>,
    pub added: Vec<usize>,
    pub values: Vec<f64>,
}

/// Score of `M + xxᵀ` from a factor of `M`: the criterion value, or
/// `-logdet/d` for D so comparisons stay in log space.
struct RankOneScorer<'a> {
    crit: &'a Criterion,
    m_inv: SymMatrix,
    base: f64,
    gm_inv: Option<nalgebra::DMatrix<f64>>,
    c_solved: Option<nalgebra::DVector<f64>>,
    d: f64,
}

impl<'a> RankOneScorer<'a> {
    fn new(crit: &'a Criterion, m: &PsdFactor) -> Self {
        let m_inv = m.inverse();
        let d = m.dim() as f64;
        let (base, gm_inv, c_solved) = match crit {
            Criterion::A => (m.trace_inverse(), None, None),
            Criterion::C { c } => {
                let u = m.solve_vec(c);
                (c.dot(&u), None, Some(u))
            }
            Criterion::D => (m.logdet(), None, None),
            Criterion::V { gram, .. } => {
                let base = crit.value_from_factor(m);
                (base, Some(gram.as_matrix().clone()), None)
            }
        };
        RankOneScorer { crit, m_inv, base, gm_inv, c_solved, d }
    }

    fn score(&self, x: &[f64]) -> f64 {
        let xv = nalgebra::DVector::from_column_slice(x);
        let u = self.m_inv.as_matrix() * &xv;
        let den = 1.0 + xv.dot(&u);
        match self.crit {
            Criterion::A => self.base - u.norm_squared() / den,
            Criterion::C { .. } => {
                let cu = self.c_solved.as_ref().expect("c").dot(&xv);
                self.base - cu * cu / den
            }
            Criterion::D => -(self.base + den.ln()) / self.d,
            Criterion::V { n, .. } => {
                let g = self.gm_inv.as_ref().expect("gram");
                self.base - (g * &u).dot(&u) / den / *n as f64
            }
        }
    }
}

fn score_full(crit: &Criterion, m: &SymMatrix, x: &[f64]) -> f64 {
    match PsdFactor::new(&m.add_outer(x, 1.0)) {
        Ok(f) => match crit {
            Criterion::D => -f.logdet() / f.dim() as f64,
            _ => crit.value_from_factor(&f),
        },
        Err(_) => f64::INFINITY,
    }
}

/// Extends `start` greedily to `k` indices, each step adding the index with
/// the smallest criterion value after inclusion (lowest index on ties).
///
/// Steps where every candidate leaves `Σ + A` singular are ranked under a
/// ridge `A + δI` with `δ = 1e-8·tr(XᵀX)/d`, so classical designs do not
/// degenerate to picking indices in order.
pub fn greedy_extend(
    x: &DesignMatrix,
    prior: &Prior,
    crit: &Criterion,
    start: &[usize],
    k: usize,
) -> Result<GreedyTrace> {
    let n = x.n();
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let mut in_s = vec![false; n];
    for &i in start {
        if i >= n || in_s[i] {
            return Err(Error::invalid(format!("bad start index {i}")));
        }
        in_s[i] = true;
    }
    let mut subset = start.to_vec();
    let mut m = x.subset_covariance(start).add(&prior.a);
    let ridge = 1e-8 * (0..n).map(|i| x.row_norm(i).powi(2)).sum::<f64>() / x.d() as f64;
    let mut added = Vec::new();
    let mut values = Vec::new();

    while subset.len() < k {
        let scores: Vec<f64> = match PsdFactor::new(&m) {
            Ok(f) => {
                let scorer = RankOneScorer::new(crit, &f);
                (0..n).map(|i| if in_s[i] { f64::INFINITY } else { scorer.score(x.row(i)) }).collect()
            }
            Err(_) => {
                let full: Vec<f64> =
                    (0..n).map(|i| if in_s[i] { f64::INFINITY } else { score_full(crit, &m, x.row(i)) }).collect();
                if full.iter().all(|v| v.is_infinite()) && ridge > 0.0 {
                    let mr = m.add(&SymMatrix::scaled_identity(x.d(), ridge));
                    (0..n).map(|i| if in_s[i] { f64::INFINITY } else { score_full(crit, &mr, x.row(i)) }).collect()
                } else {
                    full
                }
            }
        };
        let mut best: Option<(usize, f64)> = None;
        for (i, &s) in scores.iter().enumerate() {
            if in_s[i] {
                continue;
            }
            match best {
                None => best = Some((i, s)),
                Some((_, bs)) if s < bs => best = Some((i, s)),
                _ => {}
            }
        }
        let (pick, _) = best.expect("k <= n leaves a candidate");
        in_s[pick] = true;
        subset.push(pick);
        added.push(pick);
        m = m.add_outer(x.row(pick), 1.0);
        values.push(eval_subset(crit, x, &subset, prior));
    }
    Ok(GreedyTrace { subset, added, values })
}

pub fn greedy_bottom_up(x: &DesignMatrix, prior: &Prior, crit: &Criterion, k: usize) -> Result<DesignResult> {
    let trace = greedy_extend(x, prior, crit, &[], k)?;
    Ok(DesignResult::unsampled(trace.subset, x, prior, crit))
}

/// Uniformly random `k`-subset of `0..n`, sorted.
pub fn uniform_subset<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let mut s = rand::seq::index::sample(rng, n, k).into_vec();
    s.sort_unstable();
    Ok(s)
}

/// `k` distinct rows drawn one at a time with probability proportional to
/// the row weight among rows not yet drawn. Once only zero-weight rows are
/// left they are drawn uniformly.
pub fn predictive_length<R: Rng + ?Sized>(
    x: &DesignMatrix,
    k: usize,
    weighting: LengthWeight,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = x.n();
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let mut weights: Vec<f64> = (0..n)
        .map(|i| match weighting {
            LengthWeight::Norm => x.row_norm(i),
            LengthWeight::SquaredNorm => x.row_norm(i).powi(2),
        })
        .collect();
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllZeroRows);
    }
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            pick.expect("positive total")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        taken[pick] = true;
        weights[pick] = 0.0;
        out.push(pick);
    }
    out.sort_unstable();
    Ok(out)
}
