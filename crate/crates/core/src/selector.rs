//! Constrained design by rejection sampling from a regularized DPP with
//! deflated weights, followed by padding to exactly `k` indices.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::baselines::greedy_extend;
use crate::criteria::{effective_dim, eval, eval_subset, Criterion};
use crate::dataset::{covariance, DesignMatrix, Prior};
use crate::error::{Error, Result};
use crate::rdpp::{build_kernel, WeightVector};
use crate::relax::{self, RelaxConfig};

pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;
const WEIGHT_SUM_TOL: f64 = 1e-6;
const D_W_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acceptance {
    /// The draw met the value bound.
    BoundAccept,
    /// Attempts ran out; the best size-feasible draw was kept.
    BestSeenFallback,
}

impl fmt::Display for Acceptance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Acceptance::BoundAccept => "bound-accept",
            Acceptance::BestSeenFallback => "best-seen-fallback",
        })
    }
}

/// How a short draw is completed to `k` indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PadRule {
    /// Add the index with the largest criterion decrease, lowest index on ties.
    #[default]
    Greedy,
    /// Add uniformly random unused indices.
    Random,
}

impl FromStr for PadRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(PadRule::Greedy),
            "random" => Ok(PadRule::Random),
            _ => Err(Error::invalid(format!("unknown pad rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectOptions {
    pub max_attempts: usize,
    pub pad: PadRule,
    /// Log a warning when `k < 4·d_w`.
    pub warn_outside_regime: bool,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions { max_attempts: DEFAULT_MAX_ATTEMPTS, pad: PadRule::Greedy, warn_outside_regime: true }
    }
}

/// Diagnostics of the rejection loop.
#[derive(Debug, Clone)]
pub struct SamplingInfo {
    pub attempts: usize,
    pub accepted_by: Acceptance,
    pub eps_used: f64,
    /// `d_A(Σ_w)`
    pub d_w: f64,
    /// `1 + 8·d_w/k + 8·√(ln(k/d_w)/k)`
    pub bound_factor: f64,
    /// `f(Σ_w)`, the reference value the bound multiplies.
    pub reference_value: f64,
    /// Whether `k ≥ 4·d_w`.
    pub guarantee_regime: bool,
    /// Size of every draw, in order.
    pub draw_sizes: Vec<usize>,
}

impl SamplingInfo {
    pub fn bound(&self) -> f64 {
        self.bound_factor * self.reference_value
    }
}

#[derive(Debug, Clone)]
pub struct DesignResult {
    /// Sorted, distinct, exactly `k` indices.
    pub subset: Vec<usize>,
    pub value: f64,
    /// Present for the DPP-based methods.
    pub sampling: Option<SamplingInfo>,
}

impl DesignResult {
    pub(crate) fn unsampled(mut subset: Vec<usize>, x: &DesignMatrix, prior: &Prior, crit: &Criterion) -> Self {
        subset.sort_unstable();
        let value = eval_subset(crit, x, &subset, prior);
        DesignResult { subset, value, sampling: None }
    }

    pub fn attempts(&self) -> usize {
        self.sampling.as_ref().map_or(0, |s| s.attempts)
    }

    pub fn accepted_by(&self) -> Option<Acceptance> {
        self.sampling.as_ref().map(|s| s.accepted_by)
    }
}

/// Deflation `ε = min(1, 4·d_w/k + 6·√(ln(k/d_w)/k))` and the acceptance
/// factor `1 + 8·d_w/k + 8·√(ln(k/d_w)/k)`, with `d_w` floored at `1e-6`
/// inside the logarithm and negative logarithms treated as zero.
pub fn deflation(d_w: f64, k: usize) -> (f64, f64) {
    let k = k as f64;
    let ln = (k / d_w.max(D_W_FLOOR)).ln().max(0.0);
    let root = (ln / k).sqrt();
    let eps = (4.0 * d_w / k + 6.0 * root).min(1.0);
    let factor = 1.0 + 8.0 * d_w / k + 8.0 * root;
    (eps, factor)
}

fn check_weights(w: &[f64], n: usize, k: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::InfeasibleWeights(format!("length {} != n = {n}", w.len())));
    }
    if let Some(i) = w.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InfeasibleWeights(format!("w[{i}] = {} outside [0, 1]", w[i])));
    }
    let sum: f64 = w.iter().sum();
    if (sum - k as f64).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InfeasibleWeights(format!("weights sum to {sum}, expected {k}")));
    }
    Ok(())
}

fn pad<R: Rng + ?Sized>(
    x: &DesignMatrix,
    prior: &Prior,
    crit: &Criterion,
    s: Vec<usize>,
    k: usize,
    rule: PadRule,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if s.len() >= k {
        return Ok(s);
    }
    match rule {
        PadRule::Greedy => Ok(greedy_extend(x, prior, crit, &s, k)?.subset),
        PadRule::Random => {
            let mut used = vec![false; x.n()];
            for &i in &s {
                used[i] = true;
            }
            let free: Vec<usize> = (0..x.n()).filter(|&i| !used[i]).collect();
            let extra = rand::seq::index::sample(rng, free.len(), k - s.len());
            let mut out = s;
            out.extend(extra.iter().map(|j| free[j]));
            Ok(out)
        }
    }
}

/// Draws from the regularized DPP with weights `w/(1+ε)` until a draw with
/// at most `k` indices meets the value bound, then pads it to `k`.
pub fn select<R: Rng + ?Sized>(
    x: &DesignMatrix,
    prior: &Prior,
    crit: &Criterion,
    w: &[f64],
    k: usize,
    rng: &mut R,
    opts: &SelectOptions,
) -> Result<DesignResult> {
    let n = x.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    if opts.max_attempts == 0 {
        return Err(Error::invalid("max_attempts must be at least 1"));
    }
    check_weights(w, n, k)?;

    let sigma_w = covariance(x, Some(w))?;
    let reference_value = eval(crit, &sigma_w, prior);
    if !reference_value.is_finite() {
        return Err(Error::SingularMatrix);
    }
    let d_w = effective_dim(&sigma_w, &prior.a)?.value();
    let (eps, bound_factor) = deflation(d_w, k);
    let guarantee_regime = k as f64 >= 4.0 * d_w;
    if !guarantee_regime && opts.warn_outside_regime {
        log::warn!("k = {k} is below 4·d_w = {:.3}; the value bound is not guaranteed", 4.0 * d_w);
    }
    let mut info = SamplingInfo {
        attempts: 0,
        accepted_by: Acceptance::BoundAccept,
        eps_used: eps,
        d_w,
        bound_factor,
        reference_value,
        guarantee_regime,
        draw_sizes: Vec::new(),
    };

    if k == n {
        let subset: Vec<usize> = (0..n).collect();
        let value = eval_subset(crit, x, &subset, prior);
        return Ok(DesignResult { subset, value, sampling: Some(info) });
    }

    let p = WeightVector::new(w.iter().map(|v| v / (1.0 + eps)).collect())?;
    let kernel = build_kernel(x, prior, &p)?;
    let threshold = bound_factor * reference_value;
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut accepted = None;

    for attempt in 1..=opts.max_attempts {
        let (s, _) = kernel.sample(rng);
        info.attempts = attempt;
        info.draw_sizes.push(s.len());
        if s.len() > k {
            continue;
        }
        let v = eval_subset(crit, x, &s, prior);
        if v <= threshold {
            accepted = Some(s);
            break;
        }
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((s, v));
        }
    }

    let drawn = match accepted {
        Some(s) => s,
        None => {
            info.accepted_by = Acceptance::BestSeenFallback;
            match best {
                Some((s, _)) => s,
                None => return Err(Error::NoSizeFeasibleDraw { k, attempts: opts.max_attempts }),
            }
        }
    };
    let mut subset = pad(x, prior, crit, drawn, k, opts.pad, rng)?;
    subset.sort_unstable();
    let value = eval_subset(crit, x, &subset, prior);
    Ok(DesignResult { subset, value, sampling: Some(info) })
}

/// [`select`] with uniform weights `k/n`.
pub fn select_uniform<R: Rng + ?Sized>(
    x: &DesignMatrix,
    prior: &Prior,
    crit: &Criterion,
    k: usize,
    rng: &mut R,
    opts: &SelectOptions,
) -> Result<DesignResult> {
    let n = x.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let w = vec![k as f64 / n as f64; n];
    select(x, prior, crit, &w, k, rng, opts)
}

/// [`select`] with weights from the continuous relaxation. The reference
/// value in the returned diagnostics is the relaxed optimum, a lower bound
/// on every size-`k` design.
pub fn select_relaxed<R: Rng + ?Sized>(
    x: &DesignMatrix,
    prior: &Prior,
    crit: &Criterion,
    k: usize,
    rng: &mut R,
    relax_cfg: &RelaxConfig,
    opts: &SelectOptions,
) -> Result<DesignResult> {
    let sol = relax::solve(x, prior, crit, k, relax_cfg)?;
    select(x, prior, crit, &sol.w, k, rng, opts)
}
