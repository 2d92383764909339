//! First-order solver for the continuous relaxation
//! `min f(Σᵢ wᵢxᵢxᵢᵀ)` over `{0 ≤ wᵢ ≤ 1, Σwᵢ = k}`.

use crate::criteria::{grad_from_factor, leverages, Criterion};
use crate::dataset::{covariance, DesignMatrix, Prior};
use crate::error::{Error, Result};
use crate::numerics::PsdFactor;

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-30;
const STALL_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Exponentiated gradient with an entropic projection back onto the
    /// capped simplex.
    #[default]
    MirrorDescent,
    ProjectedGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxConfig {
    pub max_iters: usize,
    /// Relative objective decrease below which an iteration counts as stalled.
    pub tol: f64,
    pub step_rule: StepRule,
    pub method: Method,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            max_iters: 5000,
            tol: 1e-7,
            step_rule: StepRule::Backtracking,
            method: Method::MirrorDescent,
        }
    }
}

impl RelaxConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        if let StepRule::Fixed(eta) = self.step_rule {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::invalid("fixed step must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RelaxSolution {
    pub w: Vec<f64>,
    /// Criterion value at `w`.
    pub objective: f64,
    pub iters: usize,
    pub converged: bool,
    /// Criterion value after each iteration, starting with the initial point.
    pub history: Vec<f64>,
}

/// Working objective: `-logdet(Σ_w + A)/d` for D, the criterion itself
/// otherwise. Both have the same minimizers.
struct Eval {
    phi: f64,
    value: f64,
    factor: PsdFactor,
}

fn evaluate(crit: &Criterion, x: &DesignMatrix, w: &[f64], prior: &Prior) -> Option<Eval> {
    let m = covariance(x, Some(w)).ok()?.add(&prior.a);
    let factor = PsdFactor::new(&m).ok()?;
    let (phi, value) = match crit {
        Criterion::D => {
            let l = -factor.logdet() / factor.dim() as f64;
            (l, l.exp())
        }
        _ => {
            let v = crit.value_from_factor(&factor);
            (v, v)
        }
    };
    if !phi.is_finite() {
        return None;
    }
    Some(Eval { phi, value, factor })
}

fn gradient(crit: &Criterion, x: &DesignMatrix, e: &Eval) -> Vec<f64> {
    match crit {
        Criterion::D => {
            let d = e.factor.dim() as f64;
            leverages(&e.factor, x).into_iter().map(|l| -l / d).collect()
        }
        _ => grad_from_factor(crit, x, &e.factor),
    }
}

pub fn solve(x: &DesignMatrix, prior: &Prior, crit: &Criterion, k: usize, cfg: &RelaxConfig) -> Result<RelaxSolution> {
    cfg.validate()?;
    let n = x.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let mut w = vec![k as f64 / n as f64; n];
    if k == n {
        w = vec![1.0; n];
    }
    let mut cur = evaluate(crit, x, &w, prior).ok_or(Error::SingularMatrix)?;
    let mut history = vec![cur.value];
    if k == n {
        return Ok(RelaxSolution { w, objective: cur.value, iters: 0, converged: true, history });
    }

    let mut best_w = w.clone();
    let mut best = cur.value;
    let mut stalled = 0;
    let mut converged = false;
    let mut iters = 0;
    let mut eta_scale = 1.0;

    while iters < cfg.max_iters {
        iters += 1;
        let g = gradient(crit, x, &cur);
        let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gmax == 0.0 || !gmax.is_finite() {
            converged = gmax == 0.0;
            break;
        }
        let step = |eta: f64| -> Vec<f64> {
            match cfg.method {
                Method::MirrorDescent => {
                    let v: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi * (-eta * gi).exp()).collect();
                    project_entropic(&v, k).unwrap_or_else(|| project_capped_simplex(&v, k))
                }
                Method::ProjectedGradient => {
                    let v: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - eta * gi).collect();
                    project_capped_simplex(&v, k)
                }
            }
        };

        let next = match cfg.step_rule {
            StepRule::Fixed(eta) => {
                let cand = step(eta / gmax);
                evaluate(crit, x, &cand, prior).map(|e| (cand, e))
            }
            StepRule::Backtracking => {
                let mut eta = eta_scale * 2.0;
                let mut accepted = None;
                while eta >= MIN_STEP {
                    let cand = step(eta / gmax);
                    if let Some(e) = evaluate(crit, x, &cand, prior) {
                        let lin: f64 = g.iter().zip(cand.iter().zip(&w)).map(|(gi, (c, wi))| gi * (c - wi)).sum();
                        if e.phi <= cur.phi + ARMIJO_C * lin {
                            accepted = Some((cand, e));
                            break;
                        }
                    }
                    eta *= 0.5;
                }
                if accepted.is_some() {
                    eta_scale = eta;
                }
                accepted
            }
        };

        let Some((cand, e)) = next else {
            converged = true;
            break;
        };
        let rel = (cur.value - e.value) / cur.value.abs().max(f64::MIN_POSITIVE);
        w = cand;
        cur = e;
        history.push(cur.value);
        if cur.value < best {
            best = cur.value;
            best_w.clone_from(&w);
        }
        if rel < cfg.tol {
            stalled += 1;
            if stalled >= STALL_WINDOW {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    Ok(RelaxSolution { w: best_w, objective: best, iters, converged, history })
}

/// Euclidean projection onto `{0 ≤ wᵢ ≤ 1, Σwᵢ = k}`: `clip(v − τ, 0, 1)`
/// with `τ` located by bisection.
pub fn project_capped_simplex(v: &[f64], k: usize) -> Vec<f64> {
    let n = v.len();
    assert!(k <= n, "k = {k} exceeds n = {n}");
    if k == n {
        return vec![1.0; n];
    }
    if k == 0 {
        return vec![0.0; n];
    }
    let target = k as f64;
    let total = |tau: f64| v.iter().map(|&x| (x - tau).clamp(0.0, 1.0)).sum::<f64>();
    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (vmin - 1.0, vmax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = total(mid);
        if (s - target).abs() <= 1e-12 {
            lo = mid;
            hi = mid;
            break;
        }
        if s > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().map(|&x| (x - tau).clamp(0.0, 1.0)).collect()
}

/// KL projection onto the capped simplex for `v ≥ 0`: `wᵢ = min(1, c·vᵢ)`.
/// `None` when fewer than `k` entries are positive.
fn project_entropic(v: &[f64], k: usize) -> Option<Vec<f64>> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    let mut suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] + v[order[j]];
    }
    for m in 0..k {
        let rest = suffix[m];
        if !(rest > 0.0) || !rest.is_finite() {
            return None;
        }
        let c = (k - m) as f64 / rest;
        if c * v[order[m]] <= 1.0 {
            let mut w: Vec<f64> = v.iter().map(|&x| (c * x).min(1.0)).collect();
            for &i in &order[..m] {
                w[i] = 1.0;
            }
            return Some(w);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{eval, eval_subset, CriterionKind};
    use crate::rng;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn random_design(n: usize, d: usize, seed: u64) -> DesignMatrix {
        let mut r = rng::seeded(seed);
        DesignMatrix::from_matrix(DMatrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0))).unwrap()
    }

    fn assert_feasible(w: &[f64], k: usize) {
        assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!((w.iter().sum::<f64>() - k as f64).abs() <= 1e-9);
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        (0usize..1 << n)
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
            .collect()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_capped_simplex(&[2.0, 2.0, 0.0, 0.0], 2), vec![1.0, 1.0, 0.0, 0.0]);
        let w = project_capped_simplex(&[0.9, 0.1, 0.0], 1);
        for (a, b) in w.iter().zip([0.9, 0.1, 0.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_is_feasible_and_idempotent() {
        let mut r = rng::seeded(11);
        for _ in 0..200 {
            let n = r.random_range(1..15);
            let k = r.random_range(0..=n);
            let v: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
            let w = project_capped_simplex(&v, k);
            assert_feasible(&w, k);
            let again = project_capped_simplex(&w, k);
            for (a, b) in w.iter().zip(&again) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn entropic_projection_is_feasible() {
        let mut r = rng::seeded(12);
        for _ in 0..200 {
            let n = r.random_range(2..15);
            let k = r.random_range(1..n);
            let v: Vec<f64> = (0..n).map(|_| r.random_range(-30.0..30.0f64).exp()).collect();
            let w = project_entropic(&v, k).unwrap();
            assert_feasible(&w, k);
        }
        assert!(project_entropic(&[1.0, 0.0, 0.0], 2).is_none());
    }

    #[test]
    fn full_selection_is_all_ones() {
        let x = random_design(5, 2, 1);
        let prior = Prior::scaled_identity(2, 0.1);
        let s = solve(&x, &prior, &Criterion::A, 5, &RelaxConfig::default()).unwrap();
        assert_eq!(s.w, vec![1.0; 5]);
        let full = eval(&Criterion::A, &x.subset_covariance(&[0, 1, 2, 3, 4]), &prior);
        assert!((s.objective - full).abs() < 1e-12);
    }

    #[test]
    fn beats_random_points_and_subsets() {
        let x = random_design(10, 2, 2);
        let prior = Prior::scaled_identity(2, 0.05);
        let k = 4;
        for method in [Method::MirrorDescent, Method::ProjectedGradient] {
            let cfg = RelaxConfig { method, ..Default::default() };
            for kind in [CriterionKind::A, CriterionKind::D, CriterionKind::V] {
                let crit = Criterion::build(kind, &x, &prior).unwrap();
                let s = solve(&x, &prior, &crit, k, &cfg).unwrap();
                assert_feasible(&s.w, k);
                let check = eval(&crit, &covariance(&x, Some(&s.w)).unwrap(), &prior);
                assert!((check - s.objective).abs() <= 1e-10 * check.max(1.0));

                let opt = subsets(10, k)
                    .iter()
                    .map(|s| eval_subset(&crit, &x, s, &prior))
                    .fold(f64::INFINITY, f64::min);
                assert!(s.objective <= opt + 1e-4, "{kind} {method:?}");

                let mut r = rng::seeded(3);
                let mut best_random = f64::INFINITY;
                for _ in 0..10_000 {
                    let v: Vec<f64> = (0..10).map(|_| r.random::<f64>()).collect();
                    let w = project_capped_simplex(&v, k);
                    best_random = best_random.min(eval(&crit, &covariance(&x, Some(&w)).unwrap(), &prior));
                }
                assert!(s.objective <= best_random * (1.0 + 1e-9), "{kind} {method:?}");
            }
        }
    }

    #[test]
    fn backtracking_is_monotone() {
        let x = random_design(30, 3, 4);
        let prior = Prior::scaled_identity(3, 0.01);
        for method in [Method::MirrorDescent, Method::ProjectedGradient] {
            let cfg = RelaxConfig { method, ..Default::default() };
            let s = solve(&x, &prior, &Criterion::A, 6, &cfg).unwrap();
            for h in s.history.windows(2) {
                assert!(h[1] <= h[0]);
            }
            assert!(s.converged);
        }
    }

    #[test]
    fn fixed_step_returns_best_iterate() {
        let x = random_design(20, 3, 5);
        let prior = Prior::scaled_identity(3, 0.1);
        let cfg = RelaxConfig { step_rule: StepRule::Fixed(0.5), max_iters: 300, ..Default::default() };
        let s = solve(&x, &prior, &Criterion::A, 5, &cfg).unwrap();
        let min = s.history.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(s.objective, min);
        assert_feasible(&s.w, 5);
    }

    #[test]
    fn d_objective_is_permutation_invariant() {
        let x = random_design(12, 3, 6);
        let perm: Vec<usize> = vec![5, 2, 11, 0, 7, 3, 9, 1, 10, 4, 8, 6];
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| x.row(i).to_vec()).collect();
        let xp = DesignMatrix::from_rows(&rows).unwrap();
        let prior = Prior::scaled_identity(3, 0.1);
        let a = solve(&x, &prior, &Criterion::D, 5, &RelaxConfig::default()).unwrap();
        let b = solve(&xp, &prior, &Criterion::D, 5, &RelaxConfig::default()).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-8, "{} {} {} {}", a.objective, b.objective, a.iters, b.iters);
    }

    #[test]
    fn rejects_bad_input() {
        let x = random_design(5, 2, 7);
        let prior = Prior::scaled_identity(2, 0.1);
        assert!(solve(&x, &prior, &Criterion::A, 0, &RelaxConfig::default()).is_err());
        assert!(solve(&x, &prior, &Criterion::A, 6, &RelaxConfig::default()).is_err());
        let cfg = RelaxConfig { tol: 0.0, ..Default::default() };
        assert!(solve(&x, &prior, &Criterion::A, 2, &cfg).is_err());
        let singular = Prior::scaled_identity(2, 0.0);
        let zero = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]]).unwrap();
        assert!(matches!(
            solve(&zero, &singular, &Criterion::A, 2, &RelaxConfig::default()),
            Err(Error::SingularMatrix)
        ));
    }
}
