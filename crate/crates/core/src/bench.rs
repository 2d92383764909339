//! Experiment harness: criterion-versus-k runs over several methods,
//! bootstrap intervals, and the effective-dimension comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::baselines::{greedy_bottom_up, predictive_length, uniform_subset, LengthWeight};
use crate::criteria::{effective_dim, eval, eval_subset, scaled_effective_dim, Criterion, CriterionKind};
use crate::dataset::{load_libsvm, lowrank_diagonal, synth_lowrank, DesignMatrix, Prior};
use crate::error::{Error, Result};
use crate::numerics::SymMatrix;
use crate::relax::{self, RelaxConfig, RelaxSolution};
use crate::rng::{self, derive_key};
use crate::selector::{select, select_uniform, PadRule, SelectOptions};

pub const CSV_HEADER: [&str; 7] = ["method", "k", "trial", "value", "ratio", "runtime_ms", "seed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(try_from = "String")]
pub enum Method {
    RdppSdp,
    RdppUniform,
    Greedy,
    Uniform,
    PredictiveLength,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::RdppSdp, Method::RdppUniform, Method::Greedy, Method::Uniform, Method::PredictiveLength];

    pub fn name(self) -> &'static str {
        match self {
            Method::RdppSdp => "rdpp-sdp",
            Method::RdppUniform => "rdpp-uniform",
            Method::Greedy => "greedy",
            Method::Uniform => "uniform",
            Method::PredictiveLength => "predictive-length",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plen" => Ok(Method::PredictiveLength),
            _ => Method::ALL
                .into_iter()
                .find(|m| m.name() == s)
                .ok_or_else(|| Error::invalid(format!("unknown method {s:?}"))),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum DatasetSpec {
    File {
        path: PathBuf,
        #[serde(default)]
        normalize: bool,
    },
    Synthetic {
        d: usize,
        s: usize,
        eps: f64,
        n: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<DesignMatrix> {
        match self {
            DatasetSpec::File { path, normalize } => {
                let x = load_libsvm(&path.to_string_lossy())?;
                Ok(if *normalize { x.normalized() } else { x })
            }
            DatasetSpec::Synthetic { d, s, eps, n, seed } => synth_lowrank(*d, *s, *eps, *n, *seed),
        }
    }
}

fn default_trials() -> usize {
    25
}

fn default_criterion() -> String {
    "A".into()
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DatasetSpec,
    /// `A = prior_scale·I`; defaults to `1/n`.
    #[serde(default)]
    pub prior_scale: Option<f64>,
    /// Whitespace-separated `d × d` prior precision, overriding `prior_scale`.
    #[serde(default)]
    pub prior_file: Option<PathBuf>,
    #[serde(default = "default_criterion")]
    pub criterion: String,
    #[serde(default)]
    pub c_vector: Option<Vec<f64>>,
    /// Defaults to `d, d + ⌈d/2⌉, …` up to `5d`.
    #[serde(default)]
    pub k_grid: Option<Vec<usize>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub max_attempts: Option<usize>,
    #[serde(default)]
    pub pad: Option<String>,
    #[serde(default)]
    pub relax_max_iters: Option<usize>,
    #[serde(default)]
    pub relax_tol: Option<f64>,
    /// Predictive-length with squared norms.
    #[serde(default)]
    pub squared_lengths: bool,
    /// Record wall-clock times; when off `runtime_ms` is written as 0 and
    /// output is byte-identical across runs.
    #[serde(default = "default_true")]
    pub timing: bool,
}

impl ExperimentSpec {
    pub fn new(dataset: DatasetSpec) -> Self {
        ExperimentSpec {
            dataset,
            prior_scale: None,
            prior_file: None,
            criterion: default_criterion(),
            c_vector: None,
            k_grid: None,
            trials: default_trials(),
            seed: 0,
            methods: default_methods(),
            max_attempts: None,
            pad: None,
            relax_max_iters: None,
            relax_tol: None,
            squared_lengths: false,
            timing: true,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("experiment spec: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn prior(&self, x: &DesignMatrix) -> Result<Prior> {
        let d = x.d();
        let mut prior = match &self.prior_file {
            Some(p) => Prior::new(read_dense_matrix(&std::fs::read_to_string(p)?, d)?)?,
            None => {
                let s = self.prior_scale.unwrap_or(1.0 / x.n() as f64);
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(Error::invalid("prior_scale must be finite and nonnegative"));
                }
                Prior::scaled_identity(d, s)
            }
        };
        if let Some(c) = &self.c_vector {
            prior = prior.with_c(DVector::from_column_slice(c));
        }
        Ok(prior)
    }

    pub fn k_grid(&self, d: usize) -> Vec<usize> {
        self.k_grid.clone().unwrap_or_else(|| default_k_grid(d))
    }

    pub fn relax_config(&self) -> RelaxConfig {
        let mut cfg = RelaxConfig::default();
        if let Some(it) = self.relax_max_iters {
            cfg.max_iters = it;
        }
        if let Some(t) = self.relax_tol {
            cfg.tol = t;
        }
        cfg
    }

    pub fn select_options(&self) -> Result<SelectOptions> {
        let mut o = SelectOptions::default();
        if let Some(m) = self.max_attempts {
            o.max_attempts = m;
        }
        if let Some(p) = &self.pad {
            o.pad = p.parse::<PadRule>()?;
        }
        Ok(o)
    }
}

/// `d, d + ⌈d/2⌉, …` up to and including `5d`.
pub fn default_k_grid(d: usize) -> Vec<usize> {
    let step = d.div_ceil(2).max(1);
    let mut g: Vec<usize> = (d.max(1)..=5 * d.max(1)).step_by(step).collect();
    if g.last() != Some(&(5 * d.max(1))) {
        g.push(5 * d.max(1));
    }
    g
}

/// Parses a whitespace-separated square matrix of order `d`.
pub fn read_dense_matrix(text: &str, d: usize) -> Result<SymMatrix> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::invalid(format!("prior file: {t:?}: {e}"))))
        .collect::<Result<_>>()?;
    if vals.len() != d * d {
        return Err(Error::invalid(format!("prior file has {} entries, expected {}", vals.len(), d * d)));
    }
    SymMatrix::new(DMatrix::from_row_slice(d, d, &vals))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub k: usize,
    pub trial: usize,
    /// `NaN` when the method failed.
    pub value: f64,
    /// `value / f((k/n)·Σ_X)`
    pub ratio: f64,
    pub runtime_ms: f64,
    pub seed: u64,
}

/// Seed of one `(method, k, trial)` cell.
pub fn cell_seed(seed: u64, method: Method, k: usize, trial: usize) -> u64 {
    let key = derive_key(seed, crate::labels!["bench", method.name(), k, trial]);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}

/// Loads the dataset and runs every `(method, k, trial)` cell.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let x = spec.dataset.load()?;
    run_on(&x, spec)
}

/// Runs every cell on an already loaded design. Rows come back sorted by
/// method name, `k`, and trial. Cells that fail are kept with `NaN` values.
pub fn run_on(x: &DesignMatrix, spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let (n, d) = (x.n(), x.d());
    if spec.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let grid = spec.k_grid(d);
    if let Some(&k) = grid.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::invalid(format!("k = {k} outside [1, {n}]")));
    }
    let prior = spec.prior(x)?;
    let crit = Criterion::build(spec.criterion.parse::<CriterionKind>()?, x, &prior)?;
    let mut opts = spec.select_options()?;
    opts.warn_outside_regime = false;
    let relax_cfg = spec.relax_config();
    let weighting = if spec.squared_lengths { LengthWeight::SquaredNorm } else { LengthWeight::Norm };
    let sigma_x = x.subset_covariance(&(0..n).collect::<Vec<_>>());

    let reference: BTreeMap<usize, f64> =
        grid.iter().map(|&k| (k, eval(&crit, &sigma_x.scale(k as f64 / n as f64), &prior))).collect();
    if spec.methods.contains(&Method::RdppUniform) {
        for &k in &grid {
            let d_w = scaled_effective_dim(&sigma_x, &prior.a, k, n)?.value();
            if (k as f64) < 4.0 * d_w {
                log::warn!("k = {k} is below 4·d_w = {:.3}; the value bound is not guaranteed", 4.0 * d_w);
            }
        }
    }

    let relaxed: BTreeMap<usize, std::result::Result<(RelaxSolution, Duration), String>> =
        if spec.methods.contains(&Method::RdppSdp) {
            grid.par_iter()
                .map(|&k| {
                    let t = Instant::now();
                    let sol = relax::solve(x, &prior, &crit, k, &relax_cfg).map_err(|e| e.to_string());
                    (k, sol.map(|s| (s, t.elapsed())))
                })
                .collect()
        } else {
            BTreeMap::new()
        };

    let mut methods = spec.methods.clone();
    methods.sort_by_key(|m| m.name());
    methods.dedup();
    let mut cells = Vec::new();
    for &m in &methods {
        for &k in &grid {
            for t in 0..spec.trials {
                cells.push((m, k, t));
            }
        }
    }

    let rows = cells
        .par_iter()
        .map(|&(method, k, trial)| {
            let seed = cell_seed(spec.seed, method, k, trial);
            let mut rng = rng::seeded(seed);
            let start = Instant::now();
            let mut extra = Duration::ZERO;
            let outcome: Result<f64> = match method {
                Method::RdppSdp => match &relaxed[&k] {
                    Ok((sol, solve_time)) => {
                        extra = *solve_time;
                        select(x, &prior, &crit, &sol.w, k, &mut rng, &opts).map(|r| r.value)
                    }
                    Err(msg) => Err(Error::invalid(msg.clone())),
                },
                Method::RdppUniform => select_uniform(x, &prior, &crit, k, &mut rng, &opts).map(|r| r.value),
                Method::Greedy => greedy_bottom_up(x, &prior, &crit, k).map(|r| r.value),
                Method::Uniform => uniform_subset(n, k, &mut rng).map(|s| eval_subset(&crit, x, &s, &prior)),
                Method::PredictiveLength => {
                    predictive_length(x, k, weighting, &mut rng).map(|s| eval_subset(&crit, x, &s, &prior))
                }
            };
            let elapsed = start.elapsed() + extra;
            let value = outcome.unwrap_or_else(|e| {
                log::warn!("{method} k={k} trial={trial} failed: {e}");
                f64::NAN
            });
            ResultRow {
                method,
                k,
                trial,
                value,
                ratio: value / reference[&k],
                runtime_ms: if spec.timing { elapsed.as_secs_f64() * 1e3 } else { 0.0 },
                seed,
            }
        })
        .collect::<Vec<_>>();
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.k.to_string(),
            r.trial.to_string(),
            r.value.to_string(),
            r.ratio.to_string(),
            r.runtime_ms.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::invalid("unexpected results header"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::invalid(format!("{s:?}: {e}")));
    let int = |s: &str| s.parse::<u64>().map_err(|e| Error::invalid(format!("{s:?}: {e}")));
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ResultRow {
                method: rec[0].parse()?,
                k: int(&rec[1])? as usize,
                trial: int(&rec[2])? as usize,
                value: num(&rec[3])?,
                ratio: num(&rec[4])?,
                runtime_ms: num(&rec[5])?,
                seed: int(&rec[6])?,
            })
        })
        .collect()
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci<R: Rng + ?Sized>(values: &[f64], level: f64, resamples: usize, rng: &mut R) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewValues { needed: 2, got: values.len() });
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(Error::invalid("need 0 < level < 1 and at least one resample"));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok((values[0], values[0]));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo = ((alpha * resamples as f64).floor() as usize).min(resamples - 1);
    let hi = (((1.0 - alpha) * resamples as f64).ceil() as usize).saturating_sub(1).min(resamples - 1);
    Ok((means[lo], means[hi]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: Method,
    pub k: usize,
    /// Trials that produced a value.
    pub completed: usize,
    pub median_value: f64,
    pub mean_value: f64,
    pub ci: Option<(f64, f64)>,
    pub median_ratio: f64,
    pub median_runtime_ms: f64,
}

/// Per `(method, k)` medians plus a 95% bootstrap interval of the mean.
pub fn summarize(rows: &[ResultRow], resamples: usize, seed: u64) -> Vec<Summary> {
    let mut groups: BTreeMap<(&'static str, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method.name(), r.k)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let (method, k) = (g[0].method, g[0].k);
            let vals: Vec<f64> = g.iter().map(|r| r.value).filter(|v| !v.is_nan()).collect();
            let ratios: Vec<f64> = g.iter().map(|r| r.ratio).collect();
            let times: Vec<f64> = g.iter().map(|r| r.runtime_ms).collect();
            let mut rng = rng::derive_rng(seed, crate::labels!["summary", method.name(), k]);
            Summary {
                method,
                k,
                completed: vals.len(),
                median_value: median(&vals).unwrap_or(f64::NAN),
                mean_value: if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 },
                ci: bootstrap_ci(&vals, 0.95, resamples, &mut rng).ok(),
                median_ratio: median(&ratios).unwrap_or(f64::NAN),
                median_runtime_ms: median(&times).unwrap_or(f64::NAN),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Covariance {
    Identity,
    LowRank,
}

impl fmt::Display for Covariance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Covariance::Identity => "identity",
            Covariance::LowRank => "lowrank",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeffRow {
    pub covariance: Covariance,
    pub k: usize,
    /// `d_{(n/k)A}(Σ)`
    pub d_scaled: f64,
    /// `d_A(Σ)`
    pub d_full: f64,
}

/// Scaled and full effective dimensions for `Σ₁ = I` and
/// `Σ₂ = (1−ε)(d/s)·I_S + ε·I` under `A = a_scale·I`, treating `Σ` as the
/// covariance of `n` rows.
pub fn deff_compare(d: usize, s: usize, eps: f64, a_scale: f64, n: usize, k_grid: &[usize]) -> Result<Vec<DeffRow>> {
    if d == 0 || s == 0 || s > d {
        return Err(Error::invalid(format!("need 1 <= s <= d, got s={s}, d={d}")));
    }
    let a = SymMatrix::scaled_identity(d, a_scale);
    let mut out = Vec::with_capacity(2 * k_grid.len());
    for (cov, sigma) in [
        (Covariance::Identity, SymMatrix::identity(d)),
        (Covariance::LowRank, SymMatrix::from_diagonal(&lowrank_diagonal(d, s, eps))),
    ] {
        let d_full = effective_dim(&sigma, &a)?.value();
        for &k in k_grid {
            let d_scaled = scaled_effective_dim(&sigma, &a, k, n)?.value();
            out.push(DeffRow { covariance: cov, k, d_scaled, d_full });
        }
    }
    Ok(out)
}

pub fn write_deff_csv<W: Write>(rows: &[DeffRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["covariance", "k", "d_scaled", "d_full"])?;
    for r in rows {
        w.write_record([r.covariance.to_string(), r.k.to_string(), r.d_scaled.to_string(), r.d_full.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
