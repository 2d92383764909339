//! Command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::baselines::{greedy_bottom_up, predictive_length, uniform_subset, LengthWeight};
use crate::bench::{self, DatasetSpec, ExperimentSpec, Method};
use crate::criteria::{eval_subset, Criterion, CriterionKind};
use crate::dataset::{load_libsvm, DesignMatrix, Prior};
use crate::error::{Error, Result};
use crate::rdpp::{build_kernel, expected_size, WeightVector};
use crate::relax::RelaxConfig;
use crate::rng;
use crate::selector::{select, select_uniform, PadRule, SelectOptions, DEFAULT_MAX_ATTEMPTS};

#[derive(Debug, Parser)]
#[command(name = "bed", version, about = "Bayesian experimental design with regularized DPPs")]
pub struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true, env = rng::SEED_ENV, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select k rows and print their indices and criterion value.
    Design(DesignArgs),
    /// Benchmarks.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Draw from the regularized DPP and print a histogram of subset sizes.
    Sample(SampleArgs),
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// A = S·I; defaults to 1/n.
    #[arg(long, conflicts_with = "prior_file")]
    pub prior_scale: Option<f64>,
    /// Whitespace-separated d×d prior precision.
    #[arg(long)]
    pub prior_file: Option<PathBuf>,
}

impl PriorArgs {
    fn resolve(&self, x: &DesignMatrix) -> Result<Prior> {
        match &self.prior_file {
            Some(p) => Prior::new(bench::read_dense_matrix(&std::fs::read_to_string(p)?, x.d())?),
            None => Ok(Prior::scaled_identity(x.d(), self.prior_scale.unwrap_or(1.0 / x.n() as f64))),
        }
    }
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// libsvm file, or - for stdin.
    #[arg(long)]
    pub data: String,
    #[arg(long, default_value = "A")]
    pub criterion: CriterionKind,
    #[arg(long)]
    pub k: usize,
    /// rdpp-sdp, rdpp-uniform, greedy, uniform, or plen.
    #[arg(long, default_value = "rdpp-uniform")]
    pub method: Method,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// File with the d entries of c for C-optimality.
    #[arg(long)]
    pub c_vector: Option<PathBuf>,
    #[arg(long, default_value = "greedy")]
    pub pad: PadRule,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: usize,
    /// Scale rows so the largest norm is 1.
    #[arg(long)]
    pub normalize: bool,
    /// Predictive-length weights by squared norms.
    #[arg(long)]
    pub squared_lengths: bool,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Run an experiment grid and write results as CSV.
    Run(BenchRunArgs),
    /// Compare scaled and full effective dimensions.
    Deff(DeffArgs),
}

#[derive(Debug, Args)]
pub struct BenchRunArgs {
    /// TOML experiment description; flags below override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Synthetic low-rank design as d,s,eps,n.
    #[arg(long, value_delimiter = ',')]
    pub synthetic: Option<Vec<f64>>,
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub criterion: Option<CriterionKind>,
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub prior_scale: Option<f64>,
    /// Write runtime_ms as 0 so output is reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// Print per-method medians and bootstrap intervals to stderr.
    #[arg(long)]
    pub summary: bool,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeffArgs {
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    #[arg(long, default_value_t = 10)]
    pub s: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub a_scale: f64,
    /// Number of rows the covariance stands for.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Defaults to 1..=d.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub data: String,
    /// uniform:K for p = K/n, uniform:K/N for p = K/N, or a file of n weights.
    #[arg(long)]
    pub p: String,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(path: &str, normalize: bool) -> Result<DesignMatrix> {
    let x = load_libsvm(path)?;
    Ok(if normalize { x.normalized() } else { x })
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    std::fs::read_to_string(path)?
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::invalid(format!("{}: {t:?}: {e}", path.display()))))
        .collect()
}

fn design(args: &DesignArgs, seed: u64) -> Result<()> {
    let x = load(&args.data, args.normalize)?;
    let mut prior = args.prior.resolve(&x)?;
    if let Some(p) = &args.c_vector {
        prior = prior.with_c(DVector::from_vec(read_vector(p)?));
    }
    let crit = Criterion::build(args.criterion, &x, &prior)?;
    let opts = SelectOptions { max_attempts: args.max_attempts, pad: args.pad, ..Default::default() };
    let mut rng = rng::derive_rng(seed, crate::labels!["design", args.method.name(), args.k]);
    let (subset, value) = match args.method {
        Method::RdppSdp => {
            let sol = crate::relax::solve(&x, &prior, &crit, args.k, &RelaxConfig::default())?;
            let r = select(&x, &prior, &crit, &sol.w, args.k, &mut rng, &opts)?;
            log::info!("relaxed objective {} after {} iterations", sol.objective, sol.iters);
            report_sampling(&r);
            (r.subset, r.value)
        }
        Method::RdppUniform => {
            let r = select_uniform(&x, &prior, &crit, args.k, &mut rng, &opts)?;
            report_sampling(&r);
            (r.subset, r.value)
        }
        Method::Greedy => {
            let r = greedy_bottom_up(&x, &prior, &crit, args.k)?;
            (r.subset, r.value)
        }
        Method::Uniform => {
            let s = uniform_subset(x.n(), args.k, &mut rng)?;
            let v = eval_subset(&crit, &x, &s, &prior);
            (s, v)
        }
        Method::PredictiveLength => {
            let w = if args.squared_lengths { LengthWeight::SquaredNorm } else { LengthWeight::Norm };
            let s = predictive_length(&x, args.k, w, &mut rng)?;
            let v = eval_subset(&crit, &x, &s, &prior);
            (s, v)
        }
    };
    let mut out = output(&None)?;
    let idx: Vec<String> = subset.iter().map(|i| i.to_string()).collect();
    writeln!(out, "subset: {}", idx.join(" "))?;
    writeln!(out, "value: {value}")?;
    out.flush()?;
    Ok(())
}

fn report_sampling(r: &crate::selector::DesignResult) {
    if let Some(s) = &r.sampling {
        log::info!(
            "{} after {} attempts (d_w = {:.4}, eps = {:.4}, bound factor = {:.4})",
            s.accepted_by,
            s.attempts,
            s.d_w,
            s.eps_used,
            s.bound_factor
        );
    }
}

fn bench_run(args: &BenchRunArgs, seed: Option<u64>) -> Result<()> {
    let mut spec = match (&args.spec, &args.data, &args.synthetic) {
        (Some(p), _, _) => ExperimentSpec::from_path(p)?,
        (None, Some(path), _) => {
            ExperimentSpec::new(DatasetSpec::File { path: path.clone(), normalize: args.normalize })
        }
        (None, None, Some(v)) if v.len() != 4 => {
            return Err(Error::invalid("--synthetic takes d,s,eps,n"));
        }
        (None, None, Some(v)) => ExperimentSpec::new(DatasetSpec::Synthetic {
            d: v[0] as usize,
            s: v[1] as usize,
            eps: v[2],
            n: v[3] as usize,
            seed: seed.unwrap_or(0),
        }),
        (None, None, None) => return Err(Error::invalid("one of --spec, --data, --synthetic is required")),
    };
    if args.spec.is_some() {
        if let Some(path) = &args.data {
            spec.dataset = DatasetSpec::File { path: path.clone(), normalize: args.normalize };
        }
    }
    if let Some(c) = args.criterion {
        spec.criterion = c.to_string();
    }
    if let Some(g) = &args.k_grid {
        spec.k_grid = Some(g.clone());
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(m) = &args.methods {
        spec.methods = m.clone();
    }
    if let Some(s) = args.prior_scale {
        spec.prior_scale = Some(s);
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if args.no_timing {
        spec.timing = false;
    }
    let rows = bench::run(&spec)?;
    bench::write_csv(&rows, output(&args.out)?)?;
    if args.summary {
        let mut err = io::stderr().lock();
        for s in bench::summarize(&rows, 2000, spec.seed) {
            let (lo, hi) = s.ci.unwrap_or((f64::NAN, f64::NAN));
            writeln!(
                err,
                "{:<18} k={:<4} median={:<12.6e} ci=[{:.6e}, {:.6e}] ratio={:.4} runtime_ms={:.3}",
                s.method.name(),
                s.k,
                s.median_value,
                lo,
                hi,
                s.median_ratio,
                s.median_runtime_ms
            )?;
        }
    }
    Ok(())
}

fn bench_deff(args: &DeffArgs) -> Result<()> {
    let grid = args.k_grid.clone().unwrap_or_else(|| (1..=args.d.min(args.n)).collect());
    let rows = bench::deff_compare(args.d, args.s, args.eps, args.a_scale, args.n, &grid)?;
    bench::write_deff_csv(&rows, output(&args.out)?)
}

fn parse_weights(spec: &str, n: usize) -> Result<Vec<f64>> {
    if let Some(rest) = spec.strip_prefix("uniform:") {
        let bad = || Error::invalid(format!("bad weight spec {spec:?}"));
        let p = match rest.split_once('/') {
            Some((a, b)) => a.trim().parse::<f64>().map_err(|_| bad())? / b.trim().parse::<f64>().map_err(|_| bad())?,
            None => rest.trim().parse::<f64>().map_err(|_| bad())? / n as f64,
        };
        return Ok(vec![p; n]);
    }
    let w = read_vector(Path::new(spec))?;
    if w.len() != n {
        return Err(Error::InfeasibleWeights(format!("{} weights for {n} rows", w.len())));
    }
    Ok(w)
}

fn sample(args: &SampleArgs, seed: u64) -> Result<()> {
    let x = load(&args.data, args.normalize)?;
    let prior = args.prior.resolve(&x)?;
    let p = WeightVector::new(parse_weights(&args.p, x.n())?)?;
    let kernel = build_kernel(&x, &prior, &p)?;
    let es = expected_size(&kernel);
    log::info!("expected size {:.4}, bound {:.4}", es.exact, es.bound);
    let mut counts = vec![0u64; x.n() + 1];
    let mut rng = rng::derive_rng(seed, crate::labels!["sample"]);
    for _ in 0..args.draws {
        counts[kernel.sample(&mut rng).0.len()] += 1;
    }
    let mut w = csv::Writer::from_writer(output(&args.out)?);
    w.write_record(["size", "count"])?;
    let last = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
    for (size, c) in counts.iter().enumerate().take(last + 1) {
        w.write_record([size.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn execute(cli: &Cli, seed_given: bool) -> Result<()> {
    match &cli.command {
        Command::Design(a) => design(a, cli.seed),
        Command::Bench(BenchCommand::Run(a)) => bench_run(a, seed_given.then_some(cli.seed)),
        Command::Bench(BenchCommand::Deff(a)) => bench_deff(a),
        Command::Sample(a) => sample(a, cli.seed),
    }
}

/// Parses the process arguments, runs the command, and maps errors to exit
/// statuses.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let parsed = <Cli as clap::CommandFactory>::command()
        .try_get_matches()
        .and_then(|m| <Cli as clap::FromArgMatches>::from_arg_matches(&m).map(|c| (m, c)));
    let (matches, cli) = match parsed {
        Ok(v) => v,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let seed_given = matches.value_source("seed").is_some_and(|s| s != clap::parser::ValueSource::DefaultValue);
    match execute(&cli, seed_given) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
