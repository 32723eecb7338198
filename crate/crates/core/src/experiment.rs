//! Replicated estimation sweeps over a grid of sample sizes, and sampler
//! benchmarks.

use std::fmt::{self, Write as _};
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::basis::{BasisSpec, JacobiParams};
use crate::error::{Error, Result};
use crate::estimators::{bh_estimate, vanilla_mc_estimate, EzSystem, Integrand};
use crate::integrands::IntegrandKind;
use crate::rng::RngStream;
use crate::sampler::{sample_univariate_tridiagonal, DppSample, JacobiEnsemble, SamplingMethod};
use crate::stats::{fit_loglog_slope, ks_normal, KsResult, LogLogFit, Summary};

pub const CSV_HEADER: &str = "estimator,d,N,replicate,value,failed,cond_estimate,rejections,elapsed_ns";
pub const BENCH_HEADER: &str = "d,N,method,replicates,mean_elapsed_ns,mean_rejections,ratio";
/// Stream reserved for drawing Jacobi parameters.
pub const PARAMETER_STREAM: u64 = u64::MAX;
/// Largest tolerated fraction of failed replicates at any N.
pub const FAILURE_BUDGET: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Bh,
    Ez,
    Mc,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Bh => "BH",
            Self::Ez => "EZ",
            Self::Mc => "MC",
        }
    }

    fn needs_dpp(&self) -> bool {
        !matches!(self, Self::Mc)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bh" => Ok(Self::Bh),
            "ez" => Ok(Self::Ez),
            "mc" => Ok(Self::Mc),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator {other:?}; expected bh, ez or mc"
            ))),
        }
    }
}

/// How the Jacobi exponents of an experiment are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ParameterPolicy {
    /// Explicit exponents; a single value is broadcast to every dimension.
    Fixed { a: Vec<f64>, b: Vec<f64> },
    /// `a^1 = b^1 = -1/2`, the others i.i.d. uniform on `[-1/2, 1/2]`.
    PaperRandom,
}

impl ParameterPolicy {
    pub fn uniform(a: f64, b: f64) -> Self {
        Self::Fixed { a: vec![a], b: vec![b] }
    }

    pub fn resolve(&self, d: usize, seed: u64) -> Result<JacobiParams> {
        match self {
            Self::Fixed { a, b } => {
                let widen = |v: &Vec<f64>, name: &str| match v.len() {
                    1 => Ok(vec![v[0]; d]),
                    n if n == d => Ok(v.clone()),
                    n => Err(Error::InvalidParameter(format!(
                        "{name} has {n} entries, expected 1 or {d}"
                    ))),
                };
                JacobiParams::new(widen(a, "a")?, widen(b, "b")?)
            }
            Self::PaperRandom => {
                let mut rng = RngStream::new(seed, PARAMETER_STREAM);
                let mut a = vec![-0.5];
                let mut b = vec![-0.5];
                for _ in 1..d {
                    a.push(rng.random_range(-0.5..=0.5));
                    b.push(rng.random_range(-0.5..=0.5));
                }
                a.truncate(d);
                b.truncate(d);
                JacobiParams::new(a, b)
            }
        }
    }
}

impl FromStr for ParameterPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "paper-random" => Ok(Self::PaperRandom),
            "fixed" => Ok(Self::uniform(-0.5, -0.5)),
            other => Err(Error::InvalidParameter(format!(
                "unknown parameter policy {other:?}; expected fixed or paper-random"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerChoice {
    /// Tridiagonal model in one dimension, chain rule otherwise.
    Auto,
    ChainRule,
    Tridiagonal,
}

impl FromStr for SamplerChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Self::Auto),
            "chain-rule" => Ok(Self::ChainRule),
            "tridiagonal" => Ok(Self::Tridiagonal),
            other => Err(Error::InvalidParameter(format!(
                "unknown sampler {other:?}; expected auto, chain-rule or tridiagonal"
            ))),
        }
    }
}

/// A sampler bound to one basis.
#[derive(Debug, Clone)]
pub enum Sampler {
    ChainRule(Box<JacobiEnsemble>),
    Tridiagonal { n: usize, a: f64, b: f64 },
}

impl Sampler {
    pub fn new(spec: &BasisSpec, choice: SamplerChoice) -> Result<Self> {
        let tridiagonal = match choice {
            SamplerChoice::Auto => spec.dim() == 1,
            SamplerChoice::ChainRule => false,
            SamplerChoice::Tridiagonal => true,
        };
        if tridiagonal {
            if spec.dim() != 1 {
                return Err(Error::InvalidParameter("tridiagonal sampler requires d = 1".into()));
            }
            Ok(Self::Tridiagonal {
                n: spec.size(),
                a: spec.params().a()[0],
                b: spec.params().b()[0],
            })
        } else {
            Ok(Self::ChainRule(Box::new(JacobiEnsemble::new(spec.clone())?)))
        }
    }

    pub fn method(&self) -> SamplingMethod {
        match self {
            Self::ChainRule(_) => SamplingMethod::ChainRule,
            Self::Tridiagonal { .. } => SamplingMethod::Tridiagonal,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<DppSample> {
        match self {
            Self::ChainRule(ens) => Ok(ens.sample(rng)),
            Self::Tridiagonal { n, a, b } => sample_univariate_tridiagonal(*n, *a, *b, rng),
        }
    }
}

/// Stream id of one replicate: `lane` 0 is the DPP draw, 1 the i.i.d. draw.
pub fn replicate_stream(n_index: usize, replicate: usize, lane: u64) -> u64 {
    ((n_index as u64) << 33) | ((replicate as u64) << 1) | lane
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub integrand: IntegrandKind,
    pub d: usize,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub estimators: Vec<EstimatorKind>,
    pub seed: u64,
    pub policy: ParameterPolicy,
    pub sampler: SamplerChoice,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::InvalidParameter("N grid must be non-empty and positive".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("N grid must be strictly increasing".into()));
        }
        if self.replicates < 2 {
            return Err(Error::InvalidParameter("at least 2 replicates are required".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidParameter("no estimator selected".into()));
        }
        let mut seen = self.estimators.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.estimators.len() {
            return Err(Error::InvalidParameter("estimators listed twice".into()));
        }
        Ok(())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub estimator: EstimatorKind,
    pub d: usize,
    pub n: usize,
    pub replicate: usize,
    pub value: Option<f64>,
    pub cond_estimate: Option<f64>,
    pub rejections: u64,
    pub elapsed_ns: u128,
}

impl Row {
    pub fn failed(&self) -> bool {
        self.value.is_none()
    }

    /// The row without its timing column.
    pub fn deterministic_fields(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.estimator,
            self.d,
            self.n,
            self.replicate,
            opt(self.value),
            u8::from(self.failed()),
            opt(self.cond_estimate),
            self.rejections
        )
    }
}

pub fn write_csv<W: Write>(rows: &[Row], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{},{}", row.deterministic_fields(), row.elapsed_ns)?;
    }
    out.flush()
}

/// Statistics of one estimator at one `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateCell {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub truth: Option<f64>,
    /// Values of the successful replicates.
    pub values: Vec<f64>,
    pub failures: usize,
    pub summary: Option<Summary>,
    pub ks: Option<KsResult>,
    pub mean_rejections: f64,
    pub mean_elapsed_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub estimator: EstimatorKind,
    pub fit: Option<LogLogFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub integrand: String,
    pub d: usize,
    pub params: JacobiParams,
    pub replicates: usize,
    pub cells: Vec<EstimateCell>,
    pub fits: Vec<SlopeFit>,
}

impl EstimateReport {
    pub fn cell(&self, estimator: EstimatorKind, n: usize) -> Option<&EstimateCell> {
        self.cells.iter().find(|c| c.estimator == estimator && c.n == n)
    }

    pub fn fit(&self, estimator: EstimatorKind) -> Option<LogLogFit> {
        self.fits.iter().find(|f| f.estimator == estimator).and_then(|f| f.fit)
    }

    pub fn failure_budget_exceeded(&self) -> bool {
        self.cells
            .iter()
            .any(|c| c.failures as f64 > FAILURE_BUDGET * self.replicates as f64)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "integrand {} d={} R={} a={:?} b={:?}",
            self.integrand,
            self.d,
            self.replicates,
            self.params.a(),
            self.params.b()
        );
        let _ = writeln!(
            s,
            "{:<4}{:>6}{:>15}{:>13}{:>15}{:>13}{:>9}{:>6}{:>12}",
            "est", "N", "mean", "variance", "median", "iqr", "ks_p*", "fail", "rejections"
        );
        for c in &self.cells {
            let (mean, var, med, iqr) = c
                .summary
                .map(|s| (s.mean, s.variance, s.median, s.iqr))
                .unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
            let ks = c.ks.map(|k| format!("{:.3}", k.p_value)).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<4}{:>6}{:>15.6e}{:>13.3e}{:>15.6e}{:>13.3e}{:>9}{:>6}{:>12.1}",
                c.estimator.as_str(),
                c.n,
                mean,
                var,
                med,
                iqr,
                ks,
                c.failures,
                c.mean_rejections
            );
        }
        for f in &self.fits {
            match f.fit {
                Some(fit) => {
                    let _ = writeln!(
                        s,
                        "{} variance slope {:.3} (R^2 {:.3}, {} points)",
                        f.estimator, fit.slope, fit.r2, fit.points
                    );
                }
                None => {
                    let _ = writeln!(s, "{} variance slope unavailable", f.estimator);
                }
            }
        }
        s.push_str("* KS p-values use parameters estimated from the data and are approximate\n");
        s
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub params: JacobiParams,
    pub rows: Vec<Row>,
    pub report: EstimateReport,
}

impl ExperimentRun {
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_csv(&self.rows, out)
    }
}

fn elapsed(start: Instant) -> u128 {
    start.elapsed().as_nanos()
}

fn run_replicate(
    config: &ExperimentConfig,
    params: &JacobiParams,
    spec: &BasisSpec,
    sampler: Option<&Sampler>,
    f: &Integrand,
    n_index: usize,
    replicate: usize,
) -> Result<Vec<Row>> {
    let n = spec.size();
    let row = |estimator, value, cond_estimate, rejections, elapsed_ns| Row {
        estimator,
        d: config.d,
        n,
        replicate,
        value,
        cond_estimate,
        rejections,
        elapsed_ns,
    };
    let mut dpp = None;
    if let Some(sampler) = sampler {
        let mut rng = RngStream::new(config.seed, replicate_stream(n_index, replicate, 0));
        let start = Instant::now();
        let sample = sampler.sample(&mut rng)?;
        dpp = Some((sample, elapsed(start)));
    }
    let mut rows = Vec::with_capacity(config.estimators.len());
    for &estimator in &config.estimators {
        match (estimator, &dpp) {
            (EstimatorKind::Bh, Some((sample, sample_ns))) => {
                let start = Instant::now();
                let value = match bh_estimate(spec, sample, f) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        log::debug!("BH failed at N={n}, replicate {replicate}: {e}");
                        None
                    }
                };
                rows.push(row(estimator, value, None, sample.total_rejections(), sample_ns + elapsed(start)));
            }
            (EstimatorKind::Ez, Some((sample, sample_ns))) => {
                let start = Instant::now();
                let values: Vec<f64> = sample.points().map(|x| f.eval(x)).collect();
                let (value, cond) = match EzSystem::new(spec, sample) {
                    Ok(system) => (Some(system.estimate(&values)), Some(system.condition_estimate())),
                    Err(Error::Conditioning { rcond }) => {
                        log::debug!("EZ ill-conditioned at N={n}, replicate {replicate}: rcond {rcond:e}");
                        (None, Some(rcond))
                    }
                    Err(e) => {
                        log::debug!("EZ failed at N={n}, replicate {replicate}: {e}");
                        (None, None)
                    }
                };
                rows.push(row(estimator, value, cond, sample.total_rejections(), sample_ns + elapsed(start)));
            }
            (EstimatorKind::Mc, _) => {
                let mut rng = RngStream::new(config.seed, replicate_stream(n_index, replicate, 1));
                let start = Instant::now();
                let value = vanilla_mc_estimate(params, n, f, &mut rng).ok();
                rows.push(row(estimator, value, None, 0, elapsed(start)));
            }
            (_, None) => unreachable!("DPP estimators always have a sample"),
        }
    }
    Ok(rows)
}

fn summarize(estimator: EstimatorKind, n: usize, truth: Option<f64>, rows: &[&Row]) -> EstimateCell {
    let values: Vec<f64> = rows.iter().filter_map(|r| r.value).collect();
    let count = rows.len().max(1) as f64;
    EstimateCell {
        estimator,
        n,
        truth,
        failures: rows.len() - values.len(),
        summary: Summary::of(&values).ok(),
        ks: ks_normal(&values).ok(),
        mean_rejections: rows.iter().map(|r| r.rejections as f64).sum::<f64>() / count,
        mean_elapsed_ns: rows.iter().map(|r| r.elapsed_ns as f64).sum::<f64>() / count,
        values,
    }
}

/// Runs every `(N, replicate)` pair; BH and EZ share one DPP sample per pair.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let params = config.policy.resolve(config.d, config.seed)?;
    log::info!("Jacobi parameters a={:?} b={:?}", params.a(), params.b());
    let needs_dpp = config.estimators.iter().any(EstimatorKind::needs_dpp);
    let mut rows = Vec::with_capacity(config.estimators.len() * config.n_grid.len() * config.replicates);
    let mut cells = Vec::new();
    let mut shared = None;
    for (n_index, &n) in config.n_grid.iter().enumerate() {
        let spec = BasisSpec::new(params.clone(), n)?;
        let sampler = if needs_dpp { Some(Sampler::new(&spec, config.sampler)?) } else { None };
        let f = match &shared {
            Some(f) if !config.integrand.depends_on_size() => Integrand::clone(f),
            _ => {
                let built = config.integrand.build(&params, n)?;
                shared = Some(built.clone());
                built
            }
        };
        let per_replicate = (0..config.replicates)
            .into_par_iter()
            .map(|r| run_replicate(config, &params, &spec, sampler.as_ref(), &f, n_index, r))
            .collect::<Result<Vec<_>>>()?;
        let block: Vec<Row> = per_replicate.into_iter().flatten().collect();
        for &estimator in &config.estimators {
            let mine: Vec<&Row> = block.iter().filter(|r| r.estimator == estimator).collect();
            cells.push(summarize(estimator, n, f.truth(), &mine));
        }
        rows.extend(block);
    }
    let fits = config
        .estimators
        .iter()
        .map(|&estimator| {
            let (ns, vars): (Vec<usize>, Vec<f64>) = cells
                .iter()
                .filter(|c| c.estimator == estimator)
                .map(|c| (c.n, c.summary.map_or(f64::NAN, |s| s.variance)))
                .unzip();
            SlopeFit {
                estimator,
                fit: fit_loglog_slope(&ns, &vars).ok(),
            }
        })
        .collect();
    let report = EstimateReport {
        integrand: config.integrand.to_string(),
        d: config.d,
        params: params.clone(),
        replicates: config.replicates,
        cells,
        fits,
    };
    Ok(ExperimentRun { params, rows, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub d_grid: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub policy: ParameterPolicy,
    pub sampler: SamplerChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub d: usize,
    pub n: usize,
    pub method: SamplingMethod,
    pub replicates: usize,
    pub mean_elapsed_ns: f64,
    pub mean_rejections: f64,
    /// `mean_rejections / (2^d N ln N)`.
    pub ratio: f64,
}

/// Mean wall-clock time and rejections per sample for each `(d, N)`.
pub fn bench_sampler(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.replicates == 0 {
        return Err(Error::InvalidParameter("at least one replicate is required".into()));
    }
    let mut out = Vec::new();
    for (d_index, &d) in config.d_grid.iter().enumerate() {
        let params = config.policy.resolve(d, config.seed)?;
        for (n_index, &n) in config.n_grid.iter().enumerate() {
            let spec = BasisSpec::new(params.clone(), n)?;
            let sampler = Sampler::new(&spec, config.sampler)?;
            let stats = (0..config.replicates)
                .into_par_iter()
                .map(|r| {
                    let stream = replicate_stream(d_index * config.n_grid.len() + n_index, r, 0);
                    let mut rng = RngStream::new(config.seed, stream);
                    let start = Instant::now();
                    let sample = sampler.sample(&mut rng)?;
                    Ok((elapsed(start) as f64, sample.total_rejections() as f64))
                })
                .collect::<Result<Vec<_>>>()?;
            let k = stats.len() as f64;
            let mean_elapsed_ns = stats.iter().map(|s| s.0).sum::<f64>() / k;
            let mean_rejections = stats.iter().map(|s| s.1).sum::<f64>() / k;
            let scale = 2f64.powi(d as i32) * n as f64 * (n as f64).ln();
            out.push(BenchRow {
                d,
                n,
                method: sampler.method(),
                replicates: config.replicates,
                mean_elapsed_ns,
                mean_rejections,
                ratio: mean_rejections / scale,
            });
        }
    }
    Ok(out)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{BENCH_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.d,
            r.n,
            r.method.as_str(),
            r.replicates,
            r.mean_elapsed_ns,
            r.mean_rejections,
            r.ratio
        )?;
    }
    out.flush()
}
