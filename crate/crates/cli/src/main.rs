mod config;

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dppmc::basis::BasisSpec;
use dppmc::estimators::{bh_estimate, ez_estimate, vanilla_mc_estimate};
use dppmc::experiment::{
    bench_sampler, run_experiment, write_bench_csv, BenchConfig, EstimatorKind, ParameterPolicy, Sampler,
    SamplerChoice,
};
use dppmc::integrands::{EigTerms, IntegrandKind, DEFAULT_EPSILON};
use dppmc::rng::RngStream;

#[derive(Parser)]
#[command(name = "dppmc", version, about = "Monte Carlo integration with projection DPPs on [-1, 1]^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one sample of the multivariate Jacobi ensemble as CSV
    Sample(SampleArgs),
    /// Print one estimate of an integral
    Estimate(EstimateArgs),
    /// Run a replicated sweep over N and write one CSV row per estimate
    Experiment(ExperimentArgs),
    /// Time the sampler and count rejections
    Bench(BenchArgs),
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(short, long, default_value_t = 1)]
    d: usize,
    /// Number of points
    #[arg(short, long)]
    n: usize,
    /// Jacobi exponent(s) a, one value or one per dimension
    #[arg(long, default_value = "-0.5", allow_hyphen_values = true)]
    a: String,
    #[arg(long, default_value = "-0.5", allow_hyphen_values = true)]
    b: String,
    #[arg(long)]
    seed: u64,
    /// Replicate id selecting the random stream
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    /// auto, chain-rule or tridiagonal
    #[arg(long, default_value = "auto")]
    sampler: SamplerChoice,
}

impl EnsembleArgs {
    fn spec(&self) -> Result<BasisSpec> {
        let policy = ParameterPolicy::Fixed {
            a: parse_list(&self.a, "a")?,
            b: parse_list(&self.b, "b")?,
        };
        Ok(BasisSpec::new(policy.resolve(self.d, self.seed)?, self.n)?)
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    ensemble: EnsembleArgs,
    /// bump, eigsum, abs, heaviside, cosine or mix
    #[arg(long, default_value = "bump")]
    integrand: String,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Terms of eigsum: an integer or N+1
    #[arg(long, default_value = "N+1")]
    eigsum_m: EigTerms,
    /// bh, ez or mc
    #[arg(long, default_value = "bh")]
    estimator: EstimatorKind,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key = value file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    integrand: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    eigsum_m: Option<String>,
    #[arg(short, long)]
    d: Option<String>,
    /// Comma-separated, strictly increasing
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(short = 'r', long)]
    replicates: Option<String>,
    /// Comma-separated subset of bh,ez,mc
    #[arg(long)]
    estimators: Option<String>,
    /// fixed or paper-random
    #[arg(long)]
    policy: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long)]
    sampler: Option<String>,
    #[arg(short, long)]
    output: Option<String>,
    /// Print the summary table to standard error
    #[arg(long)]
    report: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "1,2,3")]
    d_grid: String,
    #[arg(long, default_value = "20,50,100")]
    n_grid: String,
    #[arg(short = 'r', long, default_value_t = 10)]
    replicates: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "paper-random")]
    policy: ParameterPolicy,
    #[arg(long, default_value = "auto")]
    sampler: SamplerChoice,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Too many replicates failed numerically.
#[derive(Debug)]
struct NumericalFailure(String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn parse_list<T: std::str::FromStr>(text: &str, name: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    text.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|e| anyhow::anyhow!("{name}: cannot parse {v:?}: {e}")))
        .collect()
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sample(args: &SampleArgs) -> Result<()> {
    let e = &args.ensemble;
    let spec = e.spec()?;
    let mut rng = RngStream::new(e.seed, e.replicate);
    let sample = Sampler::new(&spec, e.sampler)?.sample(&mut rng)?;
    log::info!(
        "{} sample, {} marginal and {} conditional rejections",
        sample.method.as_str(),
        sample.rejections_marginal,
        sample.rejections_conditional
    );
    let mut out = open_output(args.output.as_deref())?;
    let header: Vec<String> = (1..=e.d).map(|i| format!("x{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for x in sample.points() {
        let row: Vec<String> = x.iter().map(f64::to_string).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let e = &args.ensemble;
    let spec = e.spec()?;
    let kind = match args.integrand.as_str() {
        "bump" => IntegrandKind::Bump { epsilon: args.epsilon },
        "eigsum" => IntegrandKind::EigSum(args.eigsum_m),
        other => other.parse()?,
    };
    let f = kind.build(spec.params(), e.n)?;
    let mut rng = RngStream::new(e.seed, e.replicate);
    let value = match args.estimator {
        EstimatorKind::Mc => vanilla_mc_estimate(spec.params(), e.n, &f, &mut rng)?,
        dpp => {
            let sample = Sampler::new(&spec, e.sampler)?.sample(&mut rng)?;
            let result = match dpp {
                EstimatorKind::Bh => bh_estimate(&spec, &sample, &f),
                _ => ez_estimate(&spec, &sample, &f),
            };
            result.map_err(|err| NumericalFailure(format!("{} estimate failed: {err}", dpp)))?
        }
    };
    println!("{value}");
    if let Some(truth) = f.truth() {
        log::info!("reference {truth}, error {:e}", value - truth);
    }
    Ok(())
}

fn experiment(args: &ExperimentArgs) -> Result<()> {
    let mut settings = match &args.config {
        Some(p) => config::parse(
            &std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?,
        )
        .with_context(|| format!("in {}", p.display()))?,
        None => config::Settings::new(),
    };
    let overrides = [
        ("integrand", &args.integrand),
        ("epsilon", &args.epsilon),
        ("eigsum_m", &args.eigsum_m),
        ("d", &args.d),
        ("n_grid", &args.n_grid),
        ("replicates", &args.replicates),
        ("estimators", &args.estimators),
        ("policy", &args.policy),
        ("a", &args.a),
        ("b", &args.b),
        ("sampler", &args.sampler),
        ("output", &args.output),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            settings.insert(key.to_string(), v.clone());
        }
    }
    settings.insert("seed".into(), args.seed.to_string());
    let (cfg, output) = config::experiment(&settings)?;
    let run = run_experiment(&cfg)?;
    run.write_csv(open_output(output.as_deref())?)?;
    if args.report {
        eprint!("{}", run.report.render());
    }
    if run.report.failure_budget_exceeded() {
        bail!(NumericalFailure(
            "more than 20% of replicates failed at some N".into()
        ));
    }
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let rows = bench_sampler(&BenchConfig {
        d_grid: parse_list(&args.d_grid, "d_grid")?,
        n_grid: parse_list(&args.n_grid, "n_grid")?,
        replicates: args.replicates,
        seed: args.seed,
        policy: args.policy.clone(),
        sampler: args.sampler,
    })?;
    write_bench_csv(&rows, open_output(args.output.as_deref())?)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Sample(a) => sample(a),
        Command::Estimate(a) => estimate(a),
        Command::Experiment(a) => experiment(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<NumericalFailure>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
