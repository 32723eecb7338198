//! Flat `key = value` experiment configuration.
//!
//! Keys: `integrand`, `epsilon`, `eigsum_m`, `d`, `n_grid`, `replicates`,
//! `estimators`, `seed`, `policy`, `a`, `b`, `sampler`, `output`.
//! Lists are comma separated. `#` starts a comment.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use dppmc::experiment::{EstimatorKind, ExperimentConfig, ParameterPolicy, SamplerChoice};
use dppmc::integrands::{EigTerms, IntegrandKind, DEFAULT_EPSILON};

pub const KEYS: &[&str] = &[
    "integrand",
    "epsilon",
    "eigsum_m",
    "d",
    "n_grid",
    "replicates",
    "estimators",
    "seed",
    "policy",
    "a",
    "b",
    "sampler",
    "output",
];

pub type Settings = BTreeMap<String, String>;

pub fn parse(text: &str) -> Result<Settings> {
    let mut out = Settings::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got {raw:?}", i + 1))?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key {key:?}", i + 1);
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("line {}: key {key:?} given twice", i + 1);
        }
    }
    Ok(out)
}

fn list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|e| anyhow!("{key}: cannot parse {v:?}: {e}"))
        })
        .collect()
}

fn scalar<T: std::str::FromStr>(settings: &Settings, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    settings
        .get(key)
        .map(|v| v.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse {v:?}: {e}")))
        .transpose()
}

pub fn experiment(settings: &Settings) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let epsilon = scalar::<f64>(settings, "epsilon")?.unwrap_or(DEFAULT_EPSILON);
    let integrand = match settings.get("integrand").map(String::as_str).unwrap_or("bump") {
        "bump" => IntegrandKind::Bump { epsilon },
        "eigsum" => IntegrandKind::EigSum(
            scalar::<EigTerms>(settings, "eigsum_m")?.unwrap_or(EigTerms::NextAfterSize),
        ),
        other => other.parse()?,
    };
    let policy = match (settings.get("policy"), settings.get("a"), settings.get("b")) {
        (Some(p), None, None) => p.parse()?,
        (Some(p), _, _) if p != "fixed" => bail!("a and b only apply to the fixed policy"),
        (_, None, None) => ParameterPolicy::PaperRandom,
        (_, a, b) => ParameterPolicy::Fixed {
            a: list(a.map_or("-0.5", String::as_str), "a")?,
            b: list(b.map_or("-0.5", String::as_str), "b")?,
        },
    };
    let config = ExperimentConfig {
        integrand,
        d: scalar(settings, "d")?.unwrap_or(1),
        n_grid: list(settings.get("n_grid").map_or("20,40,70,100,150", String::as_str), "n_grid")?,
        replicates: scalar(settings, "replicates")?.unwrap_or(50),
        estimators: list::<EstimatorKind>(
            settings.get("estimators").map_or("bh,ez,mc", String::as_str),
            "estimators",
        )?,
        seed: scalar(settings, "seed")?.context("seed is required")?,
        policy,
        sampler: scalar::<SamplerChoice>(settings, "sampler")?.unwrap_or(SamplerChoice::Auto),
    };
    config.validate()?;
    Ok((config, settings.get("output").map(PathBuf::from)))
}
