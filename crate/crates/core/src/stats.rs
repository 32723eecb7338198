//! Goodness-of-fit tests and summaries used by the experiment harness.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Minimum expected count per bin before neighbouring bins are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

/// `Q(λ) = 2 Σ_{j≥1} (-1)^{j-1} exp(-2 j² λ²)`, the Kolmogorov tail.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with the small-sample correction of the effective size.
fn ks_p_value(statistic: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_tail((root + 0.12 + 0.11 / root) * statistic)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Set when the input has zero spread; the statistic is then 0.
    pub degenerate: bool,
    /// Set when the reference law has parameters estimated from the data.
    pub approximate: bool,
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(values: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if values.is_empty() {
        return Err(Error::InsufficientData("KS test needs at least one value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut statistic = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        statistic = statistic.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic,
        p_value: ks_p_value(statistic, n),
        degenerate: false,
        approximate: false,
    })
}

/// KS test against the normal law with the sample mean and standard deviation.
pub fn ks_normal(values: &[f64]) -> Result<KsResult> {
    if values.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "normality test needs at least 20 values, got {}",
            values.len()
        )));
    }
    let summary = Summary::of(values)?;
    let sd = summary.variance.sqrt();
    if !(sd > 0.0) || !(sd > 1e-14 * summary.mean.abs()) {
        return Ok(KsResult {
            statistic: 0.0,
            p_value: 1.0,
            degenerate: true,
            approximate: true,
        });
    }
    let normal = Normal::new(summary.mean, sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut result = ks_one_sample(values, |x| normal.cdf(x))?;
    result.approximate = true;
    Ok(result)
}

/// Two-sample KS test.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InsufficientData("two-sample KS needs non-empty samples".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut statistic = 0.0f64;
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        statistic = statistic.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(KsResult {
        statistic,
        p_value: ks_p_value(statistic, n * m / (n + m)),
        degenerate: false,
        approximate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins remaining after pooling.
    pub bins: usize,
}

/// Pearson χ² test of observed counts against expected counts.
///
/// Consecutive bins are pooled until each expected count reaches
/// [`MIN_EXPECTED`]; `constraints` is subtracted from the pooled bin count
/// to get the degrees of freedom (1 when totals are matched).
pub fn chi_square(observed: &[f64], expected: &[f64], constraints: usize) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() {
        return Err(Error::InvalidParameter("observed and expected lengths differ".into()));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= MIN_EXPECTED {
            pooled.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => pooled.push((o_acc, e_acc)),
        }
    }
    if pooled.len() <= constraints {
        return Err(Error::InsufficientData(format!(
            "{} pooled bins leave no degrees of freedom",
            pooled.len()
        )));
    }
    let statistic = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum::<f64>();
    let dof = pooled.len() - constraints;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: dist.sf(statistic),
        bins: pooled.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance (0 for a single value).
    pub variance: f64,
    pub median: f64,
    pub iqr: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("summary of an empty sample".into()));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            count: n,
            mean,
            variance,
            median: quantile_sorted(&sorted, 0.5),
            iqr: quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25),
        })
    }

    pub fn std_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Rows with positive variance that entered the fit.
    pub points: usize,
}

/// Least-squares line through `(log10 N, log10 var)`.
pub fn fit_loglog_slope(ns: &[usize], variances: &[f64]) -> Result<LogLogFit> {
    if ns.len() != variances.len() {
        return Err(Error::InvalidParameter("N grid and variances differ in length".into()));
    }
    let mut pts = Vec::with_capacity(ns.len());
    for (&n, &v) in ns.iter().zip(variances) {
        if v > 0.0 && v.is_finite() && n > 0 {
            pts.push(((n as f64).log10(), v.log10()));
        } else {
            log::warn!("skipping N={n} with variance {v} in log-log fit");
        }
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "log-log fit needs 3 positive variances, got {}",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let syy = pts.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("log-log fit needs distinct N values".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r2,
        points: pts.len(),
    })
}
