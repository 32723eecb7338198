//! Unbiased estimators of `∫ f dμ` from a projection DPP sample, plus the
//! i.i.d. baseline.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::basis::{BasisSpec, JacobiParams};
use crate::error::{Error, Result};
use crate::linalg::{factor_checked, Lu, Matrix};
use crate::sampler::DppSample;

/// Where a reference integral comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Analytic,
    Quadrature {
        nodes_per_dim: usize,
        refinement_delta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub value: f64,
    pub provenance: Provenance,
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A test function on `(-1, 1)^d` with an optional known integral.
#[derive(Clone)]
pub struct Integrand {
    evaluator: Evaluator,
    label: String,
    reference: Option<Reference>,
}

impl Integrand {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            evaluator: Arc::new(f),
            label: label.into(),
            reference: None,
        }
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn reference(&self) -> Option<Reference> {
        self.reference
    }

    pub fn truth(&self) -> Option<f64> {
        self.reference.map(|r| r.value)
    }

    pub fn as_fn(&self) -> &(dyn Fn(&[f64]) -> f64 + Send + Sync) {
        self.evaluator.as_ref()
    }
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("label", &self.label)
            .field("reference", &self.reference)
            .finish_non_exhaustive()
    }
}

fn check_sample(spec: &BasisSpec, sample: &DppSample) -> Result<()> {
    if sample.dim() != spec.dim() {
        return Err(Error::InvalidParameter(format!(
            "sample dimension {} does not match basis dimension {}",
            sample.dim(),
            spec.dim()
        )));
    }
    if sample.len() != spec.size() {
        return Err(Error::InvalidParameter(format!(
            "sample has {} points, basis has {} functions",
            sample.len(),
            spec.size()
        )));
    }
    Ok(())
}

/// `Σ_n f(x_n) / K_N(x_n, x_n)`.
pub fn bh_estimate(spec: &BasisSpec, sample: &DppSample, f: &Integrand) -> Result<f64> {
    Ok(bh_weights(spec, sample)?
        .iter()
        .zip(sample.points())
        .map(|(w, x)| w * f.eval(x))
        .sum())
}

/// The BH weights `1 / K_N(x_n, x_n)`.
pub fn bh_weights(spec: &BasisSpec, sample: &DppSample) -> Result<Vec<f64>> {
    check_sample(spec, sample)?;
    sample
        .points()
        .map(|x| {
            let k = spec.kernel_diagonal(x)?;
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::CorruptSample(format!(
                    "kernel diagonal {k} at point {x:?}"
                )));
            }
            Ok(1.0 / k)
        })
        .collect()
}

/// Solution `y` of `Φ(x_{1:N}) y = f(x_{1:N})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientEstimates {
    pub y: Vec<f64>,
    /// Reciprocal 1-norm condition estimate of the feature matrix.
    pub condition_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights(pub Vec<f64>);

impl QuadratureWeights {
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn apply(&self, sample: &DppSample, f: &Integrand) -> f64 {
        self.0.iter().zip(sample.points()).map(|(w, x)| w * f.eval(x)).sum()
    }
}

/// Factorized feature matrix of one sample, shared by every EZ quantity.
#[derive(Debug, Clone)]
pub struct EzSystem {
    lu: Lu,
    rcond: f64,
    sqrt_mass: f64,
}

impl EzSystem {
    pub fn new(spec: &BasisSpec, sample: &DppSample) -> Result<Self> {
        check_sample(spec, sample)?;
        let n = spec.size();
        let mut matrix = Matrix::zeros(n);
        let mut scratch = vec![0.0; spec.scratch_len()];
        for (i, x) in sample.points().enumerate() {
            for (dim, &xi) in x.iter().enumerate() {
                if !(-1.0..=1.0).contains(&xi) {
                    return Err(Error::Domain { dim, value: xi });
                }
            }
            spec.fill_features(x, matrix.row_mut(i), &mut scratch);
        }
        let (lu, rcond) = factor_checked(&matrix)?;
        Ok(Self {
            lu,
            rcond,
            sqrt_mass: spec.mass().sqrt(),
        })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.rcond
    }

    pub fn coefficients(&self, values: &[f64]) -> CoefficientEstimates {
        CoefficientEstimates {
            y: self.lu.solve(values),
            condition_estimate: self.rcond,
        }
    }

    pub fn estimate(&self, values: &[f64]) -> f64 {
        self.sqrt_mass * self.lu.solve(values)[0]
    }

    /// `Φ^{-T} (√μ(X) e_1)`.
    pub fn weights(&self) -> QuadratureWeights {
        let mut rhs = vec![0.0; self.lu.size()];
        rhs[0] = self.sqrt_mass;
        QuadratureWeights(self.lu.solve_transpose(&rhs))
    }
}

fn values_at(sample: &DppSample, f: &Integrand) -> Vec<f64> {
    sample.points().map(|x| f.eval(x)).collect()
}

pub fn ez_coefficients(spec: &BasisSpec, sample: &DppSample, f: &Integrand) -> Result<CoefficientEstimates> {
    Ok(EzSystem::new(spec, sample)?.coefficients(&values_at(sample, f)))
}

/// `√μ(X) · y_1`.
pub fn ez_estimate(spec: &BasisSpec, sample: &DppSample, f: &Integrand) -> Result<f64> {
    check_zero_first(spec)?;
    Ok(EzSystem::new(spec, sample)?.estimate(&values_at(sample, f)))
}

pub fn ez_quadrature_weights(spec: &BasisSpec, sample: &DppSample) -> Result<QuadratureWeights> {
    check_zero_first(spec)?;
    Ok(EzSystem::new(spec, sample)?.weights())
}

fn check_zero_first(spec: &BasisSpec) -> Result<()> {
    if spec.index(0).iter().any(|&k| k != 0) {
        return Err(Error::InvalidParameter("first basis function must be constant".into()));
    }
    Ok(())
}

/// One point i.i.d. from `μ / μ(X)`.
pub fn sample_from_mu<R: Rng + ?Sized>(params: &JacobiParams, rng: &mut R) -> Result<Vec<f64>> {
    params
        .a()
        .iter()
        .zip(params.b())
        .map(|(&a, &b)| {
            let beta = Beta::new(a + 1.0, b + 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(1.0 - 2.0 * beta.sample(rng))
        })
        .collect()
}

/// `μ(X) · (1/N) Σ f(x_i)` with `x_i` i.i.d. from `μ / μ(X)`.
pub fn vanilla_mc_estimate<R: Rng + ?Sized>(
    params: &JacobiParams,
    n: usize,
    f: &Integrand,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    let mut total = 0.0;
    for _ in 0..n {
        total += f.eval(&sample_from_mu(params, rng)?);
    }
    Ok(crate::basis::total_mass(params) * total / n as f64)
}
