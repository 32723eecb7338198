//! Test functions with reference integrals against `μ`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::basis::{BasisSpec, JacobiParams};
use crate::error::{Error, Result};
use crate::estimators::{Integrand, Provenance, Reference};
use crate::oracle::{gauss_jacobi_rule, gauss_jacobi_split_rule};

pub const DEFAULT_EPSILON: f64 = 0.05;
/// Nodes per dimension for 1D reference integrals; checked against twice as many.
pub const REFERENCE_NODES: usize = 400;

type Factor = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `∫ g(x) (1-x)^a (1+x)^b dx` on the `m`- and `2m`-node rules.
pub fn integrate_1d(g: &dyn Fn(f64) -> f64, a: f64, b: f64, m: usize, split: bool) -> Result<(f64, f64)> {
    let rule = |m| if split { gauss_jacobi_split_rule(m, a, b) } else { gauss_jacobi_rule(m, a, b) };
    let coarse = rule(m)?.integrate(g);
    let fine = rule(2 * m)?.integrate(g);
    Ok((fine, (fine - coarse).abs()))
}

/// `∏_i g(x^i)` with reference `∏_i ∫ g ω^i`.
fn separable(label: &str, g: Factor, params: &JacobiParams, split: bool) -> Result<Integrand> {
    let mut value = 1.0;
    let mut worst = 0.0f64;
    for (&a, &b) in params.a().iter().zip(params.b()) {
        let (v, delta) = integrate_1d(g.as_ref(), a, b, REFERENCE_NODES, split)?;
        worst = worst.max(delta / v.abs().max(1.0));
        value *= v;
    }
    let eval = move |x: &[f64]| x.iter().map(|&xi| g(xi)).product();
    Ok(Integrand::new(label, eval).with_reference(Reference {
        value,
        provenance: Provenance::Quadrature {
            nodes_per_dim: 2 * REFERENCE_NODES,
            refinement_delta: worst,
        },
    }))
}

pub fn bump_factor(epsilon: f64, x: f64) -> f64 {
    let gap = 1.0 - epsilon - x * x;
    if gap > 0.0 {
        (-1.0 / gap).exp()
    } else {
        0.0
    }
}

/// `∏_i exp(-1 / (1 - ε - (x^i)²))` on `|x^i| < √(1-ε)`, zero elsewhere.
pub fn bump(epsilon: f64, params: &JacobiParams) -> Result<Integrand> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("bump epsilon must lie in (0, 1), got {epsilon}")));
    }
    separable("bump", Arc::new(move |x| bump_factor(epsilon, x)), params, false)
}

/// `Σ_{r < M} c_r φ_r` in the ordering of `params`; reference `√μ(X) c_0`.
pub fn eigen_combination(params: &JacobiParams, coefficients: Vec<f64>, label: &str) -> Result<Integrand> {
    if coefficients.is_empty() {
        return Err(Error::InvalidParameter("at least one coefficient is required".into()));
    }
    let spec = BasisSpec::new(params.clone(), coefficients.len())?;
    let value = spec.mass().sqrt() * coefficients[0];
    let eval = move |x: &[f64]| {
        let mut phi = vec![0.0; spec.size()];
        let mut scratch = vec![0.0; spec.scratch_len()];
        spec.fill_features(x, &mut phi, &mut scratch);
        phi.iter().zip(&coefficients).map(|(p, c)| p * c).sum()
    };
    Ok(Integrand::new(label, eval).with_reference(Reference {
        value,
        provenance: Provenance::Analytic,
    }))
}

/// `Σ_{r < M} φ_r / (r + 1)`.
pub fn eig_sum(params: &JacobiParams, m: usize) -> Result<Integrand> {
    let coefficients = (0..m).map(|r| 1.0 / (r + 1) as f64).collect();
    eigen_combination(params, coefficients, "eigsum")
}

/// `∏_i |x^i|`.
pub fn abs_prod(params: &JacobiParams) -> Result<Integrand> {
    separable("abs", Arc::new(f64::abs), params, true)
}

/// `∏_i 2 (H(x^i) - 1/2)`: `+1` for positive coordinates, `-1` otherwise.
pub fn heaviside_centered(params: &JacobiParams) -> Result<Integrand> {
    separable("heaviside", Arc::new(|x| if x > 0.0 { 1.0 } else { -1.0 }), params, true)
}

/// `∏_i cos(π x^i)`.
pub fn cosine_prod(params: &JacobiParams) -> Result<Integrand> {
    separable("cosine", Arc::new(|x| (PI * x).cos()), params, false)
}

pub fn mix_factor(x: f64) -> f64 {
    if x > 0.0 {
        (PI * x).cos() + (2.0 * PI * x).cos() + (5.0 * PI * x).sin()
    } else {
        0.0
    }
}

/// `∏_i H(x^i) (cos(π x^i) + cos(2π x^i) + sin(5π x^i))`.
pub fn mix(params: &JacobiParams) -> Result<Integrand> {
    separable("mix", Arc::new(mix_factor), params, true)
}

/// Number of eigenfunctions summed by `eigsum`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigTerms {
    Fixed(usize),
    /// `M = N + 1`, following the sample size.
    NextAfterSize,
}

/// An integrand family addressable by label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegrandKind {
    Bump { epsilon: f64 },
    EigSum(EigTerms),
    Abs,
    Heaviside,
    Cosine,
    Mix,
}

impl IntegrandKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Bump { .. } => "bump",
            Self::EigSum(_) => "eigsum",
            Self::Abs => "abs",
            Self::Heaviside => "heaviside",
            Self::Cosine => "cosine",
            Self::Mix => "mix",
        }
    }

    /// Builds the integrand used with samples of size `n`.
    pub fn build(&self, params: &JacobiParams, n: usize) -> Result<Integrand> {
        match *self {
            Self::Bump { epsilon } => bump(epsilon, params),
            Self::EigSum(EigTerms::Fixed(m)) => {
                if m == 0 {
                    return Err(Error::InvalidParameter("eigsum needs M >= 1".into()));
                }
                eig_sum(params, m)
            }
            Self::EigSum(EigTerms::NextAfterSize) => eig_sum(params, n + 1),
            Self::Abs => abs_prod(params),
            Self::Heaviside => heaviside_centered(params),
            Self::Cosine => cosine_prod(params),
            Self::Mix => mix(params),
        }
    }

    /// Whether the integrand changes with the sample size.
    pub fn depends_on_size(&self) -> bool {
        matches!(self, Self::EigSum(EigTerms::NextAfterSize))
    }
}

impl fmt::Display for IntegrandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bump { epsilon } => write!(f, "bump(epsilon={epsilon})"),
            Self::EigSum(EigTerms::Fixed(m)) => write!(f, "eigsum(M={m})"),
            Self::EigSum(EigTerms::NextAfterSize) => write!(f, "eigsum(M=N+1)"),
            other => f.write_str(other.label()),
        }
    }
}

impl FromStr for EigTerms {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("n+1") {
            return Ok(Self::NextAfterSize);
        }
        t.parse()
            .map(Self::Fixed)
            .map_err(|_| Error::InvalidParameter(format!("eigsum M must be an integer or N+1, got {s:?}")))
    }
}

impl FromStr for IntegrandKind {
    type Err = Error;

    /// Label with defaults: `bump` uses the default ε, `eigsum` uses `M = N + 1`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bump" => Ok(Self::Bump { epsilon: DEFAULT_EPSILON }),
            "eigsum" => Ok(Self::EigSum(EigTerms::NextAfterSize)),
            "abs" => Ok(Self::Abs),
            "heaviside" => Ok(Self::Heaviside),
            "cosine" => Ok(Self::Cosine),
            "mix" => Ok(Self::Mix),
            other => Err(Error::InvalidParameter(format!(
                "unknown integrand {other:?}; expected one of bump, eigsum, abs, heaviside, cosine, mix"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::total_mass;
    use crate::oracle::tensor_quadrature;
    use approx::assert_relative_eq;

    fn flat(d: usize) -> JacobiParams {
        JacobiParams::uniform(d, 0.0, 0.0).unwrap()
    }

    #[test]
    fn bump_values() {
        let f = bump(0.05, &flat(1)).unwrap();
        assert_relative_eq!(f.eval(&[0.0]), (-1.0f64 / 0.95).exp(), epsilon = 1e-15);
        assert_relative_eq!(f.eval(&[0.0]), 0.3490, epsilon = 1e-4);
        assert_eq!(f.eval(&[0.95f64.sqrt()]), 0.0);
        let g = bump(0.05, &flat(2)).unwrap();
        assert_eq!(g.eval(&[0.1, -0.99]), 0.0);
        assert!(bump(0.0, &flat(1)).is_err());
    }

    #[test]
    fn bump_reference_is_self_converged() {
        let f = bump(0.05, &flat(1)).unwrap();
        match f.reference().unwrap().provenance {
            Provenance::Quadrature { refinement_delta, .. } => assert!(refinement_delta < 1e-10),
            Provenance::Analytic => panic!("expected quadrature provenance"),
        }
    }

    #[test]
    fn abs_values_and_truth() {
        let f = abs_prod(&flat(2)).unwrap();
        assert_eq!(f.eval(&[0.0, 0.3]), 0.0);
        assert_relative_eq!(f.eval(&[0.5, -0.5]), 0.25);
        assert_relative_eq!(abs_prod(&flat(1)).unwrap().truth().unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn heaviside_values_and_truth() {
        let p = flat(1);
        let f = heaviside_centered(&p).unwrap();
        assert_eq!(f.eval(&[0.3]), 1.0);
        assert_eq!(f.eval(&[-0.3]), -1.0);
        assert!(f.truth().unwrap().abs() < 1e-13);
        let q = JacobiParams::new(vec![0.0], vec![-0.5]).unwrap();
        // ∫_0^1 (1+x)^{-1/2} - ∫_{-1}^0 (1+x)^{-1/2} = 2(√2 - 1) - 2
        let expected = 2.0 * (2.0f64.sqrt() - 1.0) - 2.0;
        assert_relative_eq!(heaviside_centered(&q).unwrap().truth().unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn cosine_values_and_truth() {
        let f = cosine_prod(&flat(1)).unwrap();
        assert_eq!(f.eval(&[0.0]), 1.0);
        assert!(f.eval(&[0.5]).abs() < 1e-15);
        assert!(f.truth().unwrap().abs() < 1e-13);
    }

    #[test]
    fn mix_values() {
        assert_eq!(mix_factor(-0.5), 0.0);
        assert!(mix_factor(0.5).abs() < 1e-14);
        // ∫_0^1 cos(πx) + cos(2πx) + sin(5πx) dx = 2/(5π)
        assert_relative_eq!(mix(&flat(1)).unwrap().truth().unwrap(), 2.0 / (5.0 * PI), epsilon = 1e-13);
    }

    #[test]
    fn eig_sum_reference_and_single_term() {
        let p = JacobiParams::new(vec![-0.5, 0.2], vec![0.3, -0.1]).unwrap();
        let f = eig_sum(&p, 1).unwrap();
        let sqrt_mass = total_mass(&p).sqrt();
        assert_relative_eq!(f.eval(&[0.3, -0.7]), 1.0 / sqrt_mass, max_relative = 1e-13);
        assert_relative_eq!(f.truth().unwrap(), sqrt_mass, max_relative = 1e-15);
        let g = eig_sum(&p, 70).unwrap();
        let q = tensor_quadrature(&p, 30).unwrap().integrate(&|x| g.eval(x));
        assert_relative_eq!(q, g.truth().unwrap(), max_relative = 1e-10);
    }

    #[test]
    fn separable_truth_is_product_of_1d_truths() {
        let p = JacobiParams::new(vec![-0.5, 0.1, 0.4], vec![-0.5, -0.3, 0.2]).unwrap();
        let full = cosine_prod(&p).unwrap().truth().unwrap();
        let product: f64 = (0..3)
            .map(|i| {
                let q = JacobiParams::new(vec![p.a()[i]], vec![p.b()[i]]).unwrap();
                cosine_prod(&q).unwrap().truth().unwrap()
            })
            .product();
        assert_relative_eq!(full, product, max_relative = 1e-10);
        let f = cosine_prod(&p).unwrap();
        let direct = tensor_quadrature(&p, 40).unwrap().integrate(&|x| f.eval(x));
        assert_relative_eq!(full, direct, max_relative = 1e-10);
    }

    #[test]
    fn labels_roundtrip() {
        for label in ["bump", "eigsum", "abs", "heaviside", "cosine", "mix"] {
            assert_eq!(label.parse::<IntegrandKind>().unwrap().label(), label);
        }
        assert!("sinc".parse::<IntegrandKind>().is_err());
        assert_eq!("N+1".parse::<EigTerms>().unwrap(), EigTerms::NextAfterSize);
        assert_eq!("70".parse::<EigTerms>().unwrap(), EigTerms::Fixed(70));
    }
}
