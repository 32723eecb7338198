//! Deterministic reference values: Gauss–Jacobi rules, tensor quadrature,
//! inner products and closed-form variance predictions.

use crate::basis::{mass_1d, BasisSpec, JacobiParams, UnivariateJacobi};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_tridiagonal_eigenvalues, Lu, Matrix};

/// Default cap on the number of tensor-grid nodes.
pub const DEFAULT_NODE_CAP: u128 = 1_000_000;

/// One-dimensional rule whose weights already include the Jacobi density.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Diagonal and off-diagonal of the Jacobi matrix of the orthonormal
/// Jacobi polynomials with exponents `(a, b)`, truncated to size `m`.
pub fn jacobi_matrix(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let ab = a + b;
    let diag = (0..m)
        .map(|n| {
            if n == 0 {
                (b - a) / (ab + 2.0)
            } else {
                let s = 2.0 * n as f64 + ab;
                (b * b - a * a) / (s * (s + 2.0))
            }
        })
        .collect();
    let off = (1..m)
        .map(|n| {
            let beta = if n == 1 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                let nf = n as f64;
                let s = 2.0 * nf + ab;
                4.0 * nf * (nf + a) * (nf + b) * (nf + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            beta.sqrt()
        })
        .collect();
    (diag, off)
}

/// Orthonormal Jacobi values from the symmetric (Jacobi-matrix) recurrence.
/// Kept separate from the basis module's classical recurrence for cross-checks.
pub fn orthonormal_jacobi_by_jacobi_matrix(a: f64, b: f64, depth: usize, z: f64) -> Vec<f64> {
    let (alpha, beta) = jacobi_matrix(depth + 1, a, b);
    let mut out = Vec::with_capacity(depth);
    let mut prev = 0.0;
    let mut cur = 1.0 / mass_1d(a, b).sqrt();
    for n in 0..depth {
        out.push(cur);
        let back = if n == 0 { 0.0 } else { beta[n - 1] * prev };
        let next = ((z - alpha[n]) * cur - back) / beta[n];
        prev = cur;
        cur = next;
    }
    out
}

/// `M`-node Gauss–Jacobi rule for `(1-x)^a (1+x)^b dx`.
///
/// Nodes are the eigenvalues of the Jacobi matrix; weights are `1/K_M(x, x)`.
pub fn gauss_jacobi_rule(m: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if m == 0 {
        return Err(Error::InvalidParameter("rule needs at least one node".into()));
    }
    if !(a > -1.0 && b > -1.0) {
        return Err(Error::InvalidParameter(format!(
            "Jacobi exponents must be > -1, got a={a}, b={b}"
        )));
    }
    let (diag, off) = jacobi_matrix(m, a, b);
    let nodes = symmetric_tridiagonal_eigenvalues(&diag, &off);
    let family = UnivariateJacobi::new(a, b, m);
    let mut values = vec![0.0; m];
    let weights = nodes
        .iter()
        .map(|&x| {
            family.eval_into(x, &mut values);
            1.0 / values.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    Ok(QuadratureRule { nodes, weights })
}

/// Composite rule made of one Gauss–Jacobi rule on `[-1, 0]` and one on
/// `[0, 1]`, for integrands with a jump or kink at the origin.
pub fn gauss_jacobi_split_rule(m: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    // [-1, 0]: x = (t - 1)/2, (1 + x)^b = 2^{-b} (1 + t)^b
    let left = gauss_jacobi_rule(m, 0.0, b)?;
    // [0, 1]: x = (t + 1)/2, (1 - x)^a = 2^{-a} (1 - t)^a
    let right = gauss_jacobi_rule(m, a, 0.0)?;
    let mut nodes = Vec::with_capacity(2 * m);
    let mut weights = Vec::with_capacity(2 * m);
    let left_scale = 2f64.powf(-b - 1.0);
    for (&t, &w) in left.nodes.iter().zip(&left.weights) {
        let x = 0.5 * (t - 1.0);
        nodes.push(x);
        weights.push(w * left_scale * (1.0 - x).powf(a));
    }
    let right_scale = 2f64.powf(-a - 1.0);
    for (&t, &w) in right.nodes.iter().zip(&right.weights) {
        let x = 0.5 * (t + 1.0);
        nodes.push(x);
        weights.push(w * right_scale * (1.0 + x).powf(b));
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Product rule on `[-1, 1]^d`.
#[derive(Debug, Clone)]
pub struct TensorRule {
    d: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorRule {
    pub fn product(rules: &[QuadratureRule], cap: u128) -> Result<Self> {
        let d = rules.len();
        if d == 0 {
            return Err(Error::InvalidParameter("empty tensor product".into()));
        }
        let count: u128 = rules.iter().map(|r| r.len() as u128).product();
        if count > cap {
            return Err(Error::Budget { nodes: count, cap });
        }
        let count = count as usize;
        let mut nodes = Vec::with_capacity(count * d);
        let mut weights = Vec::with_capacity(count);
        let mut idx = vec![0usize; d];
        for _ in 0..count {
            let mut w = 1.0;
            for (i, rule) in rules.iter().enumerate() {
                nodes.push(rule.nodes[idx[i]]);
                w *= rule.weights[idx[i]];
            }
            weights.push(w);
            for i in (0..d).rev() {
                idx[i] += 1;
                if idx[i] < rules[i].len() {
                    break;
                }
                idx[i] = 0;
            }
        }
        Ok(Self { d, nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.d..(j + 1) * self.d]
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.nodes.chunks_exact(self.d).zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Gauss–Jacobi tensor rule with `m` nodes per dimension.
pub fn tensor_quadrature(params: &JacobiParams, m: usize) -> Result<TensorRule> {
    tensor_quadrature_with_cap(params, m, false, DEFAULT_NODE_CAP)
}

/// As [`tensor_quadrature`], optionally splitting every 1D rule at the origin.
pub fn tensor_quadrature_with_cap(
    params: &JacobiParams,
    m: usize,
    split: bool,
    cap: u128,
) -> Result<TensorRule> {
    let per_dim = if split { 2 * m } else { m } as u128;
    let count = per_dim.checked_pow(params.dim() as u32).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::Budget { nodes: count, cap });
    }
    let rules = params
        .a()
        .iter()
        .zip(params.b())
        .map(|(&a, &b)| {
            if split {
                gauss_jacobi_split_rule(m, a, b)
            } else {
                gauss_jacobi_rule(m, a, b)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    TensorRule::product(&rules, cap)
}

/// A quadrature value with the change observed when the rule is refined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined {
    pub value: f64,
    /// `|I(2M) - I(M)|`.
    pub refinement_delta: f64,
}

/// `⟨f, g⟩_μ` on the `2M` rule, with the change from the `M` rule.
pub fn inner_product(
    f: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    params: &JacobiParams,
    m: usize,
) -> Result<Refined> {
    let coarse = tensor_quadrature(params, m)?.integrate(&|x| f(x) * g(x));
    let fine = tensor_quadrature(params, 2 * m)?.integrate(&|x| f(x) * g(x));
    Ok(Refined {
        value: fine,
        refinement_delta: (fine - coarse).abs(),
    })
}

/// `(‖f‖², (⟨f, φ_ℓ⟩)_{ℓ < N})` on a given rule.
pub fn projection_coefficients(
    f: &dyn Fn(&[f64]) -> f64,
    spec: &BasisSpec,
    rule: &TensorRule,
) -> (f64, Vec<f64>) {
    let n = spec.size();
    let mut phi = vec![0.0; n];
    let mut scratch = vec![0.0; spec.scratch_len()];
    let mut coeffs = vec![0.0; n];
    let mut norm_sq = 0.0;
    for (x, w) in rule.iter() {
        let fx = f(x);
        norm_sq += w * fx * fx;
        spec.fill_features(x, &mut phi, &mut scratch);
        for (c, p) in coeffs.iter_mut().zip(&phi) {
            *c += w * fx * p;
        }
    }
    (norm_sq, coeffs)
}

/// `Var[y_k] = ‖f‖² - Σ_{ℓ<N} ⟨f, φ_ℓ⟩²` on the `m`-node tensor rule.
pub fn ez_variance_predict(
    f: &dyn Fn(&[f64]) -> f64,
    spec: &BasisSpec,
    m: usize,
) -> Result<f64> {
    let rule = tensor_quadrature(spec.params(), m)?;
    ez_variance_predict_on(f, spec, &rule)
}

pub fn ez_variance_predict_on(
    f: &dyn Fn(&[f64]) -> f64,
    spec: &BasisSpec,
    rule: &TensorRule,
) -> Result<f64> {
    let (norm_sq, coeffs) = projection_coefficients(f, spec, rule);
    let residual = norm_sq - coeffs.iter().map(|c| c * c).sum::<f64>();
    let tol = 1e-10 * norm_sq.max(1.0);
    if residual < -tol {
        return Err(Error::Inconsistent(format!(
            "negative projection residual {residual:e} (‖f‖² = {norm_sq:e})"
        )));
    }
    Ok(residual.max(0.0))
}

/// Double integral giving the variance of the BH estimator; `d = 1` only.
pub fn bh_variance_predict(
    f: &dyn Fn(&[f64]) -> f64,
    spec: &BasisSpec,
    m: usize,
) -> Result<f64> {
    let d = spec.dim();
    if d != 1 {
        return Err(Error::Budget {
            nodes: (m as u128).saturating_pow(2 * d as u32),
            cap: (m as u128).saturating_pow(2),
        });
    }
    let rule = tensor_quadrature(spec.params(), m)?;
    bh_variance_predict_on(f, spec, &rule)
}

pub fn bh_variance_predict_on(
    f: &dyn Fn(&[f64]) -> f64,
    spec: &BasisSpec,
    rule: &TensorRule,
) -> Result<f64> {
    let n = spec.size();
    let mut scratch = vec![0.0; spec.scratch_len()];
    let mut features = Vec::with_capacity(rule.len() * n);
    let mut ratio = Vec::with_capacity(rule.len());
    let mut phi = vec![0.0; n];
    for (x, _) in rule.iter() {
        spec.fill_features(x, &mut phi, &mut scratch);
        let k = phi.iter().map(|v| v * v).sum::<f64>();
        ratio.push(f(x) / k);
        features.extend_from_slice(&phi);
    }
    let m = rule.len();
    let mut total = 0.0;
    for i in 0..m {
        let pi = &features[i * n..(i + 1) * n];
        for j in i + 1..m {
            let pj = &features[j * n..(j + 1) * n];
            let kij: f64 = pi.iter().zip(pj).map(|(u, v)| u * v).sum();
            let diff = ratio[i] - ratio[j];
            total += rule.weight(i) * rule.weight(j) * diff * diff * kij * kij;
        }
    }
    // half of the symmetric double sum; the diagonal terms vanish
    Ok(total)
}

/// Both sides of the generalized Cauchy–Binet identity in one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyBinet {
    /// `det(⟨φ_i, ψ_j⟩)`.
    pub gram_determinant: f64,
    /// `(1/N!) ∫ det(φ_i(x_j)) det(ψ_i(x_j)) μ^{⊗N}(dx)`.
    pub symmetrized_integral: f64,
    pub residual: f64,
}

type Func1 = dyn Fn(f64) -> f64;

/// Evaluates both sides of the identity for `N = phis.len() <= 3` functions
/// against the weight `(1-x)^a (1+x)^b`, with an `m`-node rule per copy.
pub fn cauchy_binet_check(
    a: f64,
    b: f64,
    phis: &[&Func1],
    psis: &[&Func1],
    m: usize,
) -> Result<CauchyBinet> {
    let n = phis.len();
    if n == 0 || n > 3 || psis.len() != n {
        return Err(Error::InvalidParameter(
            "need 1 to 3 function pairs of equal count".into(),
        ));
    }
    let count = (m as u128).pow(n as u32);
    if count > DEFAULT_NODE_CAP {
        return Err(Error::Budget {
            nodes: count,
            cap: DEFAULT_NODE_CAP,
        });
    }
    let rule = gauss_jacobi_rule(m, a, b)?;
    let mut gram = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            gram.row_mut(i)[j] = rule.integrate(|x| phis[i](x) * psis[j](x));
        }
    }
    let gram_determinant = Lu::factor(&gram).determinant();

    let params = JacobiParams::uniform(n, a, b)?;
    let tensor = tensor_quadrature_with_cap(&params, m, false, DEFAULT_NODE_CAP)?;
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    let mut integral = 0.0;
    let mut lhs = Matrix::zeros(n);
    let mut rhs = Matrix::zeros(n);
    for (x, w) in tensor.iter() {
        for i in 0..n {
            for j in 0..n {
                lhs.row_mut(i)[j] = phis[i](x[j]);
                rhs.row_mut(i)[j] = psis[i](x[j]);
            }
        }
        integral += w * Lu::factor(&lhs).determinant() * Lu::factor(&rhs).determinant();
    }
    let symmetrized_integral = integral / factorial;
    Ok(CauchyBinet {
        gram_determinant,
        symmetrized_integral,
        residual: (gram_determinant - symmetrized_integral).abs(),
    })
}

/// `(1/N!) ∫ det(K_N(x_p, x_q)) μ^{⊗N}(dx)` for a one-dimensional spec with
/// `N <= 3`; equals 1 for a valid projection kernel.
pub fn joint_density_normalization(spec: &BasisSpec, m: usize) -> Result<f64> {
    if spec.dim() != 1 {
        return Err(Error::InvalidParameter("normalization check is one-dimensional".into()));
    }
    let n = spec.size();
    let fam = spec.family(0).clone();
    let funcs: Vec<Box<Func1>> = (0..n)
        .map(|k| {
            let fam = fam.clone();
            Box::new(move |x: f64| fam.eval_degree(k, x)) as Box<Func1>
        })
        .collect();
    let refs: Vec<&Func1> = funcs.iter().map(|f| f.as_ref()).collect();
    let (a, b) = fam.params();
    Ok(cauchy_binet_check(a, b, &refs, &refs, m)?.symmetrized_integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_node_rule() {
        let r = gauss_jacobi_rule(1, 0.0, 0.0).unwrap();
        assert!(r.nodes[0].abs() < 1e-15);
        assert_relative_eq!(r.weights[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn exactness_boundary_legendre() {
        let r = gauss_jacobi_rule(3, 0.0, 0.0).unwrap();
        assert!((r.integrate(|x| x.powi(4)) - 0.4).abs() < 1e-12);
        assert!((r.integrate(|x| x.powi(6)) - 2.0 / 7.0).abs() > 1e-3);
    }

    #[test]
    fn exactness_up_to_2m_minus_1_and_failure_at_2m() {
        // Chebyshev weight: ∫ x^{2j} / sqrt(1 - x^2) dx = π (2j-1)!! / (2j)!!
        let moment = |k: i32| -> f64 {
            if k % 2 == 1 {
                return 0.0;
            }
            (1..=k / 2).fold(std::f64::consts::PI, |acc, j| {
                acc * (2 * j - 1) as f64 / (2 * j) as f64
            })
        };
        for m in 1..12 {
            let r = gauss_jacobi_rule(m, -0.5, -0.5).unwrap();
            for k in 0..(2 * m as i32) {
                assert!((r.integrate(|x| x.powi(k)) - moment(k)).abs() < 1e-12, "m={m} k={k}");
            }
            let k = 2 * m as i32;
            assert!((r.integrate(|x| x.powi(k)) - moment(k)).abs() > 1e-6);
        }
    }

    #[test]
    fn nodes_sorted_interior_positive_weights() {
        for &(a, b) in &[(0.0, 0.0), (-0.5, 0.5), (0.9, -0.7), (-0.5, -0.5)] {
            let r = gauss_jacobi_rule(60, a, b).unwrap();
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.nodes.iter().all(|&x| x > -1.0 && x < 1.0));
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert_relative_eq!(r.total_weight(), mass_1d(a, b), max_relative = 1e-12);
        }
    }

    #[test]
    fn weights_match_independent_recurrence() {
        let (a, b) = (0.3, -0.45);
        let r = gauss_jacobi_rule(25, a, b).unwrap();
        for (&x, &w) in r.nodes.iter().zip(&r.weights) {
            let vals = orthonormal_jacobi_by_jacobi_matrix(a, b, 25, x);
            let k: f64 = vals.iter().map(|v| v * v).sum();
            assert_relative_eq!(w, 1.0 / k, max_relative = 1e-10);
        }
    }

    #[test]
    fn split_rule_integrates_kinks() {
        let r = gauss_jacobi_split_rule(20, 0.0, 0.0).unwrap();
        assert_relative_eq!(r.integrate(f64::abs), 1.0, epsilon = 1e-13);
        assert_relative_eq!(r.total_weight(), 2.0, epsilon = 1e-13);
        let r = gauss_jacobi_split_rule(40, 0.3, -0.4).unwrap();
        assert_relative_eq!(r.total_weight(), mass_1d(0.3, -0.4), max_relative = 1e-12);
    }

    #[test]
    fn tensor_mass_and_budget() {
        let p = JacobiParams::new(vec![0.0, -0.5], vec![0.0, -0.5]).unwrap();
        let t = tensor_quadrature(&p, 10).unwrap();
        assert_relative_eq!(t.integrate(&|_| 1.0), 2.0 * std::f64::consts::PI, epsilon = 1e-12);
        let p3 = JacobiParams::uniform(3, 0.0, 0.0).unwrap();
        assert!(matches!(
            tensor_quadrature(&p3, 101),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn inner_product_basics() {
        let p = JacobiParams::uniform(1, 0.0, 0.0).unwrap();
        let spec = BasisSpec::new(p.clone(), 2).unwrap();
        let phi0 = |x: &[f64]| spec.basis_function(0, x);
        let one = |_: &[f64]| 1.0;
        assert_relative_eq!(inner_product(&phi0, &phi0, &p, 4).unwrap().value, 1.0, epsilon = 1e-14);
        assert_relative_eq!(inner_product(&one, &one, &p, 4).unwrap().value, 2.0, epsilon = 1e-14);
        let cos = |x: &[f64]| (std::f64::consts::PI * x[0]).cos();
        let phi1 = |x: &[f64]| spec.basis_function(1, x);
        assert!(inner_product(&cos, &phi1, &p, 30).unwrap().refinement_delta < 1e-8);
    }

    #[test]
    fn ez_variance_of_basis_function_is_zero() {
        let spec = BasisSpec::new(JacobiParams::uniform(2, 0.2, -0.3).unwrap(), 7).unwrap();
        let phi0 = |x: &[f64]| spec.basis_function(0, x);
        assert!(ez_variance_predict(&phi0, &spec, 10).unwrap() < 1e-14);
    }

    #[test]
    fn bh_variance_rejects_multivariate() {
        let spec = BasisSpec::new(JacobiParams::uniform(2, 0.0, 0.0).unwrap(), 3).unwrap();
        assert!(matches!(
            bh_variance_predict(&|_| 1.0, &spec, 10),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn bh_variance_vanishes_for_kernel_diagonal() {
        let spec = BasisSpec::new(JacobiParams::uniform(1, 0.1, 0.4).unwrap(), 4).unwrap();
        let f = |x: &[f64]| 3.0 * spec.kernel_diagonal(x).unwrap();
        assert!(bh_variance_predict(&f, &spec, 30).unwrap() < 1e-20);
    }

    #[test]
    fn bh_variance_single_point() {
        // N = 1: one point with density ω/μ(X); estimator f(x)/K_1 = μ(X) f(x)
        let (a, b) = (0.0, 0.0);
        let spec = BasisSpec::new(JacobiParams::uniform(1, a, b).unwrap(), 1).unwrap();
        let f = |x: &[f64]| (2.0 * x[0]).sin() + x[0] * x[0];
        let predicted = bh_variance_predict(&f, &spec, 40).unwrap();
        let rule = gauss_jacobi_rule(40, a, b).unwrap();
        let mass = 2.0;
        let m1 = rule.integrate(|x| mass * f(&[x])) / mass;
        let m2 = rule.integrate(|x| (mass * f(&[x])).powi(2)) / mass;
        assert_relative_eq!(predicted, m2 - m1 * m1, max_relative = 1e-12);
    }
}
