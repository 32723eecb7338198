//! Exact samplers for the multivariate Jacobi ensemble.
//!
//! The general sampler applies the chain rule to the ordered points: the
//! `n`-th point has density proportional to the squared distance from
//! `Φ(x)` to the span of the previously accepted feature vectors. Each
//! conditional is sampled by rejection from the marginal
//! `K_N(x, x) ω(x) / N` (constant `N / (N - n + 1)`), and the marginal is an
//! equal-weight mixture of `φ_k² ω`, each sampled by rejection from the
//! arcsine density with a product of per-coordinate envelope constants.
//!
//! In one dimension the ensemble is also available as the spectrum of a
//! random tridiagonal matrix, which needs no rejection at all.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Distribution, Open01};
use statrs::function::gamma::ln_gamma;

use crate::basis::{mass_1d, BasisSpec, MultiIndex};
use crate::error::{Error, Result};
use crate::linalg::symmetric_tridiagonal_eigenvalues;
use crate::rng::RngStream;

/// Residual-to-feature norm ratio under which Gram–Schmidt takes a second pass.
pub const REORTHOGONALIZE_BELOW: f64 = 1e-6;
/// Relative residual norm treated as a point already in the accepted span.
pub const DEGENERATE_RESIDUAL: f64 = 1e-12;
const BOUND_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    ChainRule,
    Tridiagonal,
}

impl SamplingMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ChainRule => "chain-rule",
            Self::Tridiagonal => "tridiagonal",
        }
    }
}

/// `N` points of one ensemble draw, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DppSample {
    d: usize,
    points: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub rejections_marginal: u64,
    pub rejections_conditional: u64,
    pub method: SamplingMethod,
}

impl DppSample {
    /// Wraps externally produced points; rejection counters are zero.
    pub fn from_points(d: usize, points: Vec<f64>, seed: u64, stream: u64, method: SamplingMethod) -> Self {
        assert!(d > 0 && points.len() % d == 0, "points must fill whole rows of length d");
        Self {
            d,
            points,
            seed,
            stream,
            rejections_marginal: 0,
            rejections_conditional: 0,
            method,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.points
    }

    pub fn total_rejections(&self) -> u64 {
        self.rejections_marginal + self.rejections_conditional
    }
}

/// `x^i = cos(π U^i)` with `U^i` uniform on `(0, 1)`.
pub fn sample_arcsine<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| arcsine_from_uniform(rng.sample(Open01))).collect()
}

pub fn arcsine_from_uniform(u: f64) -> f64 {
    (PI * u).cos()
}

/// Envelope constant `C_k >= sup_x π (1-x)^{a+1/2} (1+x)^{b+1/2} φ_k(x)²`.
///
/// For `k = 0` this is the exact supremum, attained at the mode of
/// `(1-x)^{a+1/2} (1+x)^{b+1/2}`; for `k >= 1` it is the Chow–Gatteschi–Wong
/// bound.
pub fn component_bound(k: usize, a: f64, b: f64) -> Result<f64> {
    if a.abs() > 0.5 || b.abs() > 0.5 {
        return Err(Error::InvalidParameter(format!(
            "envelope requires |a|, |b| <= 1/2, got a={a}, b={b}"
        )));
    }
    if k == 0 {
        let mode = if a == -0.5 && b == -0.5 {
            0.0
        } else {
            (b - a) / (a + b + 1.0)
        };
        let shape = (1.0 - mode).powf(a + 0.5) * (1.0 + mode).powf(b + 0.5);
        return Ok(PI * shape / mass_1d(a, b));
    }
    let kf = k as f64;
    let (hi, lo) = (a.max(b), a.min(b));
    let ln_bound = std::f64::consts::LN_2 + ln_gamma(kf + a + b + 1.0) + ln_gamma(kf + hi + 1.0)
        - ln_gamma(kf + 1.0)
        - 2.0 * hi * (kf + 0.5 * (a + b + 1.0)).ln()
        - ln_gamma(kf + lo + 1.0);
    Ok(ln_bound.exp())
}

/// Orthonormalized residual directions of the accepted feature vectors.
#[derive(Debug, Clone)]
pub struct GramSchmidtState {
    n_basis: usize,
    d: usize,
    directions: Vec<f64>,
    points: Vec<f64>,
}

impl GramSchmidtState {
    pub fn new(n_basis: usize, d: usize) -> Self {
        Self {
            n_basis,
            d,
            directions: Vec::with_capacity(n_basis * n_basis),
            points: Vec::with_capacity(n_basis * d),
        }
    }

    /// Number of accepted points.
    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn direction(&self, j: usize) -> &[f64] {
        &self.directions[j * self.n_basis..(j + 1) * self.n_basis]
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.d..(j + 1) * self.d]
    }

    /// Coefficients of `phi` on the current directions.
    fn project(&self, phi: &[f64], coeffs: &mut Vec<f64>) {
        coeffs.clear();
        coeffs.extend(
            self.directions
                .chunks_exact(self.n_basis)
                .map(|e| e.iter().zip(phi).map(|(u, v)| u * v).sum::<f64>()),
        );
    }

    fn subtract(&self, residual: &mut [f64], coeffs: &[f64]) {
        for (e, &c) in self.directions.chunks_exact(self.n_basis).zip(coeffs) {
            for (r, u) in residual.iter_mut().zip(e) {
                *r -= c * u;
            }
        }
    }

    /// Acceptance probability from a precomputed feature vector.
    fn acceptance_from_features(&self, phi: &[f64], coeffs: &mut Vec<f64>) -> f64 {
        let k = phi.iter().map(|v| v * v).sum::<f64>();
        if !(k > 0.0) {
            return 0.0;
        }
        if self.is_empty() {
            return 1.0;
        }
        if self.len() >= self.n_basis {
            return 0.0;
        }
        self.project(phi, coeffs);
        let proj = coeffs.iter().map(|c| c * c).sum::<f64>();
        ((k - proj) / k).clamp(0.0, 1.0)
    }

    /// Appends the normalized residual of `phi`; `coeffs` must hold its
    /// projection coefficients when the state is non-empty.
    fn push(&mut self, x: &[f64], phi: &[f64], coeffs: &[f64]) -> Result<()> {
        let phi_norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if self.len() >= self.n_basis {
            return Err(Error::DegeneratePoint { residual: 0.0 });
        }
        let mut residual = phi.to_vec();
        if !self.is_empty() {
            self.subtract(&mut residual, coeffs);
            let norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < REORTHOGONALIZE_BELOW * phi_norm {
                let mut again = Vec::with_capacity(self.len());
                self.project(&residual, &mut again);
                self.subtract(&mut residual, &again);
            }
        }
        let norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm >= DEGENERATE_RESIDUAL * phi_norm.max(1.0)) {
            return Err(Error::DegeneratePoint { residual: norm });
        }
        residual.iter_mut().for_each(|v| *v /= norm);
        self.directions.extend_from_slice(&residual);
        self.points.extend_from_slice(x);
        Ok(())
    }
}

/// `(K_N(x,x) - ‖P Φ(x)‖²) / K_N(x,x)` where `P` projects onto the span of
/// the accepted directions.
pub fn conditional_acceptance(state: &GramSchmidtState, spec: &BasisSpec, x: &[f64]) -> Result<f64> {
    let phi = spec.feature_vector(x)?;
    let mut coeffs = Vec::new();
    Ok(state.acceptance_from_features(phi.values(), &mut coeffs))
}

/// Adds `x` to the state, failing when its feature vector already lies in
/// the accepted span.
pub fn update_state(state: &mut GramSchmidtState, spec: &BasisSpec, x: &[f64]) -> Result<()> {
    let phi = spec.feature_vector(x)?;
    let mut coeffs = Vec::new();
    state.project(phi.values(), &mut coeffs);
    state.push(x, phi.values(), &coeffs)
}

/// Chain-rule sampler with precomputed envelope constants.
#[derive(Debug, Clone)]
pub struct JacobiEnsemble {
    spec: BasisSpec,
    // bounds[i][k] for k < depth[i]
    bounds: Vec<Vec<f64>>,
}

impl JacobiEnsemble {
    pub fn new(spec: BasisSpec) -> Result<Self> {
        if !spec.params().is_sampler_admissible() {
            return Err(Error::InvalidParameter(
                "rejection sampler requires |a^i|, |b^i| <= 1/2".into(),
            ));
        }
        let bounds = (0..spec.dim())
            .map(|i| {
                let (a, b) = (spec.params().a()[i], spec.params().b()[i]);
                (0..spec.depth()[i])
                    .map(|k| component_bound(k, a, b))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, bounds })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    /// `∏_i C_{k^i}` for the multi-index at rank `r`.
    pub fn envelope(&self, r: usize) -> f64 {
        self.spec
            .index(r)
            .iter()
            .enumerate()
            .map(|(i, &k)| self.bounds[i][k])
            .product()
    }

    /// `(1/N) Σ_r ∏_i C_{k^i}`: expected arcsine proposals per marginal draw.
    pub fn mean_envelope(&self) -> f64 {
        (0..self.spec.size()).map(|r| self.envelope(r)).sum::<f64>() / self.spec.size() as f64
    }

    /// Acceptance ratio `∏_i π (1-x^i)^{a^i+1/2} (1+x^i)^{b^i+1/2} φ_{k^i}(x^i)²`.
    fn component_ratio(&self, k: &[usize], x: &[f64]) -> f64 {
        let params = self.spec.params();
        let mut ratio = 1.0;
        for (i, (&ki, &xi)) in k.iter().zip(x).enumerate() {
            let (a, b) = (params.a()[i], params.b()[i]);
            let phi = self.spec.family(i).eval_degree(ki, xi);
            ratio *= PI * (1.0 - xi).powf(a + 0.5) * (1.0 + xi).powf(b + 0.5) * phi * phi;
        }
        ratio
    }

    /// Draws from `φ_k(x)² ω(x) dx`; returns the point and the number of
    /// rejected arcsine proposals.
    pub fn sample_component<R: Rng + ?Sized>(&self, r: usize, rng: &mut R) -> (Vec<f64>, u64) {
        let k = self.spec.index(r);
        let bound = self.envelope(r);
        let d = self.spec.dim();
        let mut rejections = 0;
        loop {
            let x = sample_arcsine(rng, d);
            let ratio = self.component_ratio(k, &x);
            assert!(
                ratio <= bound * (1.0 + BOUND_SLACK),
                "acceptance ratio {ratio} exceeds envelope {bound} for k={k:?} at x={x:?}"
            );
            let u: f64 = rng.random();
            if u * bound < ratio {
                return (x, rejections);
            }
            rejections += 1;
        }
    }

    /// Draws from `K_N(x, x) ω(x) dx / N` as a uniform mixture of components.
    pub fn sample_marginal<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, u64) {
        let r = rng.random_range(0..self.spec.size());
        self.sample_component(r, rng)
    }

    pub fn sample(&self, rng: &mut RngStream) -> DppSample {
        let n = self.spec.size();
        let d = self.spec.dim();
        let mut state = GramSchmidtState::new(n, d);
        let mut phi = vec![0.0; n];
        let mut scratch = vec![0.0; self.spec.scratch_len()];
        let mut coeffs = Vec::with_capacity(n);
        let (mut rej_marginal, mut rej_conditional) = (0u64, 0u64);
        while state.len() < n {
            let (x, rej) = self.sample_marginal(rng);
            rej_marginal += rej;
            self.spec.fill_features(&x, &mut phi, &mut scratch);
            let accept = state.acceptance_from_features(&phi, &mut coeffs);
            let u: f64 = rng.random();
            if u < accept && state.push(&x, &phi, &coeffs).is_ok() {
                continue;
            }
            rej_conditional += 1;
        }
        DppSample {
            d,
            points: state.points,
            seed: rng.seed(),
            stream: rng.stream(),
            rejections_marginal: rej_marginal,
            rejections_conditional: rej_conditional,
            method: SamplingMethod::ChainRule,
        }
    }
}

/// One chain-rule draw of `DPP(μ, K_N)`.
pub fn sample_projection_dpp(spec: &BasisSpec, rng: &mut RngStream) -> Result<DppSample> {
    Ok(JacobiEnsemble::new(spec.clone())?.sample(rng))
}

/// Draws from the marginal `K_N(x, x) ω(x) dx / N`.
pub fn sample_marginal(spec: &BasisSpec, rng: &mut RngStream) -> Result<(Vec<f64>, u64)> {
    Ok(JacobiEnsemble::new(spec.clone())?.sample_marginal(rng))
}

/// Draws from `φ_k² ω dx` for an arbitrary multi-index `k`.
pub fn sample_component(
    k: &MultiIndex,
    params: &crate::basis::JacobiParams,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, u64)> {
    if k.dim() != params.dim() {
        return Err(Error::InvalidParameter("multi-index dimension mismatch".into()));
    }
    let rank = crate::basis::multiindex_to_rank(k);
    let spec = BasisSpec::new(params.clone(), rank + 1)?;
    Ok(JacobiEnsemble::new(spec)?.sample_component(rank, rng))
}

/// One-dimensional Jacobi ensemble as eigenvalues of a random tridiagonal
/// (Killip–Nenciu) matrix, rescaled from `[-2, 2]` to `[-1, 1]`.
pub fn sample_univariate_tridiagonal(
    n: usize,
    a: f64,
    b: f64,
    rng: &mut RngStream,
) -> Result<DppSample> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    if !(a > -1.0 && b > -1.0) {
        return Err(Error::InvalidParameter(format!(
            "Jacobi exponents must be > -1, got a={a}, b={b}"
        )));
    }
    let nf = n as f64;
    // Verblunsky-type coefficients alpha_{-1}, alpha_0, ..., alpha_{2n-1}
    let beta_dist = |s: f64, t: f64| {
        // density ∝ (1-x)^{s-1} (1+x)^{t-1} on [-1, 1]
        Beta::new(t, s).map_err(|e| Error::InvalidParameter(e.to_string()))
    };
    loop {
        let mut alpha = vec![0.0; 2 * n + 1];
        alpha[0] = -1.0;
        alpha[2 * n] = -1.0;
        for k in 0..2 * n - 1 {
            let kf = k as f64;
            let dist = if k % 2 == 0 {
                let c = (2.0 * nf - kf - 2.0) / 2.0;
                beta_dist(c + a + 1.0, c + b + 1.0)?
            } else {
                beta_dist(
                    (2.0 * nf - kf - 3.0) / 2.0 + a + b + 2.0,
                    (2.0 * nf - kf - 1.0) / 2.0,
                )?
            };
            alpha[k + 1] = 2.0 * dist.sample(rng) - 1.0;
        }
        let at = |k: isize| alpha[(k + 1) as usize];
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        for k in 0..n as isize {
            let prev = if k == 0 { 0.0 } else { at(2 * k - 2) };
            diag.push((1.0 - at(2 * k - 1)) * at(2 * k) - (1.0 + at(2 * k - 1)) * prev);
            if k + 1 < n as isize {
                let v = (1.0 - at(2 * k - 1)) * (1.0 - at(2 * k) * at(2 * k)) * (1.0 + at(2 * k + 1));
                off.push(v.max(0.0).sqrt());
            }
        }
        let points: Vec<f64> = symmetric_tridiagonal_eigenvalues(&diag, &off)
            .into_iter()
            .map(|l| 0.5 * l)
            .collect();
        if points.iter().all(|&x| x > -1.0 && x < 1.0) {
            return Ok(DppSample {
                d: 1,
                points,
                seed: rng.seed(),
                stream: rng.stream(),
                rejections_marginal: 0,
                rejections_conditional: 0,
                method: SamplingMethod::Tridiagonal,
            });
        }
    }
}
