//! Multivariate orthonormal Jacobi polynomials on `[-1, 1]^d`.
//!
//! The base measure is separable, `ω(x) = ∏_i (1 - x^i)^{a^i} (1 + x^i)^{b^i}`,
//! so every multivariate orthonormal polynomial is a product of univariate
//! ones. Multi-indices are ranked by maximum degree first and
//! lexicographically within a block of constant maximum degree; the first `N`
//! ranks define the feature map `Φ` and the projection kernel
//! `K_N(x, y) = Φ(x)ᵀ Φ(y)`.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Per-dimension Jacobi exponents of the base measure.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiParams {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl JacobiParams {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if a.len() != b.len() {
            return Err(Error::InvalidParameter(format!(
                "exponent vectors differ in length ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        for (i, (&ai, &bi)) in a.iter().zip(&b).enumerate() {
            if !(ai > -1.0 && bi > -1.0) || !ai.is_finite() || !bi.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "dimension {i}: exponents must be finite and > -1, got a={ai}, b={bi}"
                )));
            }
        }
        Ok(Self { a, b })
    }

    /// Same `(a, b)` in every dimension.
    pub fn uniform(d: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a; d], vec![b; d])
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// The rejection sampler requires `|a^i|, |b^i| <= 1/2`.
    pub fn is_sampler_admissible(&self) -> bool {
        self.a
            .iter()
            .chain(&self.b)
            .all(|&e| e.abs() <= 0.5)
    }
}

/// A multi-index `k = (k^1, ..., k^d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn max_degree(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

fn pow(base: usize, exp: usize) -> usize {
    base.checked_pow(exp as u32)
        .expect("multi-index rank overflows usize")
}

/// Number of completions of a suffix of length `rem` with entries in `0..=m`,
/// given whether the prefix already contains the maximum `m`.
fn completions(m: usize, rem: usize, has_max: bool) -> usize {
    if has_max {
        pow(m + 1, rem)
    } else {
        pow(m + 1, rem) - pow(m, rem)
    }
}

/// The `n`-th multi-index (0-based) in max-degree-then-lexicographic order.
pub fn rank_to_multiindex(n: usize, d: usize) -> MultiIndex {
    assert!(d >= 1, "dimension must be positive");
    let mut m = 0;
    while pow(m + 1, d) <= n {
        m += 1;
    }
    let mut r = n - pow(m, d);
    let mut k = Vec::with_capacity(d);
    let mut has_max = false;
    for i in 0..d {
        let rem = d - i - 1;
        for v in 0..=m {
            let with_v = has_max || v == m;
            let count = completions(m, rem, with_v);
            if r < count {
                k.push(v);
                has_max = with_v;
                break;
            }
            r -= count;
        }
    }
    debug_assert_eq!(k.len(), d);
    MultiIndex(k)
}

/// Inverse of [`rank_to_multiindex`].
pub fn multiindex_to_rank(k: &MultiIndex) -> usize {
    let d = k.dim();
    assert!(d >= 1, "dimension must be positive");
    let m = k.max_degree();
    let mut rank = pow(m, d);
    let mut has_max = false;
    for (i, &ki) in k.0.iter().enumerate() {
        let rem = d - i - 1;
        for v in 0..ki {
            rank += completions(m, rem, has_max || v == m);
        }
        has_max |= ki == m;
    }
    rank
}

/// `ln B(a + 1, b + 1) + (a + b + 1) ln 2`, the log of `∫ (1-z)^a (1+z)^b dz`.
fn ln_mass_1d(a: f64, b: f64) -> f64 {
    (a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0)
}

/// Mass of the one-dimensional Jacobi weight.
pub fn mass_1d(a: f64, b: f64) -> f64 {
    ln_mass_1d(a, b).exp()
}

/// `μ([-1, 1]^d)`.
pub fn total_mass(params: &JacobiParams) -> f64 {
    params
        .a()
        .iter()
        .zip(params.b())
        .map(|(&a, &b)| ln_mass_1d(a, b))
        .sum::<f64>()
        .exp()
}

/// Density of the base measure, `∏_i (1 - x^i)^{a^i} (1 + x^i)^{b^i}`.
pub fn base_weight(params: &JacobiParams, x: &[f64]) -> Result<f64> {
    check_point(params.dim(), x)?;
    let mut w = 1.0;
    for (i, ((&xi, &a), &b)) in x.iter().zip(params.a()).zip(params.b()).enumerate() {
        if (xi == 1.0 && a < 0.0) || (xi == -1.0 && b < 0.0) {
            return Err(Error::InfiniteWeight { dim: i, value: xi });
        }
        w *= (1.0 - xi).powf(a) * (1.0 + xi).powf(b);
    }
    Ok(w)
}

fn check_point(d: usize, x: &[f64]) -> Result<()> {
    if x.len() != d {
        return Err(Error::InvalidParameter(format!(
            "point has {} coordinates, expected {d}",
            x.len()
        )));
    }
    for (dim, &value) in x.iter().enumerate() {
        if !(-1.0..=1.0).contains(&value) {
            return Err(Error::Domain { dim, value });
        }
    }
    Ok(())
}

/// Orthonormal Jacobi polynomials `φ_0, ..., φ_{depth-1}` for one `(a, b)` pair.
///
/// Values come from the classical three-term recurrence for `P_n^{(a,b)}`
/// scaled by `1/sqrt(h_n)`, where the squared norm `h_n` is evaluated with
/// log-gamma.
#[derive(Debug, Clone)]
pub struct UnivariateJacobi {
    a: f64,
    b: f64,
    // (slope, intercept, lag) of P_n = (slope x + intercept) P_{n-1} - lag P_{n-2}, n >= 2
    recurrence: Vec<(f64, f64, f64)>,
    scale: Vec<f64>,
}

impl UnivariateJacobi {
    pub fn new(a: f64, b: f64, depth: usize) -> Self {
        assert!(a > -1.0 && b > -1.0, "Jacobi exponents must be > -1");
        assert!(depth >= 1, "depth must be at least 1");
        let ab = a + b;
        let mut recurrence = Vec::with_capacity(depth.saturating_sub(2));
        for n in 2..depth {
            let n = n as f64;
            let s = 2.0 * n + ab;
            let c0 = 2.0 * n * (n + ab) * (s - 2.0);
            let c1 = (s - 1.0) * s * (s - 2.0);
            let c2 = (s - 1.0) * (a * a - b * b);
            let c3 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * s;
            recurrence.push((c1 / c0, c2 / c0, c3 / c0));
        }
        let scale = (0..depth)
            .map(|n| (-0.5 * ln_norm_sq(a, b, n)).exp())
            .collect();
        Self {
            a,
            b,
            recurrence,
            scale,
        }
    }

    pub fn depth(&self) -> usize {
        self.scale.len()
    }

    pub fn params(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Writes `φ_0(z), ..., φ_{out.len()-1}(z)`; `out.len()` must not exceed the depth.
    pub fn eval_into(&self, z: f64, out: &mut [f64]) {
        let len = out.len();
        assert!(len <= self.depth(), "requested degree beyond recurrence depth");
        if len == 0 {
            return;
        }
        let (a, b) = (self.a, self.b);
        let mut p_prev = 1.0;
        out[0] = self.scale[0];
        if len == 1 {
            return;
        }
        let mut p = (a + 1.0) + 0.5 * (a + b + 2.0) * (z - 1.0);
        out[1] = p * self.scale[1];
        for n in 2..len {
            let (slope, intercept, lag) = self.recurrence[n - 2];
            let next = (slope * z + intercept) * p - lag * p_prev;
            p_prev = p;
            p = next;
            out[n] = p * self.scale[n];
        }
    }

    pub fn eval(&self, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.depth()];
        self.eval_into(z, &mut out);
        out
    }

    /// `φ_k(z)` alone.
    pub fn eval_degree(&self, k: usize, z: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        match k {
            0 => self.scale[0],
            _ => {
                let mut p_prev = 1.0;
                let mut p = (a + 1.0) + 0.5 * (a + b + 2.0) * (z - 1.0);
                for n in 2..=k {
                    let (slope, intercept, lag) = self.recurrence[n - 2];
                    let next = (slope * z + intercept) * p - lag * p_prev;
                    p_prev = p;
                    p = next;
                }
                p * self.scale[k]
            }
        }
    }
}

/// `ln ∫ P_n^{(a,b)}(z)^2 (1-z)^a (1+z)^b dz`.
fn ln_norm_sq(a: f64, b: f64, n: usize) -> f64 {
    if n == 0 {
        return ln_mass_1d(a, b);
    }
    let n = n as f64;
    (a + b + 1.0) * std::f64::consts::LN_2 - (2.0 * n + a + b + 1.0).ln()
        + ln_gamma(n + a + 1.0)
        + ln_gamma(n + b + 1.0)
        - ln_gamma(n + a + b + 1.0)
        - ln_gamma(n + 1.0)
}

/// `(φ_0(z), ..., φ_{depth-1}(z))` orthonormal w.r.t. `(1-z)^a (1+z)^b dz`.
pub fn eval_univariate(a: f64, b: f64, depth: usize, z: f64) -> Vec<f64> {
    UnivariateJacobi::new(a, b, depth).eval(z)
}

/// `Φ(x)` for one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// The first `N` multivariate orthonormal polynomials under the
/// max-degree ordering, with per-dimension recurrence tables.
#[derive(Debug, Clone)]
pub struct BasisSpec {
    params: JacobiParams,
    n: usize,
    ordering: Vec<MultiIndex>,
    // ordering flattened row-major, n * d
    flat: Vec<usize>,
    depth: Vec<usize>,
    offsets: Vec<usize>,
    families: Vec<UnivariateJacobi>,
    mass: f64,
}

impl BasisSpec {
    pub fn new(params: JacobiParams, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be positive".into()));
        }
        let d = params.dim();
        let ordering: Vec<MultiIndex> = (0..n).map(|r| rank_to_multiindex(r, d)).collect();
        let mut depth = vec![1; d];
        for k in &ordering {
            for (dep, &ki) in depth.iter_mut().zip(k.as_slice()) {
                *dep = (*dep).max(ki + 1);
            }
        }
        let flat = ordering.iter().flat_map(|k| k.0.iter().copied()).collect();
        let mut offsets = Vec::with_capacity(d + 1);
        offsets.push(0);
        for &dep in &depth {
            offsets.push(offsets.last().unwrap() + dep);
        }
        let families = params
            .a()
            .iter()
            .zip(params.b())
            .zip(&depth)
            .map(|((&a, &b), &dep)| UnivariateJacobi::new(a, b, dep))
            .collect();
        let mass = total_mass(&params);
        Ok(Self {
            params,
            n,
            ordering,
            flat,
            depth,
            offsets,
            families,
            mass,
        })
    }

    pub fn params(&self) -> &JacobiParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Number of basis functions, equal to the rank of `K_N`.
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn ordering(&self) -> &[MultiIndex] {
        &self.ordering
    }

    /// Multi-index at rank `r` as a slice.
    pub fn index(&self, r: usize) -> &[usize] {
        let d = self.dim();
        &self.flat[r * d..(r + 1) * d]
    }

    pub fn depth(&self) -> &[usize] {
        &self.depth
    }

    pub fn family(&self, dim: usize) -> &UnivariateJacobi {
        &self.families[dim]
    }

    /// `μ([-1, 1]^d)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Length of the scratch buffer used by [`BasisSpec::fill_features`].
    pub fn scratch_len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Writes `Φ(x)` into `out` (length `N`) without domain checks.
    /// `scratch` must have length [`BasisSpec::scratch_len`].
    pub fn fill_features(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let d = self.dim();
        for (i, family) in self.families.iter().enumerate() {
            family.eval_into(x[i], &mut scratch[self.offsets[i]..self.offsets[i + 1]]);
        }
        for (r, o) in out.iter_mut().enumerate() {
            let k = &self.flat[r * d..(r + 1) * d];
            let mut v = scratch[self.offsets[0] + k[0]];
            for i in 1..d {
                v *= scratch[self.offsets[i] + k[i]];
            }
            *o = v;
        }
    }

    pub fn feature_vector(&self, x: &[f64]) -> Result<FeatureVector> {
        check_point(self.dim(), x)?;
        let mut out = vec![0.0; self.n];
        let mut scratch = vec![0.0; self.scratch_len()];
        self.fill_features(x, &mut out, &mut scratch);
        Ok(FeatureVector(out))
    }

    /// `K_N(x, y)`.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.feature_vector(x)?.dot(&self.feature_vector(y)?))
    }

    /// `K_N(x, x) = ‖Φ(x)‖²`.
    pub fn kernel_diagonal(&self, x: &[f64]) -> Result<f64> {
        Ok(self.feature_vector(x)?.norm_sq())
    }

    /// `φ_k(x)` for the multi-index at rank `r`.
    pub fn basis_function(&self, r: usize, x: &[f64]) -> f64 {
        self.index(r)
            .iter()
            .zip(&self.families)
            .zip(x)
            .map(|((&k, fam), &xi)| fam.eval_degree(k, xi))
            .product()
    }
}
