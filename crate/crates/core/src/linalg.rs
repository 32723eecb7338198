//! Small dense and tridiagonal linear algebra kernels.

use crate::error::{Error, Result};

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `offdiag` (length `n - 1`), in ascending order.
///
/// Implicit-shift QL iteration with Wilkinson-type shifts, values only.
pub fn symmetric_tridiagonal_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(
        offdiag.len() + 1 == n || (n == 0 && offdiag.is_empty()),
        "off-diagonal must have length n - 1"
    );
    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 200, "tridiagonal QL failed to converge");

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|x, y| x.total_cmp(y));
    d
}

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "expected n * n entries");
        Self { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// `PA = LU` with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    swaps: usize,
    norm_one: f64,
    singular: bool,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Self {
        let n = a.size();
        let norm_one = a.norm_one();
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut singular = false;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if pmax == 0.0 || !pmax.is_finite() {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= factor * lu[k * n + j];
                    }
                }
            }
        }
        Self {
            n,
            lu,
            perm,
            swaps,
            norm_one,
            singular,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn determinant(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        let sign = if self.swaps.is_multiple_of(2) { 1.0 } else { -1.0 };
        (0..self.n).fold(sign, |acc, i| acc * self.lu[i * self.n + i])
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    /// Solves `Aᵀ x = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        // Uᵀ z = rhs, Lᵀ w = z, x = Pᵀ w
        let mut z = rhs.to_vec();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.lu[k * n + i] * z[k]).sum();
            z[i] = (z[i] - s) / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| self.lu[k * n + i] * z[k]).sum();
            z[i] -= s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    /// Reciprocal 1-norm condition number estimate (Hager's method).
    pub fn rcond(&self) -> f64 {
        if self.singular || self.norm_one == 0.0 {
            return 0.0;
        }
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            estimate = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j] = 1.0;
        }
        if !estimate.is_finite() || estimate == 0.0 {
            return 0.0;
        }
        1.0 / (self.norm_one * estimate)
    }
}

/// Factorizes `a`, failing when it is singular to working precision.
pub fn factor_checked(a: &Matrix) -> Result<(Lu, f64)> {
    let lu = Lu::factor(a);
    let rcond = lu.rcond();
    if lu.is_singular() || !(rcond > f64::EPSILON) {
        return Err(Error::Conditioning { rcond });
    }
    Ok((lu, rcond))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn tridiagonal_known_spectrum() {
        // second-difference matrix: 2 - 2 cos(k π / (n + 1))
        let n = 12;
        let eig = symmetric_tridiagonal_eigenvalues(&vec![2.0; n], &vec![-1.0; n - 1]);
        for (k, &l) in eig.iter().enumerate() {
            let expected =
                2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert_relative_eq!(l, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn tridiagonal_trivial_sizes() {
        assert!(symmetric_tridiagonal_eigenvalues(&[], &[]).is_empty());
        assert_eq!(symmetric_tridiagonal_eigenvalues(&[3.5], &[]), vec![3.5]);
        let e = symmetric_tridiagonal_eigenvalues(&[1.0, 1.0], &[1.0]);
        assert_relative_eq!(e[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(e[1], 2.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn tridiagonal_trace_and_frobenius(
            diag in proptest::collection::vec(-3.0f64..3.0, 2..30),
            seed in proptest::collection::vec(-2.0f64..2.0, 30),
        ) {
            let n = diag.len();
            let off = &seed[..n - 1];
            let eig = symmetric_tridiagonal_eigenvalues(&diag, off);
            let trace: f64 = diag.iter().sum();
            let fro: f64 = diag.iter().map(|v| v * v).sum::<f64>()
                + 2.0 * off.iter().map(|v| v * v).sum::<f64>();
            prop_assert!((eig.iter().sum::<f64>() - trace).abs() < 1e-10 * (1.0 + trace.abs()));
            prop_assert!((eig.iter().map(|v| v * v).sum::<f64>() - fro).abs() < 1e-9 * (1.0 + fro));
            prop_assert!(eig.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn lu_solves_both_orientations(
            entries in proptest::collection::vec(-1.0f64..1.0, 36),
            rhs in proptest::collection::vec(-1.0f64..1.0, 6),
        ) {
            let mut data = entries;
            for i in 0..6 { data[i * 6 + i] += 4.0; }
            let a = Matrix::from_rows(6, data);
            let lu = Lu::factor(&a);
            let x = lu.solve(&rhs);
            let back = a.mul_vec(&x);
            for (u, v) in back.iter().zip(&rhs) { prop_assert!((u - v).abs() < 1e-12); }
            let xt = lu.solve_transpose(&rhs);
            for j in 0..6 {
                let s: f64 = (0..6).map(|i| a.get(i, j) * xt[i]).sum();
                prop_assert!((s - rhs[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lu_needs_pivoting() {
        let a = Matrix::from_rows(2, vec![0.0, 1.0, 1.0, 0.0]);
        let (lu, rcond) = factor_checked(&a).unwrap();
        assert_eq!(lu.solve(&[2.0, 3.0]), vec![3.0, 2.0]);
        assert_relative_eq!(rcond, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn determinant_with_swaps() {
        let a = Matrix::from_rows(3, vec![0.0, 2.0, 1.0, 1.0, 0.0, 3.0, 4.0, 1.0, 0.0]);
        // 0(0 - 3) - 2(0 - 12) + 1(1 - 0) = 25
        assert_relative_eq!(Lu::factor(&a).determinant(), 25.0, epsilon = 1e-12);
    }

    #[test]
    fn rcond_of_diagonal() {
        let a = Matrix::from_rows(3, vec![1.0, 0.0, 0.0, 0.0, 1e-3, 0.0, 0.0, 0.0, 10.0]);
        let rcond = Lu::factor(&a).rcond();
        assert_relative_eq!(rcond, 1e-4, epsilon = 1e-16);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = Matrix::from_rows(2, vec![1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(factor_checked(&a), Err(Error::Conditioning { .. })));
        let z = Matrix::zeros(3);
        assert!(matches!(factor_checked(&z), Err(Error::Conditioning { rcond }) if rcond == 0.0));
    }
}
