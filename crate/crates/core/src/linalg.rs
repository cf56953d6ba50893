//! Small dense and tridiagonal symmetric linear algebra.
//!
//! Dense matrices here are at most a few hundred rows (basis dimensions),
//! so a cyclic Jacobi sweep is accurate and fast enough. The oracle's
//! generator matrices are tridiagonal with thousands of rows; only a few
//! extreme eigenpairs are needed, which bisection plus inverse iteration
//! delivers in `O(n)` work per pair.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Mᵀ v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += m * vi;
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
///
/// Returns `None` when a pivot falls below `rel_tol · max_diag`, which is how
/// numerically rank-deficient Gram matrices are detected.
pub fn cholesky(a: &Matrix, rel_tol: f64) -> Option<Matrix> {
    let n = a.dim();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return None;
    }
    let floor = rel_tol * max_diag;
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) {
            return None;
        }
        let d = libm::sqrt(d);
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.dim();
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_tr(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.dim();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Inverse of a lower-triangular matrix (again lower triangular).
pub fn invert_lower(l: &Matrix) -> Matrix {
    let n = l.dim();
    let mut inv = Matrix::zeros(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = solve_lower(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// `vectors[k]` belongs to `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.dim();
    let mut m = a.clone();
    // symmetrize exactly; callers assemble symmetric inputs
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let mut v = Matrix::identity(n);
    let total: f64 = m.as_slice().iter().map(|x| x * x).sum();
    if !total.is_finite() {
        return Err(Error::EigenSolver("non-finite matrix entries".into()));
    }
    let threshold = (f64::EPSILON * f64::EPSILON) * total.max(f64::MIN_POSITIVE);
    let mut converged = n < 2;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigenSolver("Jacobi sweeps did not converge".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = order
        .iter()
        .map(|&j| (0..n).map(|i| v[(i, j)]).collect())
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

/// Outcome of the symmetric-definite pencil `A v = κ B v`.
#[derive(Debug, Clone)]
pub enum PencilEigen {
    /// `B` failed the Cholesky test.
    NotPositiveDefinite,
    /// Eigenvalues descending; eigenvectors are `B`-orthonormal.
    Solved(SymmetricEigen),
}

/// Reduces `A v = κ B v` to a standard problem through `B = L Lᵀ`.
pub fn generalized_symmetric_eigen(a: &Matrix, b: &Matrix, rel_tol: f64) -> Result<PencilEigen> {
    let Some(l) = cholesky(b, rel_tol) else {
        return Ok(PencilEigen::NotPositiveDefinite);
    };
    let n = a.dim();
    // C = L⁻¹ A L⁻ᵀ
    let mut half = Matrix::zeros(n);
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| a[(i, j)]).collect();
        let y = solve_lower(&l, &col);
        for i in 0..n {
            half[(i, j)] = y[i];
        }
    }
    let mut c = Matrix::zeros(n);
    for i in 0..n {
        let y = solve_lower(&l, half.row(i));
        for j in 0..n {
            c[(i, j)] = y[j];
        }
    }
    let mut eig = symmetric_eigen(&c)?;
    for w in eig.vectors.iter_mut() {
        *w = solve_lower_tr(&l, w);
    }
    Ok(PencilEigen::Solved(eig))
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm count).
    pub fn count_below(&self, x: f64) -> usize {
        let (lo, hi) = self.gershgorin();
        self.count_below_with(x, Self::pivmin(lo, hi))
    }

    fn pivmin(lo: f64, hi: f64) -> f64 {
        f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * lo.abs().max(hi.abs()))
    }

    fn count_below_with(&self, x: f64, pivmin: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.len() {
            if i > 0 {
                q = (self.diag[i] - x) - self.off[i - 1] * self.off[i - 1] / q;
            }
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k` largest eigenvalues with unit eigenvectors, descending.
    pub fn largest_eigenpairs(&self, k: usize) -> Result<SymmetricEigen> {
        let n = self.len();
        if k > n {
            return Err(Error::InvalidParameter("more eigenpairs than rows".into()));
        }
        let (glo, ghi) = self.gershgorin();
        let span = (ghi - glo).max(f64::MIN_POSITIVE);
        let pivmin = Self::pivmin(glo, ghi);
        let mut values = Vec::with_capacity(k);
        for idx in 0..k {
            // idx-th largest: exactly n - idx - 1 eigenvalues lie below it
            let target = n - idx - 1;
            let mut lo = glo - 1e-12 * span;
            let mut hi = ghi + 1e-12 * span;
            for _ in 0..256 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.count_below_with(mid, pivmin) <= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                    break;
                }
            }
            values.push(0.5 * (lo + hi));
        }
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        for &lambda in &values {
            let mut v: Vec<f64> = (0..n)
                .map(|i| 1.0 + 0.37 * libm::sin(1.3 * i as f64 + 0.5))
                .collect();
            for _ in 0..4 {
                let mut y = self.shifted_solve(lambda, &v, span);
                for prev in &vectors {
                    let proj = dot(prev, &y);
                    y.iter_mut().zip(prev).for_each(|(a, b)| *a -= proj * b);
                }
                let nrm = norm(&y);
                if !(nrm > 0.0) || !nrm.is_finite() {
                    return Err(Error::EigenSolver("inverse iteration broke down".into()));
                }
                y.iter_mut().for_each(|a| *a /= nrm);
                v = y;
            }
            vectors.push(v);
        }
        Ok(SymmetricEigen { values, vectors })
    }

    /// Solves `(T − λ I) y = r` by LU with partial pivoting; exact-zero
    /// pivots are replaced by a tiny multiple of the spectral span.
    fn shifted_solve(&self, lambda: f64, r: &[f64], span: f64) -> Vec<f64> {
        let n = self.len();
        let tiny = f64::EPSILON * span;
        if n == 1 {
            let d = self.diag[0] - lambda;
            return vec![r[0] / if d.abs() < tiny { tiny } else { d }];
        }
        // U has up to two super-diagonals after pivoting
        let mut d: Vec<f64> = self.diag.iter().map(|&x| x - lambda).collect();
        let mut du: Vec<f64> = self.off.clone();
        let mut dl: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut b = r.to_vec();
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                d[i + 1] -= f * du[i];
                b[i + 1] -= f * b[i];
                dl[i] = f;
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - f * tmp;
                if i + 1 < n - 1 {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du2[i];
                }
                du[i] = tmp;
                b.swap(i, i + 1);
                b[i + 1] -= f * b[i];
                dl[i] = f;
            }
        }
        if d[n - 1].abs() < tiny {
            d[n - 1] = if d[n - 1] < 0.0 { -tiny } else { tiny };
        }
        let mut x = vec![0.0; n];
        x[n - 1] = b[n - 1] / d[n - 1];
        x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        for i in (0..n - 2).rev() {
            x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        x
    }
}
