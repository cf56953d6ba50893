//! Orthonormal dyadic spline spaces `V_J` on `[0, 1]`.
//!
//! `V_J` is the space of splines of a given order (degree `order - 1`) with
//! simple knots at `k 2^{-J}` and clamped ends. The raw B-splines `B_j` are
//! orthonormalized against the Lebesgue inner product through the Cholesky
//! factor of their Gram matrix `G = L Lᵀ`: `ψ = L⁻¹ B`. Since `L⁻¹` is lower
//! triangular, `ψ_λ` only involves `B_0..=B_λ` and vanishes to the right of
//! the support of `B_λ`; to the left it decays geometrically.
//!
//! Functions in `V_J` are carried either as orthonormal coefficients `c`
//! (the estimators' coordinates) or as spline coefficients `β = L⁻ᵀ c` for
//! evaluation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, invert_lower, Matrix};
use crate::quadrature::GaussLegendre;

/// Largest supported polynomial order.
pub const MAX_ORDER: usize = 10;
/// Smallest order with nontrivial second derivatives after gluing.
pub const MIN_ORDER: usize = 4;

#[derive(Debug, Clone)]
pub struct Basis {
    level: u32,
    order: usize,
    intervals: usize,
    knots: Vec<f64>,
    chol: Matrix,
    transform: Matrix,
    rule: GaussLegendre,
}

impl Basis {
    pub fn new(level: u32, order: usize) -> Result<Self> {
        if order < MIN_ORDER {
            return Err(Error::OrderTooLow(order));
        }
        if order > MAX_ORDER {
            return Err(Error::InvalidParameter(alloc::format!(
                "order {order} exceeds the supported maximum {MAX_ORDER}"
            )));
        }
        if level > 20 {
            return Err(Error::InvalidParameter(alloc::format!("level {level} is too fine")));
        }
        let intervals = 1usize << level;
        let p = order - 1;
        let mut knots = Vec::with_capacity(intervals + 2 * p + 1);
        knots.extend(core::iter::repeat_n(0.0, p + 1));
        knots.extend((1..intervals).map(|k| k as f64 / intervals as f64));
        knots.extend(core::iter::repeat_n(1.0, p + 1));

        let mut basis = Self {
            level,
            order,
            intervals,
            knots,
            chol: Matrix::zeros(0),
            transform: Matrix::zeros(0),
            rule: GaussLegendre::ten(),
        };
        let gram = basis.bspline_gram();
        let chol = cholesky(&gram, 1e-14).ok_or_else(|| {
            Error::EigenSolver("B-spline Gram matrix is not positive definite".into())
        })?;
        basis.transform = invert_lower(&chol);
        basis.chol = chol;
        Ok(basis)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.intervals + self.order - 1
    }

    /// Number of knot intervals, `2^J`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Breakpoints `0, 2^{-J}, …, 1`.
    pub fn breakpoints(&self) -> Vec<f64> {
        (0..=self.intervals)
            .map(|k| k as f64 / self.intervals as f64)
            .collect()
    }

    /// Clamped knot vector with end multiplicity `order`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `L⁻¹`, mapping B-splines to orthonormal functions.
    pub fn transform(&self) -> &Matrix {
        &self.transform
    }

    pub(crate) fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    /// Knot interval containing `x`: right-continuous, except that `x = 1`
    /// belongs to the last interval.
    pub fn interval_of(&self, x: f64) -> usize {
        let k = libm::floor(x * self.intervals as f64);
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.intervals - 1)
        }
    }

    /// Index of the last B-spline whose support reaches past `interval`'s right end.
    fn first_active(&self, interval: usize) -> usize {
        interval
    }

    /// Derivatives `0..=nd` of the `order` B-splines that are nonzero on
    /// `interval`, evaluated at `x` using that interval's polynomial piece.
    /// Returns the global index of the first one.
    fn local_derivs(
        &self,
        interval: usize,
        x: f64,
        nd: usize,
        ders: &mut [[f64; MAX_ORDER]; 3],
    ) -> usize {
        let p = self.order - 1;
        let span = interval + p;
        let t = &self.knots;
        let mut ndu = [[0.0f64; MAX_ORDER]; MAX_ORDER];
        let mut left = [0.0f64; MAX_ORDER];
        let mut right = [0.0f64; MAX_ORDER];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let nd = nd.min(p);
        let pi = p as isize;
        let mut a = [[0.0f64; MAX_ORDER]; 2];
        for r in 0..=pi {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nd as isize {
                let mut d = 0.0;
                let rk = r - k;
                let pk = pi - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { -rk };
                let j2 = if r - 1 <= pk { k - 1 } else { pi - r };
                let mut j = j1;
                while j <= j2 {
                    a[s2][j as usize] = (a[s1][j as usize] - a[s1][(j - 1) as usize])
                        / ndu[(pk + 1) as usize][(rk + j) as usize];
                    d += a[s2][j as usize] * ndu[(rk + j) as usize][pk as usize];
                    j += 1;
                }
                if r <= pk {
                    a[s2][k as usize] = -a[s1][(k - 1) as usize] / ndu[(pk + 1) as usize][r as usize];
                    d += a[s2][k as usize] * ndu[r as usize][pk as usize];
                }
                ders[k as usize][r as usize] = d;
                core::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        for (k, row) in ders.iter_mut().enumerate().take(nd + 1).skip(1) {
            row[..=p].iter_mut().for_each(|v| *v *= fac);
            fac *= (p - k) as f64;
        }
        for row in ders.iter_mut().take(3).skip(nd + 1) {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        self.first_active(interval)
    }

    fn bspline_gram(&self) -> Matrix {
        let dim = self.dim();
        let mut g = Matrix::zeros(dim);
        let mut ders = [[0.0; MAX_ORDER]; 3];
        let h = 1.0 / self.intervals as f64;
        for k in 0..self.intervals {
            let a = k as f64 * h;
            for (x, w) in self.rule.mapped(a, a + h) {
                let first = self.local_derivs(k, x, 0, &mut ders);
                for i in 0..self.order {
                    for j in 0..self.order {
                        g[(first + i, first + j)] += w * ders[0][i] * ders[0][j];
                    }
                }
            }
        }
        g
    }

    fn check(&self, x: f64, d: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutsideDomain(x));
        }
        if d > 2 {
            return Err(Error::DerivativeOrder(d));
        }
        Ok(())
    }

    /// `ψ_λ^{(d)}(x)` for `d ∈ {0, 1, 2}`.
    pub fn eval(&self, index: usize, x: f64, d: usize) -> Result<f64> {
        if index >= self.dim() {
            return Err(Error::IndexOutOfRange { index, dim: self.dim() });
        }
        self.check(x, d)?;
        let mut ders = [[0.0; MAX_ORDER]; 3];
        let k = self.interval_of(x);
        let first = self.local_derivs(k, x, d, &mut ders);
        let row = self.transform.row(index);
        Ok((0..self.order).map(|i| row[first + i] * ders[d][i]).sum())
    }

    /// All `ψ_λ^{(d)}(x)` at once; `out.len()` must equal `dim`.
    pub fn eval_all(&self, x: f64, d: usize, out: &mut [f64]) -> Result<()> {
        self.check(x, d)?;
        assert_eq!(out.len(), self.dim());
        let mut ders = [[0.0; MAX_ORDER]; 3];
        let k = self.interval_of(x);
        let first = self.local_derivs(k, x, d, &mut ders);
        out[..first].iter_mut().for_each(|v| *v = 0.0);
        for (lambda, o) in out.iter_mut().enumerate().skip(first) {
            let row = self.transform.row(lambda);
            let last = (first + self.order - 1).min(lambda);
            *o = (first..=last).map(|j| row[j] * ders[d][j - first]).sum();
        }
        Ok(())
    }

    /// Spline coefficients `β = L⁻ᵀ c` of `Σ c_λ ψ_λ`.
    pub fn to_spline(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.dim());
        self.transform.tr_mul_vec(coeffs)
    }

    /// Orthonormal coefficients `c = Lᵀ β` of the spline `Σ β_j B_j`.
    pub fn from_spline(&self, spline: &[f64]) -> Vec<f64> {
        assert_eq!(spline.len(), self.dim());
        self.chol.tr_mul_vec(spline)
    }

    /// Coefficients representing the constant function 1 (B-splines sum to one).
    pub fn constant_coeffs(&self) -> Vec<f64> {
        self.from_spline(&vec![1.0; self.dim()])
    }

    /// `⟨f, ψ_λ⟩` for an analytic `f`, by ten-point Gauss per knot interval.
    pub fn project_fn<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        let mut moments = vec![0.0; self.dim()];
        let mut ders = [[0.0; MAX_ORDER]; 3];
        let h = 1.0 / self.intervals as f64;
        for k in 0..self.intervals {
            let a = k as f64 * h;
            for (x, w) in self.rule.mapped(a, a + h) {
                let fx = f(x) * w;
                let first = self.local_derivs(k, x, 0, &mut ders);
                for i in 0..self.order {
                    moments[first + i] += fx * ders[0][i];
                }
            }
        }
        self.transform.mul_vec(&moments)
    }

    /// `⟨f, ψ_λ⟩` for `f` tabulated on the uniform grid `i / n`, `i = 0..=n`.
    ///
    /// The grid must refine every knot interval into an even number of at
    /// least eight cells; integration is composite Simpson per knot interval.
    pub fn project(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() < 2 {
            return Err(Error::GridTooCoarse { points: 0, required: 8 * self.intervals });
        }
        let n = samples.len() - 1;
        let required = 8 * self.intervals;
        if n < required || !n.is_multiple_of(self.intervals) || !(n / self.intervals).is_multiple_of(2) {
            return Err(Error::GridTooCoarse { points: n, required });
        }
        let per = n / self.intervals;
        let g = 1.0 / n as f64;
        let mut moments = vec![0.0; self.dim()];
        let mut ders = [[0.0; MAX_ORDER]; 3];
        for k in 0..self.intervals {
            for local in 0..=per {
                let w = if local == 0 || local == per {
                    1.0
                } else if local % 2 == 1 {
                    4.0
                } else {
                    2.0
                } * g
                    / 3.0;
                let idx = k * per + local;
                let x = idx as f64 * g;
                let first = self.local_derivs(k, x, 0, &mut ders);
                for i in 0..self.order {
                    moments[first + i] += w * samples[idx] * ders[0][i];
                }
            }
        }
        Ok(self.transform.mul_vec(&moments))
    }

    /// Function of `V_J` with orthonormal coefficients `coeffs`.
    pub fn expansion(&self, coeffs: &[f64]) -> Expansion<'_> {
        Expansion { basis: self, spline: self.to_spline(coeffs) }
    }

    /// Rows `(x, ψ_0(x), …, ψ_{dim-1}(x))` on `points` uniform points.
    pub fn tabulate(&self, points: usize, d: usize) -> Result<Vec<Vec<f64>>> {
        if points < 2 {
            return Err(Error::InvalidParameter("need at least two points".into()));
        }
        let mut rows = Vec::with_capacity(points);
        let mut buf = vec![0.0; self.dim()];
        for i in 0..points {
            let x = i as f64 / (points - 1) as f64;
            self.eval_all(x, d, &mut buf)?;
            let mut row = Vec::with_capacity(self.dim() + 1);
            row.push(x);
            row.extend_from_slice(&buf);
            rows.push(row);
        }
        Ok(rows)
    }
}

/// A function `Σ c_λ ψ_λ` held through its spline coefficients.
#[derive(Debug, Clone)]
pub struct Expansion<'a> {
    basis: &'a Basis,
    spline: Vec<f64>,
}

impl<'a> Expansion<'a> {
    pub fn basis(&self) -> &'a Basis {
        self.basis
    }

    pub fn coeffs(&self) -> Vec<f64> {
        self.basis.from_spline(&self.spline)
    }

    fn eval_in(&self, interval: usize, x: f64, d: usize) -> f64 {
        let mut ders = [[0.0; MAX_ORDER]; 3];
        let first = self.basis.local_derivs(interval, x, d, &mut ders);
        (0..self.basis.order)
            .map(|i| self.spline[first + i] * ders[d][i])
            .sum()
    }

    /// Value or derivative (`d ≤ 2`) at `x`, clamped into `[0, 1]`.
    pub fn eval(&self, x: f64, d: usize) -> f64 {
        let x = x.clamp(0.0, 1.0);
        self.eval_in(self.basis.interval_of(x), x, d.min(2))
    }

    /// Multiplies the function by `factor`.
    pub fn scale(mut self, factor: f64) -> Self {
        self.spline.iter_mut().for_each(|v| *v *= factor);
        self
    }
}

/// `x ↦ ∫_0^x f g` for two functions of the same `V_J`, exact up to
/// rounding since the ten-point Gauss rule integrates each polynomial piece
/// of the product exactly.
#[derive(Debug, Clone)]
pub struct ProductPrimitive<'a> {
    f: Expansion<'a>,
    g: Expansion<'a>,
    cumulative: Vec<f64>,
}

impl<'a> ProductPrimitive<'a> {
    pub fn new(f: Expansion<'a>, g: Expansion<'a>) -> Self {
        let basis = f.basis;
        let m = basis.intervals;
        let h = 1.0 / m as f64;
        let mut cumulative = Vec::with_capacity(m + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 0..m {
            let a = k as f64 * h;
            acc += basis
                .rule
                .integrate(a, a + h, |x| f.eval_in(k, x, 0) * g.eval_in(k, x, 0));
            cumulative.push(acc);
        }
        Self { f, g, cumulative }
    }

    pub fn at(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let basis = self.f.basis;
        let k = basis.interval_of(x);
        let a = k as f64 / basis.intervals as f64;
        let partial = basis
            .rule()
            .integrate(a, x, |y| self.f.eval_in(k, y, 0) * self.g.eval_in(k, y, 0));
        self.cumulative[k] + partial
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }
}
