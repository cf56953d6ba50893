//! Ground truth for a known diffusion.
//!
//! For `L f = ½σ² f″ + b f′` on `[0, 1]` with Neumann conditions:
//!
//! - `μ(x) ∝ σ⁻²(x) exp(∫_0^x 2b/σ²)` is the invariant density,
//! - `S = ½σ²μ = C₀ exp(∫_0^x 2b/σ²)` puts the generator in divergence form
//!   `L f = μ⁻¹ (S f′)′`,
//! - the eigenpairs `L u_k = ν_k u_k` come from a conservative finite-volume
//!   discretization whose pencil is symmetric with a diagonal μ weight,
//! - `σ² = 2ν₁ ∫_0^x u₁μ / (u₁′μ)` and
//!   `b = ν₁ (u₁u₁′μ − u₁″ ∫_0^x u₁μ) / (u₁′²μ)` recover the coefficients.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::linalg::SymTridiagonal;
use crate::quadrature::{cumulative_simpson, simpson, trapezoid_weights, uniform_grid};
use crate::stats::InverseCdf;

/// Default bound on the first omitted spectral weight `e^{ν_K Δ}`.
pub const TRUNCATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct InvariantDensity {
    pub grid: Vec<f64>,
    pub mu: Vec<f64>,
    /// Constant with `μ = 2C₀σ⁻² exp(∫2b/σ²)`.
    pub c0: f64,
    exponent: Vec<f64>,
}

impl InvariantDensity {
    /// `S = C₀ exp(∫_0^x 2b/σ²)`.
    pub fn scale_from_exponent(&self) -> Vec<f64> {
        self.exponent.iter().map(|e| self.c0 * libm::exp(*e)).collect()
    }
}

fn check_grid(n: usize, min: usize) -> Result<()> {
    if n < min || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "grid size {n} must be even and at least {min}"
        )));
    }
    Ok(())
}

/// Invariant density on `n + 1` uniform points, normalized by Simpson.
pub fn invariant_density(spec: &DiffusionSpec, n: usize) -> Result<InvariantDensity> {
    check_grid(n, 64)?;
    density_on_grid(spec, n)
}

fn density_on_grid(spec: &DiffusionSpec, n: usize) -> Result<InvariantDensity> {
    let grid = uniform_grid(n);
    let h = 1.0 / n as f64;
    let mut sigma2 = Vec::with_capacity(n + 1);
    for &x in &grid {
        let s2 = spec.sigma2(x);
        if !(s2 > 0.0) || !s2.is_finite() {
            return Err(Error::Ellipticity { x, value: spec.sigma(x), bound: 0.0 });
        }
        sigma2.push(s2);
    }
    let rate: Vec<f64> = grid
        .iter()
        .zip(&sigma2)
        .map(|(&x, s2)| 2.0 * spec.drift(x) / s2)
        .collect();
    let exponent = cumulative_simpson(&rate, h);
    let raw: Vec<f64> = exponent
        .iter()
        .zip(&sigma2)
        .map(|(e, s2)| libm::exp(*e) / s2)
        .collect();
    let z = simpson(&raw, h);
    let mu = raw.iter().map(|r| r / z).collect();
    Ok(InvariantDensity { grid, mu, c0: 0.5 / z, exponent })
}

/// `S = ½σ²μ` on the grid, cross-checked against `C₀ exp(∫2b/σ²)`.
pub fn scale_function(spec: &DiffusionSpec, n: usize) -> Result<Vec<f64>> {
    let dens = invariant_density(spec, n)?;
    let s: Vec<f64> = dens
        .grid
        .iter()
        .zip(&dens.mu)
        .map(|(&x, m)| 0.5 * spec.sigma2(x) * m)
        .collect();
    let alt = dens.scale_from_exponent();
    let scale = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let gap = s.iter().zip(&alt).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    if gap > 1e-9 * scale.max(1.0) {
        return Err(Error::EigenSolver(format!("scale function cross-check failed: {gap:e}")));
    }
    Ok(s)
}

/// Grid function over a subinterval of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    grid: Vec<f64>,
    h: f64,
    mu: Vec<f64>,
    scale: Vec<f64>,
    face_scale: Vec<f64>,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Vec<f64>>,
}

/// Finite-volume eigenpairs of the generator with zero-flux boundary faces.
///
/// Nodes sit at `i / n`; node `i` owns the cell `[x_i − h/2, x_i + h/2] ∩ [0, 1]`.
/// The node equation `S_{i+½}(u_{i+1} − u_i)/h − S_{i−½}(u_i − u_{i−1})/h = ν μ_i |cell_i| u_i`
/// gives a symmetric tridiagonal `A` and diagonal mass `M = diag(μ_i |cell_i|)`;
/// the pencil is reduced to `M^{-1/2} A M^{-1/2}`.
pub fn generator_eigs(spec: &DiffusionSpec, n: usize, k: usize) -> Result<SpectralDecomposition> {
    check_grid(n, 256)?;
    if k == 0 || k > n / 4 {
        return Err(Error::InvalidParameter(format!("eigencount {k} must lie in 1..={}", n / 4)));
    }
    // faces live on the half-step grid
    let fine = density_on_grid(spec, 2 * n)?;
    let fine_scale: Vec<f64> = fine
        .grid
        .iter()
        .zip(&fine.mu)
        .map(|(&x, m)| 0.5 * spec.sigma2(x) * m)
        .collect();
    let grid = uniform_grid(n);
    let h = 1.0 / n as f64;
    let mu: Vec<f64> = (0..=n).map(|i| fine.mu[2 * i]).collect();
    let scale: Vec<f64> = (0..=n).map(|i| fine_scale[2 * i]).collect();
    let face_scale: Vec<f64> = (0..n).map(|i| fine_scale[2 * i + 1]).collect();
    let weights: Vec<f64> = trapezoid_weights(n + 1, h)
        .into_iter()
        .zip(&mu)
        .map(|(w, m)| w * m)
        .collect();

    let diag: Vec<f64> = (0..=n)
        .map(|i| {
            let left = if i > 0 { face_scale[i - 1] } else { 0.0 };
            let right = if i < n { face_scale[i] } else { 0.0 };
            -(left + right) / (h * weights[i])
        })
        .collect();
    let off: Vec<f64> = (0..n)
        .map(|i| face_scale[i] / (h * libm::sqrt(weights[i] * weights[i + 1])))
        .collect();
    let tri = SymTridiagonal::new(diag, off);
    let eig = tri.largest_eigenpairs(k)?;

    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenfunctions = Vec::with_capacity(k);
    for v in eig.vectors {
        let mut u: Vec<f64> = v.iter().zip(&weights).map(|(a, w)| a / libm::sqrt(*w)).collect();
        let lead = u.iter().copied().find(|x| x.abs() > 1e-300).unwrap_or(1.0);
        if u[0] < 0.0 || (u[0] == 0.0 && lead < 0.0) {
            u.iter_mut().for_each(|x| *x = -*x);
        }
        // Rayleigh quotient as a sum of positive flux terms, free of cancellation
        let energy: f64 = (0..n)
            .map(|i| {
                let d = u[i + 1] - u[i];
                face_scale[i] * d * d / h
            })
            .sum();
        let mass: f64 = u.iter().zip(&weights).map(|(a, w)| w * a * a).sum();
        eigenvalues.push(-energy / mass);
        eigenfunctions.push(u);
    }
    for (i, w) in eigenvalues.windows(2).enumerate() {
        if !(w[0] > w[1]) {
            return Err(Error::EigenSolver(format!("eigenvalues {i} and {} are not separated", i + 1)));
        }
    }
    Ok(SpectralDecomposition {
        grid,
        h,
        mu,
        scale,
        face_scale,
        weights,
        eigenvalues,
        eigenfunctions,
    })
}

/// Centered differences inside, second-order one-sided at the ends.
pub fn first_difference(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len() - 1;
    let mut d = vec![0.0; n + 1];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    d[n] = (3.0 * values[n] - 4.0 * values[n - 1] + values[n - 2]) / (2.0 * h);
    for i in 1..n {
        d[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    d
}

/// Centered second differences inside, second-order one-sided at the ends.
pub fn second_difference(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len() - 1;
    let h2 = h * h;
    let mut d = vec![0.0; n + 1];
    d[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h2;
    d[n] = (2.0 * values[n] - 5.0 * values[n - 1] + 4.0 * values[n - 2] - values[n - 3]) / h2;
    for i in 1..n {
        d[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / h2;
    }
    d
}

impl SpectralDecomposition {
    /// Number of grid intervals.
    pub fn n(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `S` at the nodes.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// `S` at the cell faces `(i + ½) / n`.
    pub fn face_scale(&self) -> &[f64] {
        &self.face_scale
    }

    /// Discrete `L²(μ)` weights `μ_i |cell_i|`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunction(&self, k: usize) -> &[f64] {
        &self.eigenfunctions[k]
    }

    pub fn eigencount(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn derivative(&self, k: usize) -> Vec<f64> {
        first_difference(&self.eigenfunctions[k], self.h)
    }

    pub fn second_derivative(&self, k: usize) -> Vec<f64> {
        second_difference(&self.eigenfunctions[k], self.h)
    }

    /// `⟨u_j, u_k⟩` under the discrete `L²(μ)` weights.
    pub fn inner(&self, j: usize, k: usize) -> f64 {
        self.eigenfunctions[j]
            .iter()
            .zip(&self.eigenfunctions[k])
            .zip(&self.weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn min_scale(&self) -> f64 {
        self.scale.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn interior(&self, a: f64, b: f64) -> Result<Vec<usize>> {
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(Error::InvalidParameter(format!("[{a}, {b}] must lie inside (0, 1)")));
        }
        let idx: Vec<usize> = (0..self.grid.len())
            .filter(|&i| self.grid[i] >= a - 1e-12 && self.grid[i] <= b + 1e-12)
            .collect();
        if idx.is_empty() {
            return Err(Error::InvalidParameter("subinterval contains no grid points".into()));
        }
        Ok(idx)
    }

    /// `(ν₁, u₁, u₁′, ∫₀ˣ u₁μ)`.
    #[allow(clippy::type_complexity)]
    fn first_mode_terms(&self) -> Result<(f64, &[f64], Vec<f64>, Vec<f64>)> {
        if self.eigencount() < 2 {
            return Err(Error::InvalidParameter("need the first nontrivial eigenpair".into()));
        }
        let u1 = &self.eigenfunctions[1];
        let weighted: Vec<f64> = u1.iter().zip(&self.mu).map(|(u, m)| u * m).collect();
        let primitive = cumulative_simpson(&weighted, self.h);
        Ok((self.eigenvalues[1], u1, self.derivative(1), primitive))
    }

    /// `σ² = 2ν₁ ∫_0^x u₁μ / (u₁′μ)` on the grid points of `[a, b]`.
    pub fn reconstruct_sigma2(&self, a: f64, b: f64) -> Result<Profile> {
        let idx = self.interior(a, b)?;
        let (nu1, _, du, prim) = self.first_mode_terms()?;
        let denoms: Vec<f64> = idx.iter().map(|&i| du[i] * self.mu[i]).collect();
        check_denominators(&idx, &self.grid, &denoms)?;
        let values = idx
            .iter()
            .zip(&denoms)
            .map(|(&i, d)| 2.0 * nu1 * prim[i] / d)
            .collect();
        Ok(Profile { x: idx.iter().map(|&i| self.grid[i]).collect(), values })
    }

    /// `b = ν₁ (u₁u₁′μ − u₁″ ∫_0^x u₁μ) / (u₁′²μ)` on the grid points of `[a, b]`.
    pub fn reconstruct_drift(&self, a: f64, b: f64) -> Result<Profile> {
        let idx = self.interior(a, b)?;
        let (nu1, u1, du, prim) = self.first_mode_terms()?;
        let d2u = self.second_derivative(1);
        let denoms: Vec<f64> = idx.iter().map(|&i| du[i] * du[i] * self.mu[i]).collect();
        check_denominators(&idx, &self.grid, &denoms)?;
        let values = idx
            .iter()
            .zip(&denoms)
            .map(|(&i, d)| nu1 * (u1[i] * du[i] * self.mu[i] - d2u[i] * prim[i]) / d)
            .collect();
        Ok(Profile { x: idx.iter().map(|&i| self.grid[i]).collect(), values })
    }

    /// `b = S′/μ`, independent of the eigenpairs.
    pub fn drift_from_scale(&self, a: f64, b: f64) -> Result<Profile> {
        let idx = self.interior(a, b)?;
        let ds = first_difference(&self.scale, self.h);
        Ok(Profile {
            x: idx.iter().map(|&i| self.grid[i]).collect(),
            values: idx.iter().map(|&i| ds[i] / self.mu[i]).collect(),
        })
    }

    pub fn invariant_sampler(&self) -> InverseCdf {
        InverseCdf::new(&self.grid, &self.mu).expect("invariant density has positive mass")
    }

    /// Smallest `K` whose spectral weight `e^{ν_K Δ}` is below `tol`.
    pub fn truncation_level(&self, delta: f64, tol: f64) -> Result<usize> {
        self.eigenvalues
            .iter()
            .position(|nu| libm::exp(nu * delta) < tol)
            .ok_or_else(|| Error::Truncation {
                residual: libm::exp(self.eigenvalues.last().unwrap() * delta),
                tolerance: tol,
            })
    }
}

fn check_denominators(idx: &[usize], grid: &[f64], denoms: &[f64]) -> Result<()> {
    let scale = denoms.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    for (&i, d) in idx.iter().zip(denoms) {
        if !(d.abs() > 1e-12 * scale) || !d.is_finite() {
            return Err(Error::VanishingDenominator(grid[i]));
        }
    }
    Ok(())
}

/// One draw from the invariant law by inverse CDF.
pub fn sample_invariant<R: Rng + ?Sized>(dec: &SpectralDecomposition, rng: &mut R) -> f64 {
    dec.invariant_sampler().quantile(rng.random::<f64>())
}

/// Truncated spectral sum `p_Δ(x, y) = μ(y) Σ_{k ≤ K} e^{ν_k Δ} u_k(x) u_k(y)`
/// on the oracle grid.
#[derive(Debug, Clone)]
pub struct TransitionDensity {
    grid: Vec<f64>,
    h: f64,
    delta: f64,
    modes: usize,
    residual: f64,
    values: Vec<f64>,
}

/// Uses modes `0..=k`; fails when `e^{ν_k Δ}` exceeds [`TRUNCATION_TOLERANCE`].
pub fn transition_density(
    dec: &SpectralDecomposition,
    delta: f64,
    k: usize,
) -> Result<TransitionDensity> {
    transition_density_with(dec, delta, k, TRUNCATION_TOLERANCE)
}

pub fn transition_density_with(
    dec: &SpectralDecomposition,
    delta: f64,
    k: usize,
    tolerance: f64,
) -> Result<TransitionDensity> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("time step {delta} must be positive")));
    }
    if k >= dec.eigencount() {
        return Err(Error::InvalidParameter(format!(
            "truncation {k} needs {} eigenpairs, have {}",
            k + 1,
            dec.eigencount()
        )));
    }
    let residual = libm::exp(dec.eigenvalues[k] * delta);
    if residual >= tolerance {
        return Err(Error::Truncation { residual, tolerance });
    }
    let n = dec.grid.len();
    let decay: Vec<f64> = dec.eigenvalues[..=k].iter().map(|nu| libm::exp(nu * delta)).collect();
    let mut values = vec![0.0; n * n];
    for x in 0..n {
        let coef: Vec<f64> = (0..=k).map(|m| decay[m] * dec.eigenfunctions[m][x]).collect();
        let row = &mut values[x * n..(x + 1) * n];
        for (y, out) in row.iter_mut().enumerate() {
            let s: f64 = (0..=k).map(|m| coef[m] * dec.eigenfunctions[m][y]).sum();
            *out = dec.mu[y] * s;
        }
    }
    Ok(TransitionDensity {
        grid: dec.grid.clone(),
        h: dec.h,
        delta,
        modes: k,
        residual,
        values,
    })
}

impl TransitionDensity {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Index of the last included mode.
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn row(&self, x: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[x * n..(x + 1) * n]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[x * self.grid.len() + y]
    }

    /// `∫ p_Δ(x_i, y) dy` with the trapezoid weights of the eigenproblem.
    pub fn row_mass(&self, x: usize) -> f64 {
        let w = trapezoid_weights(self.grid.len(), self.h);
        self.row(x).iter().zip(&w).map(|(p, w)| p * w).sum()
    }

    /// `max |μ(x)p(x, y) − μ(y)p(y, x)|`.
    pub fn detailed_balance_residual(&self, mu: &[f64]) -> f64 {
        let n = self.grid.len();
        let mut worst = 0.0f64;
        for x in 0..n {
            for y in 0..x {
                worst = worst.max((mu[x] * self.get(x, y) - mu[y] * self.get(y, x)).abs());
            }
        }
        worst
    }
}
