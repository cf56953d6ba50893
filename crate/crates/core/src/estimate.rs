//! Spectral estimation of `σ²` and `b` from a sample path.
//!
//! With `ψ` an orthonormal basis of `V_J`:
//!
//! - `μ̂_λ = (N+1)⁻¹ Σ_{n=0}^{N} ψ_λ(X_n)`,
//! - `P̂_{λλ'} = (2N)⁻¹ Σ_{n=1}^{N} [ψ_λ(X_{n−1})ψ_{λ'}(X_n) + ψ_{λ'}(X_{n−1})ψ_λ(X_n)]`,
//! - `Ĝ_{λλ'} = N⁻¹ Σ_n w_n ψ_λ(X_n)ψ_{λ'}(X_n)` with `w_0 = w_N = ½`, else 1.
//!
//! The weights make `Ĝ1 = P̂1` for the constant function, so the pencil
//! `P̂ v = κ Ĝ v` has top eigenpair `(1, 1)`; by Cauchy–Schwarz no eigenvalue
//! exceeds 1. The second eigenpair `(κ̂₁, û₁)` is plugged into
//!
//! `σ̂² = 2Δ⁻¹ log κ̂₁ ∫_0^x û₁μ̂ / (û₁′μ̂)` and
//! `b̂ = Δ⁻¹ log κ̂₁ (û₁û₁′μ̂ − û₁″ ∫_0^x û₁μ̂) / (û₁′²μ̂)`,
//!
//! with both denominators held away from zero by relative clipping.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{Basis, ProductPrimitive};
use crate::error::{Error, Result};
use crate::linalg::{dot, generalized_symmetric_eigen, norm, Matrix, PencilEigen};
use crate::simulate::SamplePath;

/// Relative pivot floor of the positive-definiteness test for `Ĝ`.
pub const GRAM_PIVOT_TOLERANCE: f64 = 1e-12;
/// A top eigenvalue further than this from 1 marks the estimate degenerate.
pub const IDENTITY_TOLERANCE: f64 = 1e-6;
/// Relative gap below which the second and third eigenvalues count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_CLIP: f64 = 0.05;
pub const DEFAULT_INTERVAL: (f64, f64) = (0.1, 0.9);
pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_ORDER: usize = 4;

/// Why an estimate carries no usable `σ̂²`, `b̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degeneracy {
    GramNotPositiveDefinite,
    /// The top eigenvalue strayed from 1 beyond [`IDENTITY_TOLERANCE`].
    IdentityViolated(f64),
    KappaOutOfRange(f64),
    TiedEigenvalues,
    /// The clipping reference `max |D|` over `[a, b]` is zero.
    VanishingDenominator,
    NonPositiveSigma2,
}

impl Degeneracy {
    pub fn describe(&self) -> alloc::string::String {
        match self {
            Degeneracy::GramNotPositiveDefinite => "Gram matrix is not positive definite".into(),
            Degeneracy::IdentityViolated(t) => format!("top eigenvalue {t} differs from 1"),
            Degeneracy::KappaOutOfRange(k) => format!("second eigenvalue {k} outside (0, 1)"),
            Degeneracy::TiedEigenvalues => "second eigenvalue is not simple".into(),
            Degeneracy::VanishingDenominator => "plug-in denominator vanishes on [a, b]".into(),
            Degeneracy::NonPositiveSigma2 => "diffusion estimate is not positive".into(),
        }
    }
}

fn check_length(values: &[f64], basis: &Basis) -> Result<usize> {
    let transitions = values.len().saturating_sub(1);
    if transitions < basis.dim() {
        return Err(Error::PathTooShort { len: transitions, dim: basis.dim() });
    }
    Ok(transitions)
}

/// Projection estimate of the invariant density.
pub fn estimate_mu(values: &[f64], basis: &Basis) -> Result<Vec<f64>> {
    check_length(values, basis)?;
    let dim = basis.dim();
    let mut acc = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    for &x in values {
        basis.eval_all(x, 0, &mut buf)?;
        acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
    }
    let scale = 1.0 / values.len() as f64;
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct EmpiricalOperators {
    pub gram: Matrix,
    pub transition: Matrix,
    pub mu_coeffs: Vec<f64>,
    pub transitions: usize,
}

pub fn build_operators(values: &[f64], basis: &Basis) -> Result<EmpiricalOperators> {
    let n = check_length(values, basis)?;
    let dim = basis.dim();
    let mut gram = Matrix::zeros(dim);
    let mut transition = Matrix::zeros(dim);
    let mut mu = vec![0.0; dim];
    let mut prev = vec![0.0; dim];
    let mut cur = vec![0.0; dim];
    for (t, &x) in values.iter().enumerate() {
        basis.eval_all(x, 0, &mut cur)?;
        let w = if t == 0 || t == n { 0.5 } else { 1.0 };
        for i in 0..dim {
            mu[i] += cur[i];
            if cur[i] == 0.0 && (t == 0 || prev[i] == 0.0) {
                continue;
            }
            for j in i..dim {
                gram[(i, j)] += w * cur[i] * cur[j];
                if t > 0 {
                    transition[(i, j)] += prev[i] * cur[j] + prev[j] * cur[i];
                }
            }
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    let gs = 1.0 / n as f64;
    let ps = 0.5 / n as f64;
    for i in 0..dim {
        for j in i..dim {
            let g = gram[(i, j)] * gs;
            let p = transition[(i, j)] * ps;
            gram[(i, j)] = g;
            gram[(j, i)] = g;
            transition[(i, j)] = p;
            transition[(j, i)] = p;
        }
    }
    let ms = 1.0 / values.len() as f64;
    mu.iter_mut().for_each(|m| *m *= ms);
    Ok(EmpiricalOperators { gram, transition, mu_coeffs: mu, transitions: n })
}

/// Leading eigenpairs of the `(P̂, Ĝ)` pencil.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub kappa1: f64,
    /// Unit `L²` norm, oriented so that `û₁(1) > û₁(0)`.
    pub u1_coeffs: Vec<f64>,
    pub top: f64,
    pub top_vector: Vec<f64>,
    /// All eigenvalues, descending.
    pub spectrum: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum EigenOutcome {
    Solved(Eigenpair),
    Degenerate(Degeneracy),
}

pub fn solve_eigenpair(ops: &EmpiricalOperators, basis: &Basis) -> Result<EigenOutcome> {
    let eig = match generalized_symmetric_eigen(&ops.transition, &ops.gram, GRAM_PIVOT_TOLERANCE)? {
        PencilEigen::NotPositiveDefinite => {
            return Ok(EigenOutcome::Degenerate(Degeneracy::GramNotPositiveDefinite))
        }
        PencilEigen::Solved(e) => e,
    };
    if eig.values.len() < 2 {
        return Ok(EigenOutcome::Degenerate(Degeneracy::TiedEigenvalues));
    }
    let top = eig.values[0];
    if !((top - 1.0).abs() <= IDENTITY_TOLERANCE) {
        return Ok(EigenOutcome::Degenerate(Degeneracy::IdentityViolated(top)));
    }
    let kappa1 = eig.values[1];
    if eig.values.len() > 2 && (kappa1 - eig.values[2]).abs() <= TIE_TOLERANCE * kappa1.abs() {
        return Ok(EigenOutcome::Degenerate(Degeneracy::TiedEigenvalues));
    }
    if !(kappa1 > 0.0 && kappa1 < 1.0) {
        return Ok(EigenOutcome::Degenerate(Degeneracy::KappaOutOfRange(kappa1)));
    }
    let mut u1 = eig.vectors[1].clone();
    let nrm = norm(&u1);
    u1.iter_mut().for_each(|v| *v /= nrm);
    let e = basis.expansion(&u1);
    if e.eval(1.0, 0) < e.eval(0.0, 0) {
        u1.iter_mut().for_each(|v| *v = -*v);
    }
    let mut top_vector = eig.vectors[0].clone();
    let nrm = norm(&top_vector);
    let sign = if dot(&top_vector, &basis.constant_coeffs()) < 0.0 { -1.0 } else { 1.0 };
    top_vector.iter_mut().for_each(|v| *v *= sign / nrm);
    Ok(EigenOutcome::Solved(Eigenpair {
        kappa1,
        u1_coeffs: u1,
        top,
        top_vector,
        spectrum: eig.values,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlugInConfig {
    pub interval: (f64, f64),
    pub grid_points: usize,
    /// Denominators are held above `clip · max_{[a,b]} |D|` in magnitude.
    pub clip: f64,
}

impl Default for PlugInConfig {
    fn default() -> Self {
        Self { interval: DEFAULT_INTERVAL, grid_points: DEFAULT_GRID, clip: DEFAULT_CLIP }
    }
}

impl PlugInConfig {
    fn validate(&self) -> Result<()> {
        let (a, b) = self.interval;
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(Error::InvalidParameter(format!("[{a}, {b}] must lie inside (0, 1)")));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::InvalidParameter(format!("clip {} must lie in (0, 1)", self.clip)));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidParameter("evaluation grid needs two points".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let (a, b) = self.interval;
        let m = self.grid_points - 1;
        (0..=m).map(|i| a + (b - a) * i as f64 / m as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlugIn {
    pub grid: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub drift: Vec<f64>,
    pub clip_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlugInOutcome {
    Estimated(PlugIn),
    Degenerate(Degeneracy),
}

/// Holds `|d| ≥ floor`, keeping the sign (zero counts as positive).
fn clip(d: f64, floor: f64) -> (f64, bool) {
    if d.abs() >= floor {
        (d, false)
    } else if d < 0.0 {
        (-floor, true)
    } else {
        (floor, true)
    }
}

pub fn plug_in(
    kappa1: f64,
    u1_coeffs: &[f64],
    mu_coeffs: &[f64],
    basis: &Basis,
    delta: f64,
    cfg: &PlugInConfig,
) -> Result<PlugInOutcome> {
    cfg.validate()?;
    if !(kappa1 > 0.0 && kappa1 < 1.0) {
        return Err(Error::InvalidParameter(format!("κ̂₁ = {kappa1} must lie in (0, 1)")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("Δ = {delta} must be positive")));
    }
    let u = basis.expansion(u1_coeffs);
    let mu = basis.expansion(mu_coeffs);
    let primitive = ProductPrimitive::new(u.clone(), mu.clone());
    let grid = cfg.grid();
    let rate = libm::log(kappa1) / delta;

    struct Point {
        u: f64,
        du: f64,
        d2u: f64,
        mu: f64,
        prim: f64,
    }
    let pts: Vec<Point> = grid
        .iter()
        .map(|&x| Point {
            u: u.eval(x, 0),
            du: u.eval(x, 1),
            d2u: u.eval(x, 2),
            mu: mu.eval(x, 0),
            prim: primitive.at(x),
        })
        .collect();
    let max_sigma = pts.iter().fold(0.0f64, |a, p| a.max((p.du * p.mu).abs()));
    let max_drift = pts.iter().fold(0.0f64, |a, p| a.max((p.du * p.du * p.mu).abs()));
    if !(max_sigma > 0.0 && max_sigma.is_finite() && max_drift > 0.0 && max_drift.is_finite()) {
        return Ok(PlugInOutcome::Degenerate(Degeneracy::VanishingDenominator));
    }
    let mut clip_count = 0;
    let mut sigma2 = Vec::with_capacity(pts.len());
    let mut drift = Vec::with_capacity(pts.len());
    for p in &pts {
        let (ds, cs) = clip(p.du * p.mu, cfg.clip * max_sigma);
        let (db, cb) = clip(p.du * p.du * p.mu, cfg.clip * max_drift);
        if cs || cb {
            clip_count += 1;
        }
        sigma2.push(2.0 * rate * p.prim / ds);
        drift.push(rate * (p.u * p.du * p.mu - p.d2u * p.prim) / db);
    }
    Ok(PlugInOutcome::Estimated(PlugIn { grid, sigma2, drift, clip_count }))
}

/// Which bandwidth rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelTarget {
    /// `2^J ∼ N^{1/(2s+1)}`, for the invariant density.
    Density,
    /// `2^J ∼ N^{1/(2s+3)}`, for `σ²` and `b`.
    Coefficients,
}

/// Resolution level from the bandwidth rule, clamped so that
/// `dim ≤ N/10` and `J ≥ 1` (the latter wins).
pub fn choose_level(transitions: usize, s: f64, target: LevelTarget, order: usize) -> Result<u32> {
    if transitions < 16 {
        return Err(Error::InvalidParameter(format!("N = {transitions} is below 16")));
    }
    if !(s > 1.0) {
        return Err(Error::InvalidParameter(format!("smoothness {s} must exceed 1")));
    }
    let denom = match target {
        LevelTarget::Density => 2.0 * s + 1.0,
        LevelTarget::Coefficients => 2.0 * s + 3.0,
    };
    let raw = libm::round(libm::log2(transitions as f64) / denom).max(0.0) as u32;
    let cap = transitions as f64 / 10.0;
    let mut level = raw;
    while level > 0 && ((1u64 << level) as f64 + order as f64 - 1.0) > cap {
        level -= 1;
    }
    Ok(level.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    /// Overrides the bandwidth rule when set.
    pub level: Option<u32>,
    pub s: f64,
    pub order: usize,
    pub plug_in: PlugInConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self { level: None, s: 2.0, order: DEFAULT_ORDER, plug_in: PlugInConfig::default() }
    }
}

impl EstimateConfig {
    pub fn resolve_level(&self, transitions: usize) -> Result<u32> {
        match self.level {
            Some(j) => Ok(j),
            None => choose_level(transitions, self.s, LevelTarget::Coefficients, self.order),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub level: u32,
    pub delta: f64,
    pub kappa1: Option<f64>,
    pub nu1: Option<f64>,
    pub u1_coeffs: Vec<f64>,
    pub mu_coeffs: Vec<f64>,
    pub grid: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub drift: Vec<f64>,
    pub clip_count: usize,
    pub degenerate: Option<Degeneracy>,
}

impl EstimateResult {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate.is_some()
    }

    fn degenerate(level: u32, delta: f64, mu_coeffs: Vec<f64>, why: Degeneracy) -> Self {
        Self {
            level,
            delta,
            kappa1: None,
            nu1: None,
            u1_coeffs: Vec::new(),
            mu_coeffs,
            grid: Vec::new(),
            sigma2: Vec::new(),
            drift: Vec::new(),
            clip_count: 0,
            degenerate: Some(why),
        }
    }
}

/// Full pipeline on an existing basis.
pub fn estimate_with_basis(
    path: &SamplePath,
    basis: &Basis,
    cfg: &PlugInConfig,
) -> Result<EstimateResult> {
    cfg.validate()?;
    let delta = path.delta();
    let level = basis.level();
    let ops = build_operators(path.values(), basis)?;
    let pair = match solve_eigenpair(&ops, basis)? {
        EigenOutcome::Solved(p) => p,
        EigenOutcome::Degenerate(why) => {
            return Ok(EstimateResult::degenerate(level, delta, ops.mu_coeffs, why))
        }
    };
    let est = match plug_in(pair.kappa1, &pair.u1_coeffs, &ops.mu_coeffs, basis, delta, cfg)? {
        PlugInOutcome::Estimated(e) => e,
        PlugInOutcome::Degenerate(why) => {
            return Ok(EstimateResult::degenerate(level, delta, ops.mu_coeffs, why))
        }
    };
    if est.sigma2.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Ok(EstimateResult::degenerate(level, delta, ops.mu_coeffs, Degeneracy::NonPositiveSigma2));
    }
    Ok(EstimateResult {
        level,
        delta,
        kappa1: Some(pair.kappa1),
        nu1: Some(libm::log(pair.kappa1) / delta),
        u1_coeffs: pair.u1_coeffs,
        mu_coeffs: ops.mu_coeffs,
        grid: est.grid,
        sigma2: est.sigma2,
        drift: est.drift,
        clip_count: est.clip_count,
        degenerate: None,
    })
}

/// Full pipeline, choosing `J` by the coefficient bandwidth rule unless fixed.
pub fn estimate(path: &SamplePath, cfg: &EstimateConfig) -> Result<EstimateResult> {
    let level = cfg.resolve_level(path.transitions())?;
    let basis = Basis::new(level, cfg.order)?;
    estimate_with_basis(path, &basis, &cfg.plug_in)
}
