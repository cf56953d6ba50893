//! Low-frequency observations `X_0, X_Δ, …, X_{NΔ}` of the reflected diffusion.
//!
//! Two samplers are provided. The folding Euler scheme steps
//! `x ← fold(x + b(x)δ + σ(x)√δ Z)` with `δ = Δ / substeps`; the exact
//! sampler draws each observation from the oracle's transition density and
//! carries no time-discretization bias.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::format;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::oracle::{transition_density_with, SpectralDecomposition, TRUNCATION_TOLERANCE};
use crate::stats::InverseCdf;

pub const DEFAULT_SUBSTEPS: usize = 50;
/// Burn-in length for a fixed start, in relaxation times `1/|ν₁|`.
pub const BURN_IN_RELAXATIONS: f64 = 10.0;
/// Largest tolerated deviation of a transition-density row mass from 1.
pub const ROW_MASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Euler,
    Exact,
}

impl SampleMode {
    pub fn name(self) -> &'static str {
        match self {
            SampleMode::Euler => "euler",
            SampleMode::Exact => "exact",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "euler" => Some(SampleMode::Euler),
            "exact" => Some(SampleMode::Exact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    delta: f64,
    values: Vec<f64>,
    spec_id: String,
    seed: u64,
    mode: SampleMode,
}

impl SamplePath {
    pub fn new(
        delta: f64,
        values: Vec<f64>,
        spec_id: impl ToString,
        seed: u64,
        mode: SampleMode,
    ) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("sampling interval {delta} must be positive")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidParameter("a path needs at least two observations".into()));
        }
        if let Some(x) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::OutsideDomain(*x));
        }
        Ok(Self { delta, values, spec_id: spec_id.to_string(), seed, mode })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `N`, the number of transitions; the path holds `N + 1` values.
    pub fn transitions(&self) -> usize {
        self.values.len() - 1
    }

    pub fn spec_id(&self) -> &str {
        &self.spec_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> SampleMode {
        self.mode
    }

    /// Leading prefix with `transitions` transitions.
    pub fn truncated(&self, transitions: usize) -> Result<Self> {
        if transitions == 0 || transitions > self.transitions() {
            return Err(Error::InvalidParameter(format!(
                "cannot cut {} transitions to {transitions}",
                self.transitions()
            )));
        }
        let mut p = self.clone();
        p.values.truncate(transitions + 1);
        Ok(p)
    }
}

/// Triangle-wave folding of `ℝ` onto `[0, 1]` (period 2).
pub fn fold(x: f64) -> f64 {
    let mut r = libm::fmod(x, 2.0);
    if r < 0.0 {
        r += 2.0;
    }
    if r > 1.0 {
        2.0 - r
    } else {
        r
    }
}

/// Starting rule of the Euler scheme.
#[derive(Debug, Clone, Copy)]
pub enum Init<'a> {
    /// Draw `X_0` from the invariant law.
    Stationary(&'a InverseCdf),
    /// Start at `x0` and discard a burn-in of `⌈10/(|ν₁|Δ)⌉` observations.
    Fixed { x0: f64, nu1: f64 },
}

pub fn simulate_euler(
    spec: &DiffusionSpec,
    delta: f64,
    transitions: usize,
    substeps: usize,
    seed: u64,
    init: Init<'_>,
) -> Result<SamplePath> {
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be at least 1".into()));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("sampling interval {delta} must be positive")));
    }
    if transitions == 0 {
        return Err(Error::InvalidParameter("need at least one transition".into()));
    }
    let (inf_sigma, _) = spec.bounds();
    if !(inf_sigma >= spec.class().ellipticity) {
        return Err(Error::Ellipticity {
            x: f64::NAN,
            value: inf_sigma,
            bound: spec.class().ellipticity,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = delta / substeps as f64;
    let root = libm::sqrt(step);
    let advance = |x: f64, rng: &mut ChaCha8Rng| {
        let mut x = x;
        for _ in 0..substeps {
            let z: f64 = rng.sample(StandardNormal);
            x = fold(x + spec.drift(x) * step + spec.sigma(x) * root * z);
        }
        x
    };
    let mut x = match init {
        Init::Stationary(law) => law.quantile(rng.random::<f64>()),
        Init::Fixed { x0, nu1 } => {
            if !(0.0..=1.0).contains(&x0) {
                return Err(Error::OutsideDomain(x0));
            }
            if !(nu1 < 0.0) {
                return Err(Error::InvalidParameter(format!("ν₁ = {nu1} must be negative")));
            }
            let burn = libm::ceil(BURN_IN_RELAXATIONS / (nu1.abs() * delta)) as usize;
            let mut x = x0;
            for _ in 0..burn {
                x = advance(x, &mut rng);
            }
            x
        }
    };
    let mut values = Vec::with_capacity(transitions + 1);
    values.push(x);
    for _ in 0..transitions {
        x = advance(x, &mut rng);
        values.push(x);
    }
    SamplePath::new(delta, values, spec.id(), seed, SampleMode::Euler)
}

/// Markov chain driven by the tabulated transition density.
///
/// From a state between grid rows `i` and `i + 1` the next state is drawn
/// from the linear interpolation of the two rows, realized as a two-row
/// mixture; each row is sampled by inverse CDF.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    delta: f64,
    spec_id: String,
    stationary: InverseCdf,
    rows: Vec<InverseCdf>,
}

impl ExactSampler {
    pub fn new(dec: &SpectralDecomposition, delta: f64, spec_id: impl ToString) -> Result<Self> {
        Self::with_tolerance(dec, delta, spec_id, TRUNCATION_TOLERANCE)
    }

    pub fn with_tolerance(
        dec: &SpectralDecomposition,
        delta: f64,
        spec_id: impl ToString,
        tolerance: f64,
    ) -> Result<Self> {
        let k = dec.truncation_level(delta, tolerance)?;
        let p = transition_density_with(dec, delta, k, tolerance)?;
        let mut rows = Vec::with_capacity(dec.grid().len());
        for x in 0..dec.grid().len() {
            let dev = (p.row_mass(x) - 1.0).abs();
            if dev > ROW_MASS_TOLERANCE {
                return Err(Error::Truncation { residual: dev, tolerance: ROW_MASS_TOLERANCE });
            }
            rows.push(InverseCdf::new(dec.grid(), p.row(x)).ok_or_else(|| {
                Error::EigenSolver(format!("transition row {x} carries no mass"))
            })?);
        }
        Ok(Self { delta, spec_id: spec_id.to_string(), stationary: dec.invariant_sampler(), rows })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn step<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let n = self.rows.len() - 1;
        let t = x.clamp(0.0, 1.0) * n as f64;
        let i = (libm::floor(t) as usize).min(n - 1);
        let theta = t - i as f64;
        let row = if rng.random::<f64>() < theta { i + 1 } else { i };
        self.rows[row].quantile(rng.random::<f64>())
    }

    pub fn sample_path(&self, transitions: usize, seed: u64) -> Result<SamplePath> {
        if transitions == 0 {
            return Err(Error::InvalidParameter("need at least one transition".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = self.stationary.quantile(rng.random::<f64>());
        let mut values = Vec::with_capacity(transitions + 1);
        values.push(x);
        for _ in 0..transitions {
            x = self.step(x, &mut rng);
            values.push(x);
        }
        SamplePath::new(self.delta, values, &self.spec_id, seed, SampleMode::Exact)
    }
}

/// One-shot exact simulation; build an [`ExactSampler`] to reuse the tables.
pub fn simulate_exact(
    spec: &DiffusionSpec,
    delta: f64,
    transitions: usize,
    seed: u64,
    dec: &SpectralDecomposition,
) -> Result<SamplePath> {
    ExactSampler::new(dec, delta, spec.id())?.sample_path(transitions, seed)
}
