//! Simulate → estimate → compare experiments and Monte Carlo rate studies.

use std::path::PathBuf;

use rayon::prelude::*;
use sdiff_core::basis::Basis;
use sdiff_core::estimate::{self, choose_level, estimate_mu, EstimateConfig, LevelTarget, PlugInConfig};
use sdiff_core::oracle::{generator_eigs, TRUNCATION_TOLERANCE};
use sdiff_core::quadrature::trapezoid;
use sdiff_core::simulate::{simulate_euler, DEFAULT_SUBSTEPS};
use sdiff_core::stats::{fit_line, mean, median, LineFit};
use sdiff_core::{
    DiffusionSpec, EstimateResult, ExactSampler, Init, SampleMode, SamplePath,
    SpectralDecomposition,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec_file::SpecFile;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SDIFF_OUT_DIR";

fn default_delta() -> f64 {
    0.1
}
fn default_replicates() -> usize {
    20
}
fn default_s() -> f64 {
    2.0
}
fn default_interval() -> [f64; 2] {
    [estimate::DEFAULT_INTERVAL.0, estimate::DEFAULT_INTERVAL.1]
}
fn default_mode() -> String {
    "exact".into()
}
fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}
fn default_clip() -> f64 {
    estimate::DEFAULT_CLIP
}
fn default_grid() -> usize {
    estimate::DEFAULT_GRID
}
fn default_oracle_n() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: SpecFile,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub n_values: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_s")]
    pub s: f64,
    /// Fixed resolution level; the bandwidth rule is used when absent.
    #[serde(default)]
    pub level: Option<u32>,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    /// Intervals of the oracle grid behind the exact sampler and the truth.
    #[serde(default = "default_oracle_n")]
    pub oracle_n: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(spec: SpecFile, n_values: Vec<usize>) -> Self {
        Self {
            spec,
            delta: default_delta(),
            n_values,
            replicates: default_replicates(),
            base_seed: 0,
            s: default_s(),
            level: None,
            interval: default_interval(),
            mode: default_mode(),
            substeps: default_substeps(),
            clip: default_clip(),
            grid_points: default_grid(),
            oracle_n: default_oracle_n(),
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::Config("n_values must not be empty".into()));
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("n_values must be strictly increasing".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.delta.is_nan() || self.delta <= 0.0 || self.delta.is_infinite() {
            return Err(Error::Config(format!("delta {} must be positive", self.delta)));
        }
        self.sample_mode()?;
        Ok(())
    }

    pub fn sample_mode(&self) -> Result<SampleMode> {
        SampleMode::from_name(&self.mode)
            .ok_or_else(|| Error::Config(format!("unknown mode '{}'", self.mode)))
    }

    pub fn estimate_config(&self) -> EstimateConfig {
        EstimateConfig {
            level: self.level,
            s: self.s,
            order: estimate::DEFAULT_ORDER,
            plug_in: PlugInConfig {
                interval: (self.interval[0], self.interval[1]),
                grid_points: self.grid_points,
                clip: self.clip,
            },
        }
    }

    /// Explicit `out_dir`, else `$SDIFF_OUT_DIR`, else the current directory.
    pub fn output_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Known model plus the oracle objects every replicate shares read-only.
#[derive(Debug)]
pub struct Truth {
    pub spec: DiffusionSpec,
    pub dec: SpectralDecomposition,
    pub sampler: Option<ExactSampler>,
}

impl Truth {
    pub fn new(spec: DiffusionSpec, oracle_n: usize, delta: f64, mode: SampleMode) -> Result<Self> {
        let k = (oracle_n / 4).min(64);
        let dec = generator_eigs(&spec, oracle_n, k)?;
        let sampler = match mode {
            SampleMode::Exact => Some(ExactSampler::with_tolerance(
                &dec,
                delta,
                spec.id(),
                TRUNCATION_TOLERANCE,
            )?),
            SampleMode::Euler => None,
        };
        Ok(Self { spec, dec, sampler })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Self::new(cfg.spec.to_spec()?, cfg.oracle_n, cfg.delta, cfg.sample_mode()?)
    }

    pub fn simulate(&self, cfg: &ExperimentConfig, transitions: usize, seed: u64) -> Result<SamplePath> {
        Ok(match &self.sampler {
            Some(s) => s.sample_path(transitions, seed)?,
            None => {
                let law = self.dec.invariant_sampler();
                simulate_euler(
                    &self.spec,
                    cfg.delta,
                    transitions,
                    cfg.substeps,
                    seed,
                    Init::Stationary(&law),
                )?
            }
        })
    }
}

/// One `(N, seed)` outcome. Error fields are absent for degenerate estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub err_sigma2: Option<f64>,
    pub err_b: Option<f64>,
    pub kappa1: Option<f64>,
    pub degenerate: bool,
    #[serde(rename = "J")]
    pub level: u32,
    /// `‖μ̂ − μ‖_{L²[0,1]}` at the density bandwidth.
    pub err_mu: f64,
    /// `∫ μ̂ − 1`.
    pub mu_mass_error: f64,
}

/// `(∫_a^b (f − g)²)^{1/2}` by trapezoid on the evaluation grid.
pub fn l2_error(x: &[f64], estimate: &[f64], truth: &[f64]) -> f64 {
    let sq: Vec<f64> = estimate.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).collect();
    trapezoid(x, &sq).sqrt()
}

/// Errors of an estimate against the known coefficients.
pub fn coefficient_errors(spec: &DiffusionSpec, est: &EstimateResult) -> Option<(f64, f64)> {
    if est.is_degenerate() {
        return None;
    }
    let s2: Vec<f64> = est.grid.iter().map(|&x| spec.sigma2(x)).collect();
    let b: Vec<f64> = est.grid.iter().map(|&x| spec.drift(x)).collect();
    Some((l2_error(&est.grid, &est.sigma2, &s2), l2_error(&est.grid, &est.drift, &b)))
}

/// `(‖μ̂ − μ‖_{L²}, ∫μ̂ − 1)` with `J` from the density bandwidth rule.
pub fn density_error(truth: &Truth, path: &SamplePath, s: f64) -> Result<(f64, f64)> {
    let level = choose_level(path.transitions(), s, LevelTarget::Density, estimate::DEFAULT_ORDER)?;
    let basis = Basis::new(level, estimate::DEFAULT_ORDER)?;
    let coeffs = estimate_mu(path.values(), &basis)?;
    let mass: f64 = coeffs.iter().zip(basis.constant_coeffs()).map(|(a, b)| a * b).sum();
    let e = basis.expansion(&coeffs);
    let grid = truth.dec.grid();
    let sq: Vec<f64> = grid
        .iter()
        .zip(truth.dec.mu())
        .map(|(&x, m)| (e.eval(x, 0) - m).powi(2))
        .collect();
    Ok((trapezoid(grid, &sq).sqrt(), mass - 1.0))
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `rep` at sample size `n`; distinct inputs give
/// unrelated ChaCha keys.
pub fn replicate_seed(base: u64, n: usize, rep: usize) -> u64 {
    mix(mix(base) ^ mix(n as u64).rotate_left(17) ^ (rep as u64))
}

pub fn run_single(truth: &Truth, cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<RunRecord> {
    let path = truth.simulate(cfg, n, seed)?;
    let est = sdiff_core::estimate::estimate(&path, &cfg.estimate_config())?;
    let (err_mu, mu_mass_error) = density_error(truth, &path, cfg.s)?;
    let errs = coefficient_errors(&truth.spec, &est);
    Ok(RunRecord {
        n,
        seed,
        err_sigma2: errs.map(|e| e.0),
        err_b: errs.map(|e| e.1),
        kappa1: est.kappa1,
        degenerate: est.is_degenerate(),
        level: est.level,
        err_mu,
        mu_mass_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    /// `−s/(2s+3)`.
    pub sigma2: f64,
    /// `−(s−1)/(2s+3)`.
    pub drift: f64,
    /// `−s/(2s+1)`.
    pub mu: f64,
}

impl Exponents {
    pub fn for_smoothness(s: f64) -> Self {
        Self {
            sigma2: -s / (2.0 * s + 3.0),
            drift: -(s - 1.0) / (2.0 * s + 3.0),
            mu: -s / (2.0 * s + 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub replicates: usize,
    pub degenerate: usize,
    pub degenerate_fraction: f64,
    pub median_sigma2: Option<f64>,
    pub mean_sigma2: Option<f64>,
    pub median_b: Option<f64>,
    pub mean_b: Option<f64>,
    pub median_mu: f64,
    pub median_kappa1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
}

impl From<LineFit> for SlopeFit {
    fn from(f: LineFit) -> Self {
        Self { slope: f.slope, slope_se: f.slope_se, intercept: f.intercept }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fits {
    pub sigma2: SlopeFit,
    pub drift: Option<SlopeFit>,
    pub mu: Option<SlopeFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudyResult {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub sizes: Vec<SizeSummary>,
    pub exponents: Exponents,
    pub fit: Option<Fits>,
    pub fit_reason: Option<String>,
}

fn option_stat(v: &[f64], f: impl Fn(&[f64]) -> f64) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(f(v))
    }
}

pub fn summarize(n: usize, records: &[&RunRecord]) -> SizeSummary {
    let sig: Vec<f64> = records.iter().filter_map(|r| r.err_sigma2).collect();
    let b: Vec<f64> = records.iter().filter_map(|r| r.err_b).collect();
    let mu: Vec<f64> = records.iter().map(|r| r.err_mu).collect();
    let kap: Vec<f64> = records.iter().filter_map(|r| r.kappa1).collect();
    let degenerate = records.iter().filter(|r| r.degenerate).count();
    SizeSummary {
        n,
        replicates: records.len(),
        degenerate,
        degenerate_fraction: degenerate as f64 / records.len().max(1) as f64,
        median_sigma2: median(&sig),
        mean_sigma2: option_stat(&sig, mean),
        median_b: median(&b),
        mean_b: option_stat(&b, mean),
        median_mu: median(&mu).unwrap_or(f64::NAN),
        median_kappa1: median(&kap),
    }
}

fn log_fit(points: impl Iterator<Item = (usize, Option<f64>)>) -> Option<LineFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .filter_map(|(n, v)| v.filter(|v| *v > 0.0).map(|v| ((n as f64).ln(), v.ln())))
        .unzip();
    fit_line(&x, &y)
}

/// Slope fits of log median error against log N.
pub fn fit_rates(sizes: &[SizeSummary]) -> (Option<Fits>, Option<String>) {
    let sigma = log_fit(sizes.iter().map(|s| (s.n, s.median_sigma2)));
    let Some(sigma) = sigma else {
        let available = sizes.iter().filter(|s| s.median_sigma2.is_some()).count();
        return (
            None,
            Some(format!("{available} sample sizes with nondegenerate estimates; need at least 2")),
        );
    };
    let drift = log_fit(sizes.iter().map(|s| (s.n, s.median_b)));
    let mu = log_fit(sizes.iter().map(|s| (s.n, Some(s.median_mu))));
    (
        Some(Fits { sigma2: sigma.into(), drift: drift.map(Into::into), mu: mu.map(Into::into) }),
        None,
    )
}

/// Minimum study shape: three sample sizes, ten replicates.
pub const MIN_SIZES: usize = 3;
pub const MIN_REPLICATES: usize = 10;

pub fn rate_study(cfg: &ExperimentConfig) -> Result<RateStudyResult> {
    cfg.validate()?;
    if cfg.n_values.len() < MIN_SIZES || cfg.replicates < MIN_REPLICATES {
        return Err(Error::Config(format!(
            "a rate study needs at least {MIN_SIZES} sample sizes and {MIN_REPLICATES} replicates"
        )));
    }
    let truth = Truth::from_config(cfg)?;
    rate_study_with(&truth, cfg)
}

/// Runs the study against prepared oracle objects.
pub fn rate_study_with(truth: &Truth, cfg: &ExperimentConfig) -> Result<RateStudyResult> {
    let tasks: Vec<(usize, usize)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let records = tasks
        .par_iter()
        .map(|&(n, rep)| run_single(truth, cfg, n, replicate_seed(cfg.base_seed, n, rep)))
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<SizeSummary> = cfg
        .n_values
        .iter()
        .map(|&n| {
            let group: Vec<&RunRecord> = records.iter().filter(|r| r.n == n).collect();
            summarize(n, &group)
        })
        .collect();
    let (fit, fit_reason) = fit_rates(&sizes);
    Ok(RateStudyResult {
        config: cfg.clone(),
        records,
        sizes,
        exponents: Exponents::for_smoothness(cfg.s),
        fit,
        fit_reason,
    })
}
