//! On-disk formats. All floats are written with Rust's shortest round-trip
//! formatting, so reading a file back reproduces the values bit for bit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sdiff_core::{Basis, EstimateResult, SampleMode, SamplePath, SpectralDecomposition, TransitionDensity};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Exponents, Fits, RateStudyResult, RunRecord, SizeSummary};

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create(path)?.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

fn join_row(row: &[f64]) -> String {
    let cells: Vec<String> = row.iter().map(f64::to_string).collect();
    cells.join(",")
}

/// Header line of a path file.
pub fn path_header(path: &SamplePath) -> String {
    format!(
        "# delta={} spec={} seed={} mode={}",
        path.delta(),
        path.spec_id(),
        path.seed(),
        path.mode().name()
    )
}

pub fn write_path(file: &Path, path: &SamplePath) -> Result<()> {
    let mut text = path_header(path);
    text.push('\n');
    for v in path.values() {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    write_text(file, &text)
}

pub fn parse_path(file: &Path, text: &str) -> Result<SamplePath> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err(file, "empty file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| format_err(file, "missing '# delta=… spec=… seed=… mode=…' header"))?;
    let (mut delta, mut spec, mut seed, mut mode) = (None, None, None, None);
    for field in header.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format_err(file, format!("bad header field '{field}'")))?;
        match key {
            "delta" => delta = value.parse::<f64>().ok(),
            "spec" => spec = Some(value.to_string()),
            "seed" => seed = value.parse::<u64>().ok(),
            "mode" => mode = SampleMode::from_name(value),
            _ => {}
        }
    }
    let delta = delta.ok_or_else(|| format_err(file, "header lacks a valid delta"))?;
    let values = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| format_err(file, format!("line {}: '{}' is not a number", i + 2, l.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SamplePath::new(
        delta,
        values,
        spec.unwrap_or_else(|| "unknown".into()),
        seed.unwrap_or(0),
        mode.unwrap_or(SampleMode::Exact),
    )?)
}

pub fn read_path(file: &Path) -> Result<SamplePath> {
    let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    parse_path(file, &text)
}

/// Oracle grid table: `x, mu, S, u1, du1`.
pub fn write_oracle_grid(file: &Path, dec: &SpectralDecomposition) -> Result<()> {
    let (u1, du1) = if dec.eigencount() > 1 {
        (dec.eigenfunction(1).to_vec(), dec.derivative(1))
    } else {
        (vec![f64::NAN; dec.grid().len()], vec![f64::NAN; dec.grid().len()])
    };
    let mut text = String::from("x,mu,S,u1,du1\n");
    for i in 0..dec.grid().len() {
        text.push_str(&join_row(&[dec.grid()[i], dec.mu()[i], dec.scale()[i], u1[i], du1[i]]));
        text.push('\n');
    }
    write_text(file, &text)
}

/// Eigenvalue table: `k, nu, kappa` with `kappa = exp(ν_k Δ)`.
pub fn write_nu_table(file: &Path, dec: &SpectralDecomposition, delta: f64) -> Result<()> {
    let mut text = String::from("k,nu,kappa\n");
    for (k, nu) in dec.eigenvalues().iter().enumerate() {
        text.push_str(&format!("{k},{nu},{}\n", (nu * delta).exp()));
    }
    write_text(file, &text)
}

/// Dense `p_Δ(x_i, y_j)`: a header of grid points, then one row per `x_i`.
pub fn write_transition_matrix(file: &Path, p: &TransitionDensity) -> Result<()> {
    let mut text = format!("x\\y,{}\n", join_row(p.grid()));
    for (i, x) in p.grid().iter().enumerate() {
        text.push_str(&format!("{x},{}\n", join_row(p.row(i))));
    }
    write_text(file, &text)
}

/// Basis functions sampled on a uniform grid: `x, psi_0, …`.
pub fn write_basis_dump(file: &Path, basis: &Basis, points: usize) -> Result<()> {
    let rows = basis.tabulate(points, 0)?;
    let names: Vec<String> = (0..basis.dim()).map(|i| format!("psi_{i}")).collect();
    let mut text = format!("x,{}\n", names.join(","));
    for row in rows {
        text.push_str(&join_row(&row));
        text.push('\n');
    }
    write_text(file, &text)
}

/// JSON body of the `estimate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub kappa1: Option<f64>,
    pub nu1: Option<f64>,
    pub degenerate: bool,
    pub reason: Option<String>,
    #[serde(rename = "J")]
    pub level: u32,
    pub clip_count: usize,
    pub u1_coeffs: Vec<f64>,
    pub grid: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub b: Vec<f64>,
}

impl From<&EstimateResult> for EstimateOutput {
    fn from(r: &EstimateResult) -> Self {
        Self {
            kappa1: r.kappa1,
            nu1: r.nu1,
            degenerate: r.is_degenerate(),
            reason: r.degenerate.as_ref().map(|d| d.describe()),
            level: r.level,
            clip_count: r.clip_count,
            u1_coeffs: r.u1_coeffs.clone(),
            grid: r.grid.clone(),
            sigma2: r.sigma2.clone(),
            b: r.drift.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(file: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(file, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(file: &Path) -> Result<T> {
    let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    serde_json::from_str(&text).map_err(|e| format_err(file, e.to_string()))
}

pub fn write_records(file: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(file)?);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(file, e))
}

pub fn read_records(file: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(file)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<RunRecord>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub spec: String,
    pub delta: f64,
    pub s: f64,
    pub mode: String,
    pub replicates: usize,
    pub base_seed: u64,
    pub interval: [f64; 2],
    pub exponents: Exponents,
    pub sizes: Vec<SizeSummary>,
    pub degenerate_fraction: f64,
    pub fit: Option<Fits>,
    pub reason: Option<String>,
}

impl Summary {
    pub fn new(result: &RateStudyResult, spec_id: &str) -> Self {
        let cfg = &result.config;
        let degenerate = result.records.iter().filter(|r| r.degenerate).count();
        Self {
            spec: spec_id.to_string(),
            delta: cfg.delta,
            s: cfg.s,
            mode: cfg.mode.clone(),
            replicates: cfg.replicates,
            base_seed: cfg.base_seed,
            interval: cfg.interval,
            exponents: result.exponents,
            sizes: result.sizes.clone(),
            degenerate_fraction: degenerate as f64 / result.records.len().max(1) as f64,
            fit: result.fit,
            reason: result.fit_reason.clone(),
        }
    }
}

/// Whitespace-separated columns for gnuplot's `set logscale xy`.
pub fn loglog_table(sizes: &[SizeSummary]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |v| v.to_string());
    let mut text = String::from("# N median_err_sigma2 median_err_b median_err_mu degenerate_fraction\n");
    for s in sizes {
        text.push_str(&format!(
            "{} {} {} {} {}\n",
            s.n,
            cell(s.median_sigma2),
            cell(s.median_b),
            s.median_mu,
            s.degenerate_fraction
        ));
    }
    text
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub loglog: PathBuf,
}

/// Writes `records.csv`, `summary.json` and `loglog.dat` into `dir`.
pub fn emit_report(result: &RateStudyResult, spec_id: &str, dir: &Path) -> Result<ReportFiles> {
    let files = ReportFiles {
        records: dir.join("records.csv"),
        summary: dir.join("summary.json"),
        loglog: dir.join("loglog.dat"),
    };
    write_records(&files.records, &result.records)?;
    write_json(&files.summary, &Summary::new(result, spec_id))?;
    write_text(&files.loglog, &loglog_table(&result.sizes))?;
    Ok(files)
}
