use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdiff::error::{Error, Result};
use sdiff::formats::{self, EstimateOutput};
use sdiff::harness::{self, ExperimentConfig};
use sdiff::spec_file::{resolve_spec, SpecFile};
use sdiff_core::estimate::{self, EstimateConfig, PlugInConfig};
use sdiff_core::oracle::{generator_eigs, transition_density, TRUNCATION_TOLERANCE};
use sdiff_core::simulate::{simulate_euler, DEFAULT_SUBSTEPS};
use sdiff_core::{Basis, ExactSampler, Init, SampleMode};

#[derive(Parser)]
#[command(name = "sdiff", version, about = "Spectral estimation for reflected diffusions on [0, 1]")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a discretely observed path.
    Simulate(SimulateArgs),
    /// Tabulate the invariant density, eigenpairs and transition density.
    Oracle(OracleArgs),
    /// Estimate σ² and b from an observed path.
    Estimate(EstimateArgs),
    /// Monte Carlo convergence-rate study.
    RateStudy(RateStudyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Preset name or JSON spec file.
    #[arg(long, default_value = "unit")]
    spec: String,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Number of transitions N; the file holds N + 1 observations.
    #[arg(long)]
    n_obs: usize,
    #[arg(long, default_value_t = DEFAULT_SUBSTEPS)]
    substeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// euler or exact.
    #[arg(long, default_value = "exact")]
    mode: String,
    /// Oracle grid intervals used by the exact sampler.
    #[arg(long, default_value_t = 1024)]
    oracle_n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value = "unit")]
    spec: String,
    /// Grid intervals.
    #[arg(long, default_value_t = 1024)]
    n: usize,
    /// Highest mode kept in p_Δ; chosen by the truncation rule when absent.
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Grid table: x, mu, S, u1, du1.
    #[arg(long)]
    out: PathBuf,
    /// Eigenvalue table: k, nu, kappa.
    #[arg(long)]
    nu_out: Option<PathBuf>,
    /// Dense transition density matrix.
    #[arg(long)]
    p_out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Path file written by `simulate`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    s: f64,
    /// Resolution level; overrides the bandwidth rule.
    #[arg(long = "J")]
    level: Option<u32>,
    #[arg(long, value_parser = parse_interval, default_value = "0.1,0.9")]
    interval: (f64, f64),
    #[arg(long, default_value_t = estimate::DEFAULT_CLIP)]
    clip: f64,
    #[arg(long, default_value_t = estimate::DEFAULT_GRID)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write the basis functions on a 1025-point grid as CSV.
    #[arg(long)]
    dump_basis: Option<PathBuf>,
}

#[derive(Args)]
struct RateStudyArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    spec: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated increasing sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long = "J")]
    level: Option<u32>,
    #[arg(long, value_parser = parse_interval)]
    interval: Option<(f64, f64)>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    substeps: Option<usize>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    oracle_n: Option<usize>,
    /// Output directory; defaults to $SDIFF_OUT_DIR, then the current directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected a,b")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
    Ok((a, b))
}

fn parse_mode(name: &str) -> Result<SampleMode> {
    SampleMode::from_name(name).ok_or_else(|| Error::Config(format!("unknown mode '{name}'")))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = resolve_spec(&args.spec)?;
    let dec = generator_eigs(&spec, args.oracle_n, (args.oracle_n / 4).min(64))?;
    let path = match parse_mode(&args.mode)? {
        SampleMode::Exact => ExactSampler::new(&dec, args.delta, spec.id())?.sample_path(args.n_obs, args.seed)?,
        SampleMode::Euler => {
            let law = dec.invariant_sampler();
            simulate_euler(&spec, args.delta, args.n_obs, args.substeps, args.seed, Init::Stationary(&law))?
        }
    };
    formats::write_path(&args.out, &path)
}

fn oracle(args: OracleArgs) -> Result<()> {
    let spec = resolve_spec(&args.spec)?;
    let count = match args.k {
        Some(k) => k + 1,
        None => (args.n / 4).min(64),
    };
    let dec = generator_eigs(&spec, args.n, count)?;
    formats::write_oracle_grid(&args.out, &dec)?;
    if let Some(p) = &args.nu_out {
        formats::write_nu_table(p, &dec, args.delta)?;
    }
    if let Some(p) = &args.p_out {
        let k = match args.k {
            Some(k) => k,
            None => dec.truncation_level(args.delta, TRUNCATION_TOLERANCE)?,
        };
        formats::write_transition_matrix(p, &transition_density(&dec, args.delta, k)?)?;
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let path = formats::read_path(&args.data)?;
    let cfg = EstimateConfig {
        level: args.level,
        s: args.s,
        order: estimate::DEFAULT_ORDER,
        plug_in: PlugInConfig { interval: args.interval, grid_points: args.grid, clip: args.clip },
    };
    let level = cfg.resolve_level(path.transitions())?;
    let basis = Basis::new(level, cfg.order)?;
    if let Some(p) = &args.dump_basis {
        formats::write_basis_dump(p, &basis, 1025)?;
    }
    let result = estimate::estimate_with_basis(&path, &basis, &cfg.plug_in)?;
    formats::write_json(&args.out, &EstimateOutput::from(&result))
}

fn study_config(args: RateStudyArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => formats::read_json::<ExperimentConfig>(p)
            .map_err(|e| Error::Config(e.to_string()))?,
        None => {
            let n_values = args
                .n_values
                .clone()
                .ok_or_else(|| Error::Config("--n-values is required without --config".into()))?;
            ExperimentConfig::new(SpecFile::Preset("unit".into()), n_values)
        }
    };
    if let Some(v) = args.spec {
        cfg.spec = SpecFile::Preset(v);
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.n_values {
        cfg.n_values = v;
    }
    if let Some(v) = args.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = args.base_seed {
        cfg.base_seed = v;
    }
    if let Some(v) = args.s {
        cfg.s = v;
    }
    if args.level.is_some() {
        cfg.level = args.level;
    }
    if let Some((a, b)) = args.interval {
        cfg.interval = [a, b];
    }
    if let Some(v) = args.mode {
        cfg.mode = v;
    }
    if let Some(v) = args.substeps {
        cfg.substeps = v;
    }
    if let Some(v) = args.clip {
        cfg.clip = v;
    }
    if let Some(v) = args.oracle_n {
        cfg.oracle_n = v;
    }
    if args.out_dir.is_some() {
        cfg.out_dir = args.out_dir;
    }
    Ok(cfg)
}

fn rate_study(args: RateStudyArgs) -> Result<()> {
    let cfg = study_config(args)?;
    let result = harness::rate_study(&cfg)?;
    let spec_id = cfg.spec.to_spec()?.id().to_string();
    let files = formats::emit_report(&result, &spec_id, Path::new(&cfg.output_dir()))?;
    match &result.fit {
        Some(f) => println!(
            "sigma2 slope {:.4} ± {:.4} (theory {:.4}); records in {}",
            f.sigma2.slope,
            f.sigma2.slope_se,
            result.exponents.sigma2,
            files.records.display()
        ),
        None => println!("no fit: {}", result.fit_reason.as_deref().unwrap_or("unknown")),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Oracle(a) => oracle(a),
        Command::Estimate(a) => estimate(a),
        Command::RateStudy(a) => rate_study(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sdiff: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
