use core::f64::consts::PI;

use sdiff::formats::{emit_report, read_json, read_records, Summary};
use sdiff::harness::{
    fit_rates, rate_study, rate_study_with, run_single, summarize, ExperimentConfig, RunRecord,
    Truth,
};
use sdiff::spec_file::SpecFile;
use sdiff::Error;
use sdiff_core::estimate::{plug_in, PlugInOutcome};
use sdiff_core::stats::median;
use sdiff_core::{Basis, PlugInConfig};

fn unit_config(n_values: Vec<usize>) -> ExperimentConfig {
    ExperimentConfig::new(SpecFile::Preset("unit".into()), n_values)
}

#[test]
fn run_single_example_and_replay() {
    let mut cfg = unit_config(vec![20_000]);
    cfg.level = Some(3);
    let truth = Truth::from_config(&cfg).unwrap();
    let rec = run_single(&truth, &cfg, 20_000, 1).unwrap();
    let k = rec.kappa1.unwrap();
    assert!((0.56..0.66).contains(&k), "{k}");
    assert_eq!(rec.level, 3);
    assert!(rec.mu_mass_error.abs() < 1e-12);
    assert_eq!(run_single(&truth, &cfg, 20_000, 1).unwrap(), rec);
}

#[test]
fn noise_free_pipeline_floor() {
    let cfg = unit_config(vec![1000]);
    let truth = Truth::from_config(&cfg).unwrap();
    let basis = Basis::new(5, 4).unwrap();
    let u = basis.project(truth.dec.eigenfunction(1)).unwrap();
    let mu = basis.project(truth.dec.mu()).unwrap();
    let kappa = (truth.dec.eigenvalues()[1] * cfg.delta).exp();
    let pc = PlugInConfig::default();
    let PlugInOutcome::Estimated(p) = plug_in(kappa, &u, &mu, &basis, cfg.delta, &pc).unwrap() else {
        panic!("degenerate");
    };
    let ones = vec![1.0; p.grid.len()];
    let err = sdiff::harness::l2_error(&p.grid, &p.sigma2, &ones);
    assert!(err < 1e-3, "{err}");
    assert!((truth.dec.eigenvalues()[1] + PI * PI / 2.0).abs() < 1e-3);
}

#[test]
fn rate_study_shape_requirements() {
    let mut cfg = unit_config(vec![1000, 2000]);
    cfg.replicates = 10;
    assert!(matches!(rate_study(&cfg), Err(Error::Config(_))));
    cfg.n_values = vec![1000, 2000, 4000];
    cfg.replicates = 9;
    assert!(matches!(rate_study(&cfg), Err(Error::Config(_))));
}

#[test]
fn small_study_is_deterministic_and_reports() {
    let mut cfg = unit_config(vec![1024, 2048, 4096]);
    cfg.replicates = 10;
    cfg.base_seed = 42;
    let truth = Truth::from_config(&cfg).unwrap();
    let a = rate_study_with(&truth, &cfg).unwrap();
    let b = rate_study_with(&truth, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 30);
    assert!((a.exponents.sigma2 + 2.0 / 7.0).abs() < 1e-15);
    assert!((a.exponents.drift + 1.0 / 7.0).abs() < 1e-15);
    let fit = a.fit.expect("fit");
    assert!(fit.sigma2.slope < 0.0);

    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&a, "unit", dir.path()).unwrap();
    assert_eq!(read_records(&files.records).unwrap(), a.records);
    let summary: Summary = read_json(&files.summary).unwrap();
    assert_eq!(summary.exponents, a.exponents);
    assert_eq!(summary.sizes.len(), 3);
    let json = std::fs::read_to_string(&files.summary).unwrap();
    assert!(json.contains("\"sigma2\": -0.2857142857142857"));
    let dat = std::fs::read_to_string(&files.loglog).unwrap();
    assert_eq!(dat.lines().count(), 4);
}

#[test]
fn all_degenerate_study_has_null_fit() {
    let records: Vec<RunRecord> = [100usize, 200]
        .iter()
        .flat_map(|&n| {
            (0..3).map(move |s| RunRecord {
                n,
                seed: s,
                err_sigma2: None,
                err_b: None,
                kappa1: None,
                degenerate: true,
                level: 1,
                err_mu: 0.3,
                mu_mass_error: 0.0,
            })
        })
        .collect();
    let sizes: Vec<_> = [100usize, 200]
        .iter()
        .map(|&n| summarize(n, &records.iter().filter(|r| r.n == n).collect::<Vec<_>>()))
        .collect();
    assert!(sizes.iter().all(|s| s.degenerate_fraction == 1.0));
    let (fit, reason) = fit_rates(&sizes);
    assert!(fit.is_none());
    let result = sdiff::harness::RateStudyResult {
        config: unit_config(vec![100, 200]),
        records,
        sizes,
        exponents: sdiff::harness::Exponents::for_smoothness(2.0),
        fit,
        fit_reason: reason,
    };
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&result, "unit", dir.path()).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(files.summary).unwrap()).unwrap();
    assert!(json["fit"].is_null());
    assert!(json["reason"].as_str().unwrap().contains("need at least 2"));
}

/// Bootstrap-free check of the 1/√R law: the spread of per-batch medians
/// shrinks by about two when the batch size quadruples.
#[test]
fn median_standard_error_scales_with_replicates() {
    let mut cfg = unit_config(vec![2048]);
    cfg.level = Some(2);
    let truth = Truth::from_config(&cfg).unwrap();
    let errs: Vec<f64> = (0..640u64)
        .map(|s| run_single(&truth, &cfg, 2048, 10_000 + s).unwrap())
        .map(|r| r.err_sigma2.unwrap_or(f64::INFINITY))
        .collect();
    let spread = |batch: usize| {
        let meds: Vec<f64> = errs.chunks_exact(batch).map(|c| median(c).unwrap()).collect();
        sdiff_core::stats::variance(&meds).sqrt()
    };
    let ratio = spread(10) / spread(40);
    assert!((1.3..3.2).contains(&ratio), "{ratio}");
}
