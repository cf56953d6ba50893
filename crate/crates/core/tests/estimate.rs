use core::f64::consts::PI;

use proptest::prelude::*;
use sdiff_core::estimate::{
    build_operators, estimate_mu, estimate_with_basis, plug_in, solve_eigenpair, EigenOutcome,
    PlugInOutcome,
};
use sdiff_core::linalg::symmetric_eigen;
use sdiff_core::oracle::generator_eigs;
use sdiff_core::quadrature::GaussLegendre;
use sdiff_core::{Basis, ExactSampler, PlugInConfig, Preset, SampleMode, SamplePath};

fn unit_path(n: usize, seed: u64) -> SamplePath {
    let spec = Preset::Unit.spec();
    let dec = generator_eigs(&spec, 1024, 64).unwrap();
    ExactSampler::new(&dec, 0.1, spec.id()).unwrap().sample_path(n, seed).unwrap()
}

fn l2_deviation_from_one(basis: &Basis, c: &[f64]) -> f64 {
    let e = basis.expansion(c);
    GaussLegendre::ten()
        .integrate_composite(0.0, 1.0, basis.intervals(), |x| (e.eval(x, 0) - 1.0).powi(2))
        .sqrt()
}

#[test]
fn mu_hat_on_long_uniform_path() {
    let basis = Basis::new(3, 4).unwrap();
    let path = unit_path(100_000, 1);
    let c = estimate_mu(path.values(), &basis).unwrap();
    let err = l2_deviation_from_one(&basis, &c);
    assert!(err < 0.05, "{err}");
}

#[test]
fn gram_approaches_identity_for_uniform_law() {
    let basis = Basis::new(3, 4).unwrap();
    let path = unit_path(100_000, 2);
    let ops = build_operators(path.values(), &basis).unwrap();
    let n = basis.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((ops.gram[(i, j)] - target).abs());
        }
    }
    assert!(worst < 0.05, "{worst}");
}

#[test]
fn oracle_fed_plug_in() {
    let basis = Basis::new(6, 4).unwrap();
    let u = basis.project_fn(|x| -(2.0f64).sqrt() * (PI * x).cos());
    let mu = basis.constant_coeffs();
    let delta = 0.1;
    let kappa = (-delta * PI * PI / 2.0).exp();
    let cfg = PlugInConfig { interval: (0.1, 0.9), grid_points: 512, clip: 0.05 };
    let PlugInOutcome::Estimated(p) = plug_in(kappa, &u, &mu, &basis, delta, &cfg).unwrap() else {
        panic!("degenerate");
    };
    assert_eq!(p.clip_count, 0);
    assert!(p.sigma2.iter().all(|s| (s - 1.0).abs() < 1e-3));
    assert!(p.drift.iter().all(|b| b.abs() < 1e-2));
}

#[test]
fn oracle_fed_plug_in_with_drift() {
    let spec = Preset::Restoring.spec();
    let dec = generator_eigs(&spec, 4096, 4).unwrap();
    let basis = Basis::new(5, 4).unwrap();
    let uc = basis.project(dec.eigenfunction(1)).unwrap();
    let mc = basis.project(dec.mu()).unwrap();
    let delta = 0.1;
    let kappa = (dec.eigenvalues()[1] * delta).exp();
    let cfg = PlugInConfig { interval: (0.1, 0.9), grid_points: 256, clip: 0.05 };
    let PlugInOutcome::Estimated(p) = plug_in(kappa, &uc, &mc, &basis, delta, &cfg).unwrap() else {
        panic!("degenerate");
    };
    for (i, &x) in p.grid.iter().enumerate() {
        assert!((p.sigma2[i] - 1.0).abs() < 2e-3, "σ² at {x}: {}", p.sigma2[i]);
        assert!((p.drift[i] - (1.0 - 2.0 * x)).abs() < 2e-2, "b at {x}: {}", p.drift[i]);
    }
}

#[test]
fn kappa_out_of_range_and_result_invariants() {
    let basis = Basis::new(2, 4).unwrap();
    let path = unit_path(5000, 3);
    let cfg = PlugInConfig::default();
    let est = estimate_with_basis(&path, &basis, &cfg).unwrap();
    assert!(!est.is_degenerate());
    let k = est.kappa1.unwrap();
    assert!(k > 0.0 && k < 1.0);
    assert!((est.nu1.unwrap() - k.ln() / 0.1).abs() < 1e-12);
    assert!(est.sigma2.iter().all(|s| *s > 0.0));
    let e = basis.expansion(&est.u1_coeffs);
    assert!(e.eval(1.0, 0) > e.eval(0.0, 0));
    assert!(plug_in(1.0, &est.u1_coeffs, &est.mu_coeffs, &basis, 0.1, &cfg).is_err());
}

#[test]
fn path_with_too_few_distinct_values_is_degenerate() {
    let basis = Basis::new(3, 4).unwrap();
    let values: Vec<f64> = (0..400).map(|i| [0.2, 0.4, 0.6, 0.8][i % 4]).collect();
    let path = SamplePath::new(0.1, values, "four-points", 0, SampleMode::Exact).unwrap();
    let est = estimate_with_basis(&path, &basis, &PlugInConfig::default()).unwrap();
    assert!(est.is_degenerate());
    assert!(est.sigma2.is_empty() && est.kappa1.is_none());
}

fn spread(raw: Vec<f64>) -> Vec<f64> {
    raw.into_iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operator_identities(raw in prop::collection::vec(0.0f64..=1.0, 40..200), level in 0u32..3) {
        let values = spread(raw);
        let basis = Basis::new(level, 4).unwrap();
        prop_assume!(values.len() > basis.dim());
        let ops = build_operators(&values, &basis).unwrap();
        let one = basis.constant_coeffs();
        let g1 = ops.gram.mul_vec(&one);
        let p1 = ops.transition.mul_vec(&one);
        for (g, p) in g1.iter().zip(&p1) {
            prop_assert!((g - p).abs() < 1e-12 * (1.0 + g.abs()));
        }
        prop_assert!((ops.gram.quad_form(&one) - 1.0).abs() < 1e-12);
        prop_assert_eq!(ops.gram.max_asymmetry(), 0.0);
        prop_assert_eq!(ops.transition.max_asymmetry(), 0.0);
        let spectrum = symmetric_eigen(&ops.gram).unwrap().values;
        prop_assert!(spectrum.iter().all(|v| *v > -1e-12));
        let mass: f64 = ops.mu_coeffs.iter().zip(&one).map(|(a, b)| a * b).sum();
        prop_assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pencil_top_pair_is_the_constant(raw in prop::collection::vec(0.0f64..=1.0, 200..400)) {
        let values = spread(raw);
        let basis = Basis::new(2, 4).unwrap();
        let ops = build_operators(&values, &basis).unwrap();
        if let EigenOutcome::Solved(pair) = solve_eigenpair(&ops, &basis).unwrap() {
            prop_assert!((pair.top - 1.0).abs() < 1e-10);
            prop_assert!(pair.spectrum.iter().all(|v| *v <= 1.0 + 1e-10));
            let one = basis.constant_coeffs();
            let cos = pair.top_vector.iter().zip(&one).map(|(a, b)| a * b).sum::<f64>();
            prop_assert!(cos > 1.0 - 1e-10);
        }
    }

    #[test]
    fn plug_in_is_homogeneous_in_u1(scale in prop_oneof![-50.0f64..-0.02, 0.02f64..50.0]) {
        let basis = Basis::new(3, 4).unwrap();
        let u = basis.project_fn(|x| -(PI * x).cos() + 0.1 * (2.0 * PI * x).cos());
        let mu = basis.project_fn(|x| 1.0 + 0.2 * (PI * x).cos());
        let scaled: Vec<f64> = u.iter().map(|v| v * scale).collect();
        let cfg = PlugInConfig::default();
        let (PlugInOutcome::Estimated(a), PlugInOutcome::Estimated(b)) = (
            plug_in(0.6, &u, &mu, &basis, 0.1, &cfg).unwrap(),
            plug_in(0.6, &scaled, &mu, &basis, 0.1, &cfg).unwrap(),
        ) else {
            panic!("degenerate");
        };
        prop_assert_eq!(a.clip_count, b.clip_count);
        for i in 0..a.grid.len() {
            prop_assert!((a.sigma2[i] - b.sigma2[i]).abs() < 1e-9 * a.sigma2[i].abs().max(1.0));
            prop_assert!((a.drift[i] - b.drift[i]).abs() < 1e-9 * a.drift[i].abs().max(1.0));
        }
    }
}
