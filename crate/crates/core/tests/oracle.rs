use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdiff_core::oracle::{
    generator_eigs, invariant_density, sample_invariant, scale_function, transition_density,
};
use sdiff_core::quadrature::{simpson, GaussLegendre};
use sdiff_core::stats::{ks_distance, mean, InverseCdf};
use sdiff_core::{Coefficient, DiffusionSpec, Preset, SmoothnessClass};

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Normalizer of exp(2x − 2x²) by composite Gauss, independent of the grid path.
fn restoring_normalizer() -> f64 {
    GaussLegendre::ten().integrate_composite(0.0, 1.0, 64, |y| (2.0 * y - 2.0 * y * y).exp())
}

/// Smooth random coefficients with σ ∈ [0.5, 2] and b ∈ [−2, 2].
fn random_spec(seed: u64) -> DiffusionSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = |mean: f64, amp: f64| {
        let mut c = vec![mean];
        c.extend([0.5, 0.3, 0.2].map(|w| amp * w * rng.random_range(-1.0..1.0)));
        c
    };
    let sigma = series(1.25, 0.75);
    let mut drift = series(0.0, 1.0);
    drift[0] = rng.random_range(-1.0..1.0);
    DiffusionSpec::new(
        format!("random-{seed}"),
        Coefficient::CosineSeries(sigma),
        Coefficient::CosineSeries(drift),
        SmoothnessClass { s: 2.0, norm_bound: 100.0, ellipticity: 0.5 },
    )
    .unwrap()
}

#[test]
fn random_specs_stay_in_range() {
    for seed in 0..20 {
        let spec = random_spec(seed);
        let (lo, hi) = spec.bounds();
        assert!(lo >= 0.5, "{lo}");
        let sup_sigma = (0..=1000).map(|i| spec.sigma(i as f64 / 1000.0)).fold(0.0, f64::max);
        assert!(sup_sigma <= 2.0 && hi <= 2.0);
    }
}

#[test]
fn invariant_density_closed_form() {
    let spec = Preset::Restoring.spec();
    let d = invariant_density(&spec, 512).unwrap();
    let z = restoring_normalizer();
    let err = max_abs(d.grid.iter().zip(&d.mu).map(|(x, m)| m - (2.0 * x - 2.0 * x * x).exp() / z));
    assert!(err < 1e-8, "{err:e}");
    assert!((simpson(&d.mu, 1.0 / 512.0) - 1.0).abs() < 1e-12);
    for i in 0..=256 {
        assert!((d.mu[i] - d.mu[512 - i]).abs() < 1e-12);
    }
    let argmax = (0..=512).max_by(|&a, &b| d.mu[a].total_cmp(&d.mu[b])).unwrap();
    assert_eq!(argmax, 256);

    let s = scale_function(&spec, 512).unwrap();
    let err = max_abs(d.grid.iter().zip(&s).map(|(x, v)| v - 0.5 * (2.0 * x - 2.0 * x * x).exp() / z));
    assert!(err < 1e-8);
}

#[test]
fn normalization_for_random_specs() {
    for seed in 0..5 {
        let d = invariant_density(&random_spec(seed), 256).unwrap();
        assert!((simpson(&d.mu, 1.0 / 256.0) - 1.0).abs() < 1e-10);
        assert!(d.mu.iter().all(|m| *m > 0.0));
    }
}

#[test]
fn unit_eigenvalue_and_second_order() {
    let target = -PI * PI / 2.0;
    let errs: Vec<f64> = [1024, 2048, 4096]
        .iter()
        .map(|&n| {
            let dec = generator_eigs(&Preset::Unit.spec(), n, 3).unwrap();
            (dec.eigenvalues()[1] - target).abs()
        })
        .collect();
    assert!(errs[2] / target.abs() < 1e-5);
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
    }
    let order = (errs[0] / errs[2]).log2() / 2.0;
    assert!((1.7..=2.3).contains(&order));
}

#[test]
fn decomposition_invariants() {
    let presets = Preset::ALL.map(|p| p.spec());
    for spec in presets.iter().chain([random_spec(3)].iter()) {
        let dec = generator_eigs(spec, 1024, 5).unwrap();
        assert!(dec.eigenvalues()[0].abs() < 1e-9);
        let u0 = dec.eigenfunction(0);
        assert!(max_abs(u0.iter().map(|v| v - u0[0])) < 1e-8);
        for j in 0..5 {
            for k in 0..5 {
                let e = if j == k { 1.0 } else { 0.0 };
                assert!((dec.inner(j, k) - e).abs() < 1e-8, "{} {j} {k}", spec.id());
            }
            let du = dec.derivative(j);
            let n = dec.n();
            let scale = max_abs(du.iter().copied());
            assert!(du[0].abs() < 1e-4 * scale.max(1.0) && du[n].abs() < 1e-4 * scale.max(1.0));
            assert!(dec.eigenfunction(j)[0] > 0.0);
        }
        assert!(dec.eigenvalues()[1] <= -dec.min_scale());
    }
}

#[test]
fn spectral_gap_bound_and_monotone_first_mode() {
    for seed in 0..20 {
        let spec = random_spec(seed);
        let dec = generator_eigs(&spec, 512, 2).unwrap();
        let nu1 = dec.eigenvalues()[1];
        assert!(nu1 <= -dec.min_scale(), "seed {seed}: {nu1} vs {}", dec.min_scale());
        let u1 = dec.eigenfunction(1);
        assert!(u1.windows(2).all(|w| w[1] < w[0]), "seed {seed} not monotone");
    }
}

#[test]
fn identity_reconstruction_matches_truth() {
    let cases = [(Preset::Unit, 1.0), (Preset::Sqrt2, 2.0), (Preset::Restoring, 1.0)];
    for (preset, sigma2) in cases {
        let spec = preset.spec();
        let dec = generator_eigs(&spec, 4096, 3).unwrap();
        let s = dec.reconstruct_sigma2(0.1, 0.9).unwrap();
        let rel = max_abs(s.values.iter().map(|v| (v - sigma2) / sigma2));
        assert!(rel < 1e-3, "{}: {rel:e}", spec.id());
        let b = dec.reconstruct_drift(0.1, 0.9).unwrap();
        let abs = max_abs(b.values.iter().zip(&b.x).map(|(v, x)| v - spec.drift(*x)));
        assert!(abs < 5e-3, "{}: {abs:e}", spec.id());
        let alt = dec.drift_from_scale(0.1, 0.9).unwrap();
        let gap = max_abs(alt.values.iter().zip(&b.values).map(|(a, c)| a - c));
        assert!(gap < 5e-3);
    }
}

#[test]
fn reconstruction_converges_with_grid() {
    let spec = Preset::Restoring.spec();
    let err = |n: usize| {
        let dec = generator_eigs(&spec, n, 2).unwrap();
        let s = dec.reconstruct_sigma2(0.1, 0.9).unwrap();
        let b = dec.reconstruct_drift(0.1, 0.9).unwrap();
        (
            max_abs(s.values.iter().map(|v| v - 1.0)),
            max_abs(b.values.iter().zip(&b.x).map(|(v, x)| v - (1.0 - 2.0 * x))),
        )
    };
    let (s1, b1) = err(512);
    let (s2, b2) = err(2048);
    assert!((s1 / s2).log2() / 2.0 >= 1.5, "{s1:e} {s2:e}");
    assert!((b1 / b2).log2() / 2.0 >= 1.5, "{b1:e} {b2:e}");
}

#[test]
fn transition_density_laws() {
    for preset in Preset::ALL {
        let dec = generator_eigs(&preset.spec(), 512, 40).unwrap();
        let k = dec.truncation_level(0.1, 1e-12).unwrap();
        let p = transition_density(&dec, 0.1, k).unwrap();
        let mass = max_abs((0..=dec.n()).map(|x| p.row_mass(x) - 1.0));
        assert!(mass < 1e-8, "{mass:e}");
        assert!(p.detailed_balance_residual(dec.mu()) < 1e-8);
    }
}

#[test]
fn long_step_forgets_the_start() {
    let dec = generator_eigs(&Preset::Unit.spec(), 256, 4).unwrap();
    let delta = 31.0 / (-dec.eigenvalues()[1]);
    let p = transition_density(&dec, delta, 1).unwrap();
    for x in 0..=256 {
        for y in 0..=256 {
            assert!((p.get(x, y) - dec.mu()[y]).abs() < 1e-10);
        }
    }
}

#[test]
fn invariant_sampling() {
    let dec = generator_eigs(&Preset::Unit.spec(), 256, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws: Vec<f64> = (0..10_000).map(|_| sample_invariant(&dec, &mut rng)).collect();
    assert!(draws.iter().all(|x| (0.0..=1.0).contains(x)));
    assert!(ks_distance(&draws, |x| x) < 0.02);

    // peaked law: mean within three standard errors of ∫xμ
    let spec = DiffusionSpec::new(
        "peaked",
        Coefficient::Constant(1.0),
        Coefficient::Polynomial(vec![3.0, -6.0]),
        SmoothnessClass::default(),
    )
    .unwrap();
    let dec = generator_eigs(&spec, 512, 2).unwrap();
    let mean_true: f64 = dec.grid().iter().zip(dec.weights()).map(|(x, w)| x * w).sum();
    let second: f64 = dec.grid().iter().zip(dec.weights()).map(|(x, w)| x * x * w).sum();
    let sd = (second - mean_true * mean_true).sqrt();
    let draws: Vec<f64> = (0..10_000).map(|_| sample_invariant(&dec, &mut rng)).collect();
    assert!((mean(&draws) - mean_true).abs() < 3.0 * sd / 100.0);
    let inv = InverseCdf::new(dec.grid(), dec.mu()).unwrap();
    assert!(ks_distance(&draws, |x| inv.cdf(x)) < 0.02);
}
