//! Quadrature rules on uniform grids and Gauss–Legendre panels.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of `P_n`, found by Newton iteration from the
    /// Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, z);
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// The ten-point rule, exact for polynomials of degree up to 19.
    pub fn ten() -> Self {
        Self::new(10)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, w * half))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule with `panels` equal panels on `[a, b]`.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * h;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Uniform grid of `n + 1` points on `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Composite Simpson rule on a uniform grid with an even number of intervals.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "Simpson needs an even interval count");
    let mut acc = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Running integral `∫_0^{x_i} f` on a uniform grid.
///
/// Even nodes carry the composite Simpson value; odd nodes use the
/// quadratic through the enclosing panel, so the final entry equals
/// [`simpson`] exactly.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "Simpson needs an even interval count");
    let mut out = vec![0.0; n + 1];
    let mut i = 0;
    while i < n {
        let (f0, f1, f2) = (values[i], values[i + 1], values[i + 2]);
        out[i + 1] = out[i] + h * (5.0 * f0 + 8.0 * f1 - f2) / 12.0;
        out[i + 2] = out[i] + h * (f0 + 4.0 * f1 + f2) / 3.0;
        i += 2;
    }
    out
}

/// Trapezoidal rule on a (not necessarily uniform) grid.
pub fn trapezoid(x: &[f64], values: &[f64]) -> f64 {
    x.windows(2)
        .zip(values.windows(2))
        .map(|(xs, vs)| 0.5 * (xs[1] - xs[0]) * (vs[0] + vs[1]))
        .sum()
}

/// Trapezoidal weights on a uniform grid with spacing `h`.
pub fn trapezoid_weights(points: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; points];
    w[0] = 0.5 * h;
    w[points - 1] = 0.5 * h;
    w
}
