//! Sampling and summary statistics shared by the simulators, tests and the
//! experiment harness.

use alloc::vec::Vec;

/// Inverse-CDF sampler for a density tabulated on an increasing grid.
///
/// The CDF is the running trapezoid integral of the (nonnegative part of
/// the) density, normalized to end at 1; draws interpolate it linearly.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    /// Returns `None` if the density carries no positive mass.
    pub fn new(grid: &[f64], density: &[f64]) -> Option<Self> {
        assert_eq!(grid.len(), density.len());
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..grid.len() {
            let a = density[i - 1].max(0.0);
            let b = density[i].max(0.0);
            acc += 0.5 * (grid[i] - grid[i - 1]) * (a + b);
            cdf.push(acc);
        }
        if !(acc > 0.0) || !acc.is_finite() {
            return None;
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Some(Self { grid: grid.to_vec(), cdf })
    }

    /// Maps `u ∈ [0, 1)` to a point of the grid's range.
    pub fn quantile(&self, u: f64) -> f64 {
        let j = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let (x0, x1) = (self.grid[j - 1], self.grid[j]);
        if c1 > c0 {
            (x0 + (x1 - x0) * (u - c0) / (c1 - c0)).clamp(x0, x1)
        } else {
            x0
        }
    }

    /// The piecewise-linear CDF evaluated at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.grid[0] {
            return 0.0;
        }
        let j = self.grid.partition_point(|&g| g < x);
        if j >= self.grid.len() {
            return 1.0;
        }
        let (x0, x1) = (self.grid[j - 1], self.grid[j]);
        let t = (x - x0) / (x1 - x0);
        self.cdf[j - 1] + t * (self.cdf[j] - self.cdf[j - 1])
    }
}

/// One-sample Kolmogorov–Smirnov distance against a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Median; `None` for an empty slice.
pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}

/// Ordinary least squares line with the slope's standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Zero when only two points are fitted.
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let r = b - intercept - slope * a;
                r * r
            })
            .sum();
        libm::sqrt(rss / (n - 2.0) / sxx)
    } else {
        0.0
    };
    Some(LineFit { slope, intercept, slope_se })
}

/// Count of strict increases in a sequence (inversions of a nonincreasing trend).
pub fn increases(v: &[f64]) -> usize {
    v.windows(2).filter(|w| w[1] > w[0]).count()
}
