//! The unknown pair `(σ, b)` of a reflected diffusion on `[0, 1]`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// A coefficient function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `Σ a_k x^k`, lowest degree first.
    Polynomial(Vec<f64>),
    /// `Σ a_k cos(kπx)`, `k = 0, 1, …`.
    CosineSeries(Vec<f64>),
    /// Values on the uniform grid `i / (len - 1)`, linearly interpolated.
    Tabulated(Vec<f64>),
}

impl Coefficient {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Polynomial(a) => a.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Coefficient::CosineSeries(a) => a
                .iter()
                .enumerate()
                .map(|(k, c)| c * libm::cos(k as f64 * PI * x))
                .sum(),
            Coefficient::Tabulated(v) => {
                let n = v.len() - 1;
                if n == 0 {
                    return v[0];
                }
                let t = x.clamp(0.0, 1.0) * n as f64;
                let i = (libm::floor(t) as usize).min(n - 1);
                let w = t - i as f64;
                (1.0 - w) * v[i] + w * v[i + 1]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Coefficient::Polynomial(a) | Coefficient::CosineSeries(a) if a.is_empty() => Err(
                Error::InvalidParameter("coefficient series must not be empty".into()),
            ),
            Coefficient::Tabulated(v) if v.len() < 2 => Err(Error::InvalidParameter(
                "tabulated coefficient needs at least two values".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Parameters `(s, C, c)` of the smoothness class: Sobolev order, norm
/// bound and ellipticity floor. Only the floor is checked numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessClass {
    pub s: f64,
    pub norm_bound: f64,
    pub ellipticity: f64,
}

impl Default for SmoothnessClass {
    fn default() -> Self {
        Self { s: 2.0, norm_bound: 10.0, ellipticity: 0.25 }
    }
}

/// Named ground-truth models used throughout tests and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `σ ≡ 1`, `b ≡ 0`: reflected Brownian motion.
    Unit,
    /// `σ ≡ √2`, `b ≡ 0`.
    Sqrt2,
    /// `σ ≡ 1`, `b(x) = 1 − 2x`: mean reversion to ½.
    Restoring,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Unit, Preset::Sqrt2, Preset::Restoring];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Unit => "unit",
            Preset::Sqrt2 => "sqrt2",
            Preset::Restoring => "restoring",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn spec(self) -> DiffusionSpec {
        let (sigma, drift) = match self {
            Preset::Unit => (Coefficient::Constant(1.0), Coefficient::Constant(0.0)),
            Preset::Sqrt2 => (Coefficient::Constant(SQRT_2), Coefficient::Constant(0.0)),
            Preset::Restoring => (
                Coefficient::Constant(1.0),
                Coefficient::Polynomial(alloc::vec![1.0, -2.0]),
            ),
        };
        DiffusionSpec::new(self.name(), sigma, drift, SmoothnessClass::default())
            .expect("presets are elliptic")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpec {
    id: String,
    sigma: Coefficient,
    drift: Coefficient,
    class: SmoothnessClass,
}

/// Points used to check ellipticity and boundedness.
const CHECK_POINTS: usize = 1024;

impl DiffusionSpec {
    pub fn new(
        id: impl ToString,
        sigma: Coefficient,
        drift: Coefficient,
        class: SmoothnessClass,
    ) -> Result<Self> {
        sigma.validate()?;
        drift.validate()?;
        if !(class.ellipticity > 0.0 && class.s > 0.0 && class.norm_bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "class parameters must be positive: {class:?}"
            )));
        }
        for i in 0..=CHECK_POINTS {
            let x = i as f64 / CHECK_POINTS as f64;
            let s = sigma.value(x);
            if !(s >= class.ellipticity) || !s.is_finite() {
                return Err(Error::Ellipticity { x, value: s, bound: class.ellipticity });
            }
            if !drift.value(x).is_finite() {
                return Err(Error::UnboundedDrift(x));
            }
        }
        Ok(Self { id: id.to_string(), sigma, drift, class })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn class(&self) -> SmoothnessClass {
        self.class
    }

    pub fn sigma_coefficient(&self) -> &Coefficient {
        &self.sigma
    }

    pub fn drift_coefficient(&self) -> &Coefficient {
        &self.drift
    }

    pub fn sigma(&self, x: f64) -> f64 {
        self.sigma.value(x)
    }

    pub fn sigma2(&self, x: f64) -> f64 {
        let s = self.sigma.value(x);
        s * s
    }

    pub fn drift(&self, x: f64) -> f64 {
        self.drift.value(x)
    }

    /// `(inf σ, sup |b|)` over the check grid.
    pub fn bounds(&self) -> (f64, f64) {
        (0..=CHECK_POINTS)
            .map(|i| i as f64 / CHECK_POINTS as f64)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), x| {
                (lo.min(self.sigma(x)), hi.max(self.drift(x).abs()))
            })
    }
}
