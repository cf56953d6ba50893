//! Spectral estimation of the diffusion coefficient and drift of a reflected
//! scalar diffusion on `[0, 1]` from equidistant low-frequency observations.
//!
//! The crate is `no_std` and needs only `alloc`. It contains:
//!
//! - [`basis`]: orthonormalized dyadic spline spaces `V_J` with exact
//!   evaluation of values and derivatives up to order two.
//! - [`oracle`]: ground truth for a known diffusion: invariant density, the
//!   scale-type function `S = σ²μ/2`, Neumann eigenpairs of the generator and
//!   the transition density built from them.
//! - [`simulate`]: folding Euler scheme and an exact spectral sampler.
//! - [`estimate`]: empirical operators, the generalized eigenproblem and the
//!   plug-in estimators of `σ²` and `b`.
//!
//! File formats, the command line and Monte Carlo studies live in the `sdiff`
//! companion crate.
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod basis;
pub mod diffusion;
pub mod error;
pub mod estimate;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod simulate;
pub mod stats;

pub use basis::{Basis, Expansion};
pub use diffusion::{Coefficient, DiffusionSpec, Preset, SmoothnessClass};
pub use error::{Error, Result};
pub use estimate::{
    Degeneracy, EmpiricalOperators, EstimateConfig, EstimateResult, LevelTarget, PlugInConfig,
};
pub use oracle::{InvariantDensity, Profile, SpectralDecomposition, TransitionDensity};
pub use simulate::{ExactSampler, Init, SampleMode, SamplePath};
